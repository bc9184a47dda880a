import sys
from pathlib import Path
sys.path.append(str(Path(__file__).resolve().parent))

from base import report, section, summary, timed

from robnas.algo import cellspace
from robnas.algo.synthetic import functional_conv_count

# ==============================
section('Search space census')

with timed('enumeration and canonicalization') as elapsed:
    genotypes = cellspace.enumerate_genotypes()
    classes = cellspace.canonical_classes()

report('genotypes', len(genotypes) == cellspace.SPACE_SIZE, len(genotypes))
report('classes', len(classes) == cellspace.CLASS_COUNT, len(classes))
report('class sizes add up', sum(cell.class_size for cell in classes) == len(genotypes))
report('census time', elapsed['seconds'] < 10, f"{elapsed['seconds']:.2f}s")

# ==============================
section('Representatives')

report('representative is first member',
       all(cellspace.class_members(cell.representative)[0] == cell.representative for cell in classes))
report('index round trip',
       all(type(g).from_index(g.index) == g for g in genotypes[::97]))
report('string round trip',
       all(cellspace.parse_genotype(str(g)) == g for g in genotypes[::97]))

# ==============================
section('Conv counts')

counts = [functional_conv_count(cell.representative) for cell in classes]
for count in range(7):
    print(f"  {count} conv3x3: {counts.count(count)} classes")
report('single all-conv class', counts.count(6) == 1)

summary()
