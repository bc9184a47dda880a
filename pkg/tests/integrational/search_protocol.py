import sys
from pathlib import Path
sys.path.append(str(Path(__file__).resolve().parent))

from base import report, section, summary, timed

from robnas.algo.cellspace import SPACE_SIZE
from robnas.algo.searchers import exhaustive_optimum, run_many, search
from robnas.algo.synthetic import Landscape, planted_genotype, synthesize_benchmark
from robnas.data.search import Algorithm, SearchConfig

stores = {landscape: synthesize_benchmark(0, landscape) for landscape in Landscape}

# ==============================
section('100 runs x 150 queries')

for landscape, store in stores.items():
    for algorithm in Algorithm:
        cfg = SearchConfig(algorithm=algorithm, budget=150, runs=100)
        with timed(f'{landscape.value}/{algorithm.value}') as elapsed:
            result = run_many(store, cfg)
        within = all(run.queries_used <= 150 for run in result.results)
        report(f'{landscape.value}/{algorithm.value}', within and elapsed['seconds'] < 10,
               f"clean={result.means['clean']:.4f}")

# ==============================
section('Evolution against random search')

store = stores[Landscape.UNIMODAL_CONV_COUNT]
wins = 0
for run in range(100):
    evolved = search(store, SearchConfig(algorithm=Algorithm.REGULARIZED_EVOLUTION, budget=150), run)
    drawn = search(store, SearchConfig(algorithm=Algorithm.RANDOM_SEARCH, budget=150), run)
    wins += evolved.best_value >= drawn.best_value
report('paired runs', wins >= 80, f'{wins} of 100')

# ==============================
section('Local search climbs')

best = exhaustive_optimum(store, 'synthetic', 'clean')[0]
climbs = ends = 0
for run in range(20):
    result = search(store, SearchConfig(algorithm=Algorithm.LOCAL_SEARCH, budget=3000), run)
    climbs += len(result.local_optima)
    ends += sum(optimum == best for optimum in result.local_optima)
report('climbs ending at all-conv', climbs > 0, f'{ends} of {climbs}')

# ==============================
section('Full budget')

for landscape in (Landscape.PLANTED_OPTIMUM, Landscape.RUGGED_RANDOM):
    store = stores[landscape]
    optimum = exhaustive_optimum(store, 'synthetic', 'clean')[0]
    for algorithm in Algorithm:
        with timed(f'{landscape.value}/{algorithm.value}'):
            result = search(store, SearchConfig(algorithm=algorithm, budget=SPACE_SIZE))
        report(f'{landscape.value}/{algorithm.value} finds optimum',
               result.best_genotype == optimum and result.queries_used == SPACE_SIZE,
               f'{result.queries_used} queries')

report('planted optimum is the planted genotype',
       exhaustive_optimum(stores[Landscape.PLANTED_OPTIMUM], 'synthetic', 'clean')[0] == planted_genotype(0))

summary()
