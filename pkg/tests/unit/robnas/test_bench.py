import gzip
import io
import json
import pickle
from pathlib import Path

import pytest

from robnas.algo.cellspace import parse_genotype
from robnas.data.bench import METRICS, ROBUST_MEAN, BenchRecord, BenchStore, Dataset
from robnas.data.cell import Genotype, Operator
from robnas.errors import NotFoundError, ParseError, ValidationError
from robnas.readers.bench import ingest, read_bench, write_bench
from robnas.readers.file_reader import BaseReader

FIXTURES = Path(__file__).parents[2] / 'fixtures'

ALL_CONV = parse_genotype('|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|nor_conv_3x3~0|nor_conv_3x3~1|nor_conv_3x3~2|')
SPARSE = parse_genotype('|none~0|+|nor_conv_1x1~0|none~1|+|none~0|none~1|skip_connect~2|')
# Same function as SPARSE: node 1 is dead, so the operators on its outgoing edges don't matter
SPARSE_TWIN = parse_genotype('|none~0|+|nor_conv_1x1~0|avg_pool_3x3~1|+|none~0|nor_conv_3x3~1|skip_connect~2|')

METRIC_VALUES = {'clean': 0.8, 'fgsm_3_255': 0.7, 'pgd_3_255': 0.69, 'fgsm_8_255': 0.54, 'pgd_8_255': 0.48}


def read(text, format='jsonl'):
    return read_bench(BaseReader(io.StringIO(text)), format)


def line(genotype=ALL_CONV, dataset='cifar10', seed=0, metrics=None, **extra):
    data = {'genotype': str(genotype), 'dataset': dataset, 'seed': seed, 'metrics': metrics or METRIC_VALUES, **extra}
    return json.dumps(data) + '\n'


@pytest.fixture
def store():
    return ingest(FIXTURES / 'bench-small.jsonl')


def test_ingest(store):
    assert len(store) == 4
    assert store.datasets == (Dataset.CIFAR10, Dataset.CIFAR100)
    assert store.genotypes('cifar10') == (ALL_CONV, SPARSE)
    assert store.genotypes(Dataset.CIFAR100) == (ALL_CONV,)
    assert store.metric_names == (*METRICS, 'autoattack', ROBUST_MEAN)


def test_lookup(store):
    assert store.seed_count(ALL_CONV, 'cifar10') == 2
    assert store.lookup(ALL_CONV, 'cifar10', 'clean') == pytest.approx(0.79)
    assert store.lookup(ALL_CONV, 'cifar10', 'pgd_8_255') == pytest.approx(0.47)
    assert store.lookup(ALL_CONV, 'cifar10', ROBUST_MEAN) == pytest.approx(0.5925)
    assert store.lookup(ALL_CONV, 'cifar100', 'clean') == pytest.approx(0.55)
    assert store.lookup(SPARSE, 'cifar10', 'autoattack') == pytest.approx(0.2)

    metrics = store.lookup_all(SPARSE, 'cifar10')
    assert list(metrics) == [*METRICS, ROBUST_MEAN]
    assert metrics['robust_mean'] == pytest.approx((0.5 + 0.49 + 0.3 + 0.25) / 4)


def test_lookup_routes_isomorphic(store):
    assert store.resolve(SPARSE_TWIN, 'cifar10') == SPARSE
    assert store.resolve(SPARSE, 'cifar10') == SPARSE
    assert store.lookup(SPARSE_TWIN, 'cifar10', 'clean') == store.lookup(SPARSE, 'cifar10', 'clean')


def test_lookup_errors(store):
    with pytest.raises(NotFoundError):
        store.lookup(Genotype((Operator.AVG_POOL,) * 6), 'cifar10', 'clean')
    with pytest.raises(NotFoundError):
        store.lookup(SPARSE, 'cifar100', 'clean')
    with pytest.raises(NotFoundError):
        store.lookup(ALL_CONV, 'imagenet16_120', 'clean')
    with pytest.raises(NotFoundError):
        store.lookup(ALL_CONV, 'mnist', 'clean')
    with pytest.raises(NotFoundError):
        store.lookup(ALL_CONV, 'cifar100', 'autoattack')
    # Also a builtin LookupError
    with pytest.raises(LookupError):
        store.lookup(ALL_CONV, 'cifar10', 'nonexistent')


def test_column(store):
    assert list(store.column('cifar10', 'clean')) == pytest.approx([0.79, 0.6])
    assert list(store.column('cifar10', 'clean', [SPARSE])) == pytest.approx([0.6])


def test_csv_same_as_jsonl(store):
    from_csv = ingest(FIXTURES / 'bench-small.csv')

    assert len(from_csv) == len(store)
    for record in store:
        for metric in record.metrics:
            assert from_csv.lookup(record.genotype, record.dataset, metric) == \
                pytest.approx(store.lookup(record.genotype, record.dataset, metric))
    with pytest.raises(NotFoundError):
        from_csv.lookup(ALL_CONV, 'cifar10', 'autoattack')


def test_report(store):
    assert store.report() == {
        'records': 4,
        'metrics': [*METRICS, 'autoattack', ROBUST_MEAN],
        'datasets': {
            'cifar10': {'genotypes': 2, 'seeds': {'0': 2, '1': 1}},
            'cifar100': {'genotypes': 1, 'seeds': {'0': 1}},
        },
    }


def test_parse_errors():
    with pytest.raises(ParseError) as info:
        read(line() + '{"genotype": \n')
    assert info.value.line_no == 2
    assert str(info.value).startswith('line 2: Invalid JSON')

    with pytest.raises(ParseError, match='Missing keys: seed'):
        read('{"genotype": "x", "dataset": "cifar10", "metrics": {}}\n')

    with pytest.raises(ParseError, match='Unknown keys: comment'):
        read(line(comment='hi'))

    with pytest.raises(ParseError, match='misses metrics: pgd_8_255'):
        read(line(metrics={name: 0.5 for name in METRICS[:-1]}))

    with pytest.raises(ParseError, match='out of'):
        read(line(metrics={**METRIC_VALUES, 'clean': 1.5}))

    with pytest.raises(ParseError, match='Unknown dataset'):
        read(line(dataset='mnist'))

    with pytest.raises(ParseError) as info:
        read(line(genotype='|bad~0|+|none~0|none~1|+|none~0|none~1|none~2|'))
    assert info.value.line_no == 1


def test_duplicates():
    with pytest.raises(ParseError) as info:
        read(line() + line(seed=1) + line())
    assert info.value.line_no == 3
    assert 'first at line 1' in str(info.value)

    record = BenchRecord(ALL_CONV, 'cifar10', 0, METRIC_VALUES)
    with pytest.raises(ValidationError):
        BenchStore([record, record])


def test_csv_errors():
    header = 'genotype,dataset,seed,clean,fgsm_3_255,pgd_3_255,fgsm_8_255,pgd_8_255\n'

    with pytest.raises(ParseError, match='header'):
        read('genotype,seed\n', 'csv')

    with pytest.raises(ParseError) as info:
        read(header + f'{ALL_CONV},cifar10,0,0.8,0.7\n', 'csv')
    assert info.value.line_no == 2

    with pytest.raises(ParseError, match='Seed'):
        read(header + f'{ALL_CONV},cifar10,first,0.8,0.7,0.69,0.54,0.48\n', 'csv')

    with pytest.raises(ParseError, match='clean'):
        read(header + f'{ALL_CONV},cifar10,0,,0.7,0.69,0.54,0.48\n', 'csv')


def test_write_canonical(store):
    for format in ('jsonl', 'csv'):
        first = io.StringIO()
        write_bench(store, first, format)
        again = io.StringIO()
        write_bench(read(first.getvalue(), format), again, format)

        assert again.getvalue() == first.getvalue()


def test_gzip(tmp_path, store):
    path = tmp_path / 'bench.jsonl.gz'
    with gzip.open(path, 'wt', encoding='utf-8') as out:
        write_bench(store, out)

    assert ingest(path).report() == store.report()


def test_missing_file(tmp_path):
    with pytest.raises(NotFoundError):
        ingest(tmp_path / 'absent.jsonl')


def test_record_pickles():
    record = BenchRecord(ALL_CONV, 'cifar10', 0, METRIC_VALUES)
    copy = pickle.loads(pickle.dumps(record))

    assert copy == record
    assert copy.value(ROBUST_MEAN) == pytest.approx((0.7 + 0.69 + 0.54 + 0.48) / 4)
