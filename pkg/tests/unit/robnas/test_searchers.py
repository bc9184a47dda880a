import io
import logging

import pytest

from robnas.algo.cellspace import SPACE_SIZE, neighbors
from robnas.algo.searchers import (BudgetExhausted, Oracle, exhaustive_optimum, run_many,
                                   score_based_selection, search)
from robnas.algo.synthetic import planted_genotype, synthesize_benchmark
from robnas.data.bench import ROBUST_MEAN, Dataset
from robnas.data.cell import Genotype, Operator
from robnas.data.search import Algorithm, RunReport, SearchConfig
from robnas.errors import NotFoundError, ValidationError

ALL_CONV = Genotype((Operator.CONV3X3,) * 6)


@pytest.fixture(scope='module')
def unimodal():
    return synthesize_benchmark(0, 'unimodal_conv_count')


@pytest.fixture(scope='module')
def rugged():
    return synthesize_benchmark(0, 'rugged_random')


@pytest.fixture(scope='module')
def planted():
    return synthesize_benchmark(0, 'planted_optimum')


def config(algorithm, **kwargs):
    return SearchConfig(algorithm=algorithm, **{'budget': 150, 'runs': 1, **kwargs})


def test_oracle():
    store = synthesize_benchmark(0, noise_scale=0.0)
    oracle = Oracle(store, Dataset.SYNTHETIC, 'clean', budget=2)
    first, second, third = (Genotype.from_index(i) for i in range(3))

    oracle(first)
    oracle(first)
    oracle(second)
    assert oracle.queries == 2
    assert oracle.exhausted
    # Already seen: free
    assert oracle(first) == store.lookup(first, 'synthetic', 'clean')
    with pytest.raises(BudgetExhausted):
        oracle(third)
    assert oracle.trajectory == sorted(oracle.trajectory)


def test_budget_clamped(unimodal, caplog):
    with caplog.at_level(logging.WARNING, logger='robnas.algo.searchers'):
        oracle = Oracle(unimodal, Dataset.SYNTHETIC, 'clean', budget=SPACE_SIZE + 1)

    assert oracle.budget == SPACE_SIZE
    assert 'clamped' in caplog.text


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_budget_never_exceeded(unimodal, monkeypatch, algorithm):
    asked = set()
    lookup = unimodal.lookup

    def counting(genotype, dataset, metric):
        asked.add(genotype)
        return lookup(genotype, dataset, metric)

    monkeypatch.setattr(unimodal, 'lookup', counting)
    result = search(unimodal, config(algorithm), run=3)

    assert len(asked) == result.queries_used == 150
    assert len(result.trajectory) == 150
    assert result.trajectory == sorted(result.trajectory)
    assert result.best_value == result.trajectory[-1]


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_deterministic(rugged, algorithm):
    first = search(rugged, config(algorithm, seed=4), run=2)
    again = search(rugged, config(algorithm, seed=4), run=2)
    other = search(rugged, config(algorithm, seed=4), run=5)

    assert first == again
    assert first.trajectory != other.trajectory


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_full_budget_finds_planted(planted, algorithm):
    result = search(planted, config(algorithm, budget=SPACE_SIZE))

    assert result.best_genotype == planted_genotype(0)


@pytest.mark.parametrize('algorithm', list(Algorithm))
def test_full_budget_finds_rugged_optimum(rugged, algorithm):
    result = search(rugged, config(algorithm, budget=SPACE_SIZE))

    assert result.queries_used == SPACE_SIZE
    assert result.best_genotype == exhaustive_optimum(rugged, 'synthetic', 'clean')[0]


def test_evolution_spends_budget_when_stalled(rugged):
    result = search(rugged, config(Algorithm.REGULARIZED_EVOLUTION, budget=3000, stall_limit=5))

    assert result.queries_used == 3000
    for parent, child in result.lineage:
        assert child in neighbors(parent)


def test_random_search_single_query(rugged, monkeypatch):
    asked = []
    lookup = rugged.lookup

    def counting(genotype, dataset, metric):
        asked.append(genotype)
        return lookup(genotype, dataset, metric)

    monkeypatch.setattr(rugged, 'lookup', counting)
    result = search(rugged, config(Algorithm.RANDOM_SEARCH, budget=1))

    assert asked[0] == result.best_genotype
    assert result.queries_used == 1
    assert result.trajectory == [result.best_value]


def test_evolution_without_cycles(rugged, monkeypatch):
    asked = set()
    lookup = rugged.lookup

    def counting(genotype, dataset, metric):
        asked.add(genotype)
        return lookup(genotype, dataset, metric)

    monkeypatch.setattr(rugged, 'lookup', counting)
    result = search(rugged, config(Algorithm.REGULARIZED_EVOLUTION, budget=20, population_size=20))
    monkeypatch.undo()

    assert result.lineage == ()
    assert result.queries_used == len(asked) == 20
    assert result.best_genotype == min(asked, key=lambda g: (-rugged.lookup(g, 'synthetic', 'clean'), g))


def test_local_search_unimodal_climbs(unimodal):
    result = search(unimodal, config(Algorithm.LOCAL_SEARCH, budget=3000))

    assert len(result.local_optima) > 10
    assert set(result.local_optima) == {ALL_CONV}
    assert result.best_genotype == ALL_CONV


def test_local_search_optima(rugged):
    result = search(rugged, config(Algorithm.LOCAL_SEARCH, budget=1000))

    assert result.local_optima
    for optimum in result.local_optima:
        value = rugged.lookup(optimum, 'synthetic', 'clean')
        assert all(rugged.lookup(neighbor, 'synthetic', 'clean') <= value for neighbor in neighbors(optimum))


def test_evolution_lineage(unimodal):
    result = search(unimodal, config(Algorithm.REGULARIZED_EVOLUTION))

    assert result.lineage
    for parent, child in result.lineage:
        assert child in neighbors(parent)


def test_evolution_beats_random(unimodal):
    wins = 0
    for run in range(100):
        evolved = search(unimodal, config(Algorithm.REGULARIZED_EVOLUTION), run)
        drawn = search(unimodal, config(Algorithm.RANDOM_SEARCH), run)
        wins += evolved.best_value >= drawn.best_value

    assert wins >= 80


def test_run_many(rugged):
    cfg = config(Algorithm.RANDOM_SEARCH, budget=20, runs=4)
    report = run_many(rugged, cfg)

    assert report.algorithm == 'random_search'
    assert len(report.results) == 4
    assert report.means['clean'] == pytest.approx(sum(r.metrics['clean'] for r in report.results) / 4)
    assert report.means[ROBUST_MEAN] == pytest.approx(sum(r.metrics[ROBUST_MEAN] for r in report.results) / 4)

    parallel = run_many(rugged, cfg, jobs=2)
    assert [r.best_genotype for r in parallel.results] == [r.best_genotype for r in report.results]

    out = io.StringIO()
    RunReport.write_csv([report], out)
    header, row = out.getvalue().splitlines()
    assert header == 'algorithm,objective,clean,fgsm_3_255,pgd_3_255,fgsm_8_255,pgd_8_255,robust_mean'
    assert row.startswith('random_search,clean,')


def test_search_errors(unimodal):
    with pytest.raises(NotFoundError):
        search(unimodal, config(Algorithm.RANDOM_SEARCH, objective_metric='autoattack'))
    with pytest.raises(NotFoundError):
        search(unimodal, config(Algorithm.RANDOM_SEARCH, dataset='cifar10'))

    with pytest.raises(ValidationError):
        SearchConfig(budget=0)
    with pytest.raises(ValidationError):
        SearchConfig(algorithm='regularized_evolution', budget=10)
    with pytest.raises(ValueError):
        SearchConfig(algorithm='annealing')


def test_exhaustive_optimum(unimodal):
    genotype, metrics = exhaustive_optimum(unimodal, 'synthetic', 'clean')

    assert genotype == ALL_CONV
    assert metrics['clean'] == unimodal.lookup(ALL_CONV, 'synthetic', 'clean')
    assert exhaustive_optimum(unimodal, 'synthetic')[0] == ALL_CONV


def test_score_based_selection(unimodal):
    low, tied, other = Genotype.from_index(10), Genotype.from_index(3), Genotype.from_index(7)
    result = score_based_selection(unimodal, {low: 1.0, other: 2.0, tied: 2.0}, 'synthetic')

    assert result.best_genotype == min(tied, other)
    assert result.best_value == 2.0
    assert result.queries_used == 0
    assert result.metrics == unimodal.lookup_all(result.best_genotype, 'synthetic')

    with pytest.raises(ValidationError):
        score_based_selection(unimodal, {}, 'synthetic')
