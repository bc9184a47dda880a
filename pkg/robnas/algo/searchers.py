"""
Query-budgeted architecture search over a :class:`BenchStore <robnas.data.bench.BenchStore>`.

Every algorithm talks to the store through an :class:`Oracle`, which memoizes results and
counts distinct look-ups: looking up an already seen genotype again is free, and the run ends
as soon as a new look-up would exceed :attr:`SearchConfig.budget
<robnas.data.search.SearchConfig.budget>`. Searchers work on raw genotypes; the store routes
each to the stored member of its isomorphism class.

Among equally good architectures, the lexicographically smallest genotype wins, everywhere.

Randomness of run ``k`` comes from the named substream ``search/k`` of the config's seed, so
different algorithms with the same seed and run number see the same initial draws, and a
given ``(store, config, run)`` always gives the same result.

.. autoclass:: Oracle
    :members:

.. autofunction:: random_search
.. autofunction:: regularized_evolution
.. autofunction:: local_search
.. autofunction:: search
.. autofunction:: run_many
.. autofunction:: exhaustive_optimum
.. autofunction:: score_based_selection
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from robnas.algo.cellspace import SPACE_SIZE, mutate, neighbors
from robnas.data.bench import ROBUST_MEAN, BenchStore, Dataset
from robnas.data.cell import Genotype
from robnas.data.search import Algorithm, RunReport, SearchConfig, SearchResult
from robnas.errors import NotFoundError, ValidationError
from robnas.seeds import substream

log = logging.getLogger(__name__)


class BudgetExhausted(Exception):
    """Raised by :class:`Oracle` when a new look-up would exceed the budget."""


def _better(value: float, genotype: Genotype, than_value: float, than_genotype: Genotype) -> bool:
    return value > than_value or (value == than_value and genotype < than_genotype)


class Oracle:
    """
    Memoized, budget-counting view of one dataset and metric of a store, for one search run.

    .. autoattribute:: queries
    .. autoattribute:: trajectory
    """

    def __init__(self, store: BenchStore, dataset: Dataset, metric: str, budget: int):
        self.store = store
        self.dataset = dataset
        self.metric = metric
        if budget > SPACE_SIZE:
            log.warning("Budget %d exceeds search space size %d, clamped", budget, SPACE_SIZE)
            budget = SPACE_SIZE
        self.budget = budget

        self.memo: Dict[Genotype, float] = {}
        #: Distinct store look-ups made so far
        self.queries = 0
        #: Best-so-far value after each look-up
        self.trajectory: List[float] = []
        self.best: Optional[Tuple[float, Genotype]] = None

    @property
    def exhausted(self) -> bool:
        return self.queries >= self.budget

    def __call__(self, genotype: Genotype) -> float:
        """
        Objective value of the genotype.

        Raises:
            BudgetExhausted: when the genotype wasn't seen and the budget is used up
        """
        if genotype in self.memo:
            return self.memo[genotype]
        if self.exhausted:
            raise BudgetExhausted

        value = self.store.lookup(genotype, self.dataset, self.metric)
        self.queries += 1
        self.memo[genotype] = value
        if self.best is None or _better(value, genotype, *self.best):
            self.best = (value, genotype)
        self.trajectory.append(self.best[0])
        return value

    def seen(self, genotype: Genotype) -> bool:
        return genotype in self.memo

    def result(self, **extra) -> SearchResult:
        value, genotype = self.best
        return SearchResult(
            best_genotype=genotype,
            best_value=value,
            queries_used=self.queries,
            metrics=self.store.lookup_all(genotype, self.dataset),
            trajectory=list(self.trajectory),
            **extra
        )


def _oracle(store: BenchStore, cfg: SearchConfig) -> Oracle:
    if cfg.dataset is None:
        if not store.datasets:
            raise NotFoundError("Benchmark store is empty")
        dataset = store.datasets[0]
    else:
        dataset = store.dataset(cfg.dataset)
    if cfg.objective_metric not in store.metric_names:
        raise NotFoundError(f"Metric {cfg.objective_metric!r} not in benchmark")
    return Oracle(store, dataset, cfg.objective_metric, cfg.budget)


def _uniform_order(rng: np.random.Generator) -> Iterator[Genotype]:
    for index in rng.permutation(SPACE_SIZE):
        yield Genotype.from_index(int(index))


# Algorithms
# ----------

def random_search(store: BenchStore, cfg: SearchConfig, run: int = 0) -> SearchResult:
    """
    Looks up uniformly drawn genotypes without replacement until the budget is spent, and
    returns the best.
    """

    oracle = _oracle(store, cfg)
    order = _uniform_order(substream(cfg.seed, f'search/{run}'))
    for _ in range(oracle.budget):
        oracle(next(order))
    return oracle.result()


@dataclass
class _Member:
    genotype: Genotype
    value: float


def regularized_evolution(store: BenchStore, cfg: SearchConfig, run: int = 0) -> SearchResult:
    """
    Age-regularized evolution: starts with :attr:`population_size
    <robnas.data.search.SearchConfig.population_size>` distinct uniform genotypes; in each cycle
    the fittest of :attr:`sample_size <robnas.data.search.SearchConfig.sample_size>` uniformly
    sampled members is mutated (:func:`mutate <robnas.algo.cellspace.mutate>`), the child joins
    the population and the oldest member leaves.

    Stops when the budget is spent. Children seen before cost nothing, so after :attr:`stall_limit
    <robnas.data.search.SearchConfig.stall_limit>` cycles in a row of only such children, a
    uniform genotype not looked up yet joins the population in place of the oldest member.
    """

    oracle = _oracle(store, cfg)
    rng = substream(cfg.seed, f'search/{run}')
    order = _uniform_order(rng)
    population: deque = deque()
    lineage = []

    for _ in range(cfg.population_size):
        genotype = next(order)
        population.append(_Member(genotype, oracle(genotype)))

    stalled = 0
    while not oracle.exhausted:
        if stalled >= cfg.stall_limit:
            immigrant = next(genotype for genotype in order if not oracle.seen(genotype))
            log.debug("Evolution stalled for %d cycles, adding %s after %d queries",
                      stalled, immigrant, oracle.queries)
            population.append(_Member(immigrant, oracle(immigrant)))
            population.popleft()
            stalled = 0
            continue

        sample = [population[int(i)] for i in rng.choice(len(population), size=cfg.sample_size, replace=False)]
        parent = sample[0]
        for member in sample[1:]:
            if _better(member.value, member.genotype, parent.value, parent.genotype):
                parent = member

        child = mutate(parent.genotype, rng)
        stalled = stalled + 1 if oracle.seen(child) else 0
        population.append(_Member(child, oracle(child)))
        population.popleft()
        lineage.append((parent.genotype, child))

    return oracle.result(lineage=tuple(lineage))


def local_search(store: BenchStore, cfg: SearchConfig, run: int = 0) -> SearchResult:
    """
    Steepest-ascent hill climbing: from a uniform genotype, looks up all 24 neighbors and moves
    to the best one if it is strictly better. At a local optimum, restarts from a uniform
    genotype not looked up yet. Ends when the budget is spent or every genotype was seen.

    End points of completed climbs are reported as :attr:`local_optima
    <robnas.data.search.SearchResult.local_optima>`.
    """

    oracle = _oracle(store, cfg)
    order = _uniform_order(substream(cfg.seed, f'search/{run}'))
    optima = []

    def fresh() -> Optional[Genotype]:
        return next((genotype for genotype in order if not oracle.seen(genotype)), None)

    try:
        current = fresh()
        value = oracle(current)
        while True:
            best, best_value = current, value
            for neighbor in neighbors(current):
                neighbor_value = oracle(neighbor)
                if _better(neighbor_value, neighbor, best_value, best) and neighbor_value > value:
                    best, best_value = neighbor, neighbor_value

            if best != current:
                current, value = best, best_value
                continue

            optima.append(current)
            current = fresh()
            if current is None:
                break
            value = oracle(current)
    except BudgetExhausted:
        pass

    return oracle.result(local_optima=tuple(optima))


SEARCHERS = {
    Algorithm.RANDOM_SEARCH: random_search,
    Algorithm.REGULARIZED_EVOLUTION: regularized_evolution,
    Algorithm.LOCAL_SEARCH: local_search,
}


def search(store: BenchStore, cfg: SearchConfig, run: int = 0) -> SearchResult:
    """Run number ``run`` of the configured algorithm."""
    return SEARCHERS[cfg.algorithm](store, cfg, run)


def _search_run(args) -> SearchResult:
    return search(*args)


def run_many(store: BenchStore, cfg: SearchConfig, jobs: int = 1) -> RunReport:
    """
    :attr:`runs <robnas.data.search.SearchConfig.runs>` independent runs, aggregated into
    per-metric means of each run's best architecture. With ``jobs > 1`` runs are spread over
    processes; results are in run order either way.
    """

    tasks = [(store, cfg, run) for run in range(cfg.runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(_search_run, tasks, chunksize=max(1, len(tasks) // jobs)))
    else:
        results = [_search_run(task) for task in tasks]

    report = RunReport.from_results(cfg.algorithm.value, cfg.objective_metric, results)
    log.info("%s on %s, %d runs: %s", cfg.algorithm.value, cfg.objective_metric, cfg.runs,
             ' '.join(f'{name}={value:.4f}' for name, value in report.means.items()))
    return report


# Reference points
# ----------------

def exhaustive_optimum(store: BenchStore, dataset, metric: str = ROBUST_MEAN) -> Tuple[Genotype, Dict[str, float]]:
    """
    Stored architecture with the highest ``metric``, found by scanning everything, with all its
    metrics. With the default metric it is the benchmark's "optimal" architecture.
    """

    best: Optional[Tuple[float, Genotype]] = None
    for genotype in store.genotypes(dataset):
        value = store.lookup(genotype, dataset, metric)
        if best is None or _better(value, genotype, *best):
            best = (value, genotype)
    return best[1], store.lookup_all(best[1], dataset)


def score_based_selection(store: BenchStore, scores: Mapping[Genotype, float], dataset) -> SearchResult:
    """
    Train-free selection: the architecture with the highest score (an NTK-score, say), with its
    benchmark metrics. No search queries are spent.
    """

    if not scores:
        raise ValidationError("No scores to select from")
    genotype = min(scores, key=lambda g: (-scores[g], g))
    return SearchResult(best_genotype=genotype, best_value=float(scores[genotype]), queries_used=0,
                        metrics=store.lookup_all(genotype, dataset))
