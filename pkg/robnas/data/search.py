"""
Settings and results of architecture search over a benchmark store. The algorithms themselves
are in :mod:`algo.searchers <robnas.algo.searchers>`.

.. autoclass:: Algorithm
.. autoclass:: SearchConfig
.. autoclass:: SearchResult
.. autoclass:: RunReport
    :members:
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

from robnas.data.bench import METRICS, ROBUST_MEAN
from robnas.data.cell import Genotype
from robnas.errors import ValidationError


class Algorithm(str, enum.Enum):
    RANDOM_SEARCH = 'random_search'
    REGULARIZED_EVOLUTION = 'regularized_evolution'
    LOCAL_SEARCH = 'local_search'


@dataclass(frozen=True)
class SearchConfig:
    """
    .. autoattribute:: algorithm
    .. autoattribute:: budget
    .. autoattribute:: runs
    .. autoattribute:: objective_metric
    .. autoattribute:: dataset
    .. autoattribute:: seed
    .. autoattribute:: population_size
    .. autoattribute:: sample_size
    .. autoattribute:: stall_limit
    """

    algorithm: Algorithm = Algorithm.RANDOM_SEARCH
    #: Number of distinct architectures a run may look up; repeated look-ups are free
    budget: int = 150
    #: Independent runs of :func:`run_many <robnas.algo.searchers.run_many>`
    runs: int = 100
    #: Metric being maximized (the "attack scheme" the search optimizes for)
    objective_metric: str = 'clean'
    #: Dataset of the store to search; the store's first dataset when not set
    dataset: Optional[str] = None
    seed: int = 0

    #: Regularized evolution: size of the (age-ordered) population
    population_size: int = 20
    #: Regularized evolution: tournament size
    sample_size: int = 10
    #: Regularized evolution: after this many cycles in a row produced only repeated children,
    #: a genotype not looked up yet replaces the oldest member
    stall_limit: int = 20

    def __post_init__(self):
        object.__setattr__(self, 'algorithm', Algorithm(self.algorithm))
        if self.budget < 1:
            raise ValidationError(f"budget must be positive, got {self.budget}")
        if self.runs < 1:
            raise ValidationError(f"runs must be positive, got {self.runs}")
        if not 1 <= self.sample_size <= self.population_size:
            raise ValidationError(
                f"Need 1 <= sample_size <= population_size, got {self.sample_size}/{self.population_size}"
            )
        if self.algorithm == Algorithm.REGULARIZED_EVOLUTION and self.population_size > self.budget:
            raise ValidationError(f"population_size {self.population_size} exceeds budget {self.budget}")
        if self.stall_limit < 1:
            raise ValidationError(f"stall_limit must be positive, got {self.stall_limit}")


@dataclass
class SearchResult:
    """
    Outcome of one search run.

    .. autoattribute:: best_genotype
    .. autoattribute:: best_value
    .. autoattribute:: queries_used
    .. autoattribute:: metrics
    .. autoattribute:: trajectory
    .. autoattribute:: local_optima
    .. autoattribute:: lineage
    """

    #: Best architecture seen (lexicographically smallest among equally good ones)
    best_genotype: Genotype
    #: Its objective value
    best_value: float
    #: Distinct store look-ups made
    queries_used: int
    #: All benchmark metrics of :attr:`best_genotype`, averaged over seeds
    metrics: Dict[str, float]
    #: Best-so-far objective after each query
    trajectory: List[float] = field(default_factory=list)
    #: Local search: end points of completed climbs
    local_optima: Tuple[Genotype, ...] = ()
    #: Regularized evolution: ``(parent, child)`` of every mutation
    lineage: Tuple[Tuple[Genotype, Genotype], ...] = ()

    def to_dict(self):
        return {
            'version': 1,
            'best_genotype': str(self.best_genotype),
            'best_value': self.best_value,
            'queries_used': self.queries_used,
            'metrics': self.metrics,
            'trajectory': self.trajectory,
        }


@dataclass
class RunReport:
    """
    Many runs of one algorithm: the mean over runs of every metric of each run's best
    architecture.
    """

    algorithm: str
    objective_metric: str
    means: Dict[str, float]
    results: List[SearchResult] = field(default_factory=list)

    COLUMNS = (*METRICS, ROBUST_MEAN)

    @classmethod
    def from_results(cls, algorithm: str, objective_metric: str, results: Sequence[SearchResult]) -> RunReport:
        means = {name: sum(r.metrics[name] for r in results) / len(results) for name in cls.COLUMNS}
        return cls(algorithm, objective_metric, means, list(results))

    @classmethod
    def write_csv(cls, reports: Sequence[RunReport], stream: TextIO):
        """One row per report: algorithm, searched metric, then the metric means."""
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(('algorithm', 'objective', *cls.COLUMNS))
        for report in reports:
            writer.writerow((report.algorithm, report.objective_metric,
                             *(f'{report.means[name]:.4f}' for name in cls.COLUMNS)))

    def to_dict(self):
        return {
            'version': 1,
            'algorithm': self.algorithm,
            'objective_metric': self.objective_metric,
            'runs': len(self.results),
            'means': self.means,
            'best_genotypes': [str(r.best_genotype) for r in self.results],
        }
