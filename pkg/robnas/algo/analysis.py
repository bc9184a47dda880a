"""
Descriptive statistics of a benchmark store: how sparsity relates to accuracy, which operators
the best architectures prefer, and how consistently different metrics rank architectures.

.. autofunction:: best_by_zeroize_count
.. autofunction:: operator_frequency
.. autofunction:: metric_correlations
"""

from typing import Dict, List, Optional, Sequence, Tuple

from robnas.algo.cellspace import zeroize_count
from robnas.algo.ranking import CorrelationTable, spearman_matrix
from robnas.data.bench import METRICS, ROBUST_MEAN, BenchStore
from robnas.data.cell import EDGES, Genotype, Operator
from robnas.errors import ValidationError


def _ranked(store: BenchStore, dataset, metric: str) -> List[Tuple[float, Genotype]]:
    return sorted(((store.lookup(genotype, dataset, metric), genotype) for genotype in store.genotypes(dataset)),
                  key=lambda item: (-item[0], item[1]))


def best_by_zeroize_count(store: BenchStore, dataset, metric: str = ROBUST_MEAN) -> Dict[int, Tuple[Genotype, float]]:
    """
    For each number of ``zeroize`` edges present in the store, the best architecture with that
    many and its ``metric``.
    """
    best: Dict[int, Tuple[Genotype, float]] = {}
    for value, genotype in _ranked(store, dataset, metric):
        best.setdefault(zeroize_count(genotype), (genotype, value))
    return dict(sorted(best.items()))


def operator_frequency(store: BenchStore, dataset, metric: str = ROBUST_MEAN, k: int = 10) -> Dict[Tuple[int, int], Dict[str, int]]:
    """
    Per-edge operator counts among the ``k`` best architectures by ``metric``.

    Returns:
        ``{(source, target): {operator label: count}}``, with every operator present (possibly 0)
    """
    if k < 1:
        raise ValidationError(f"k must be positive, got {k}")
    top = [genotype for _, genotype in _ranked(store, dataset, metric)[:k]]
    return {
        edge: {op.label: sum(1 for genotype in top if genotype.edge_ops[index] == op) for op in Operator}
        for index, edge in enumerate(EDGES)
    }


def metric_correlations(store: BenchStore, dataset, metrics: Optional[Sequence[str]] = None) -> CorrelationTable:
    """
    Spearman coefficients between benchmark metrics over all stored architectures.
    """
    metrics = METRICS if metrics is None else metrics
    genotypes = store.genotypes(dataset)
    return spearman_matrix({metric: store.column(dataset, metric, genotypes) for metric in metrics})
