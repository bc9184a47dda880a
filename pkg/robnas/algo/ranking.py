"""
Rank statistics used to compare train-free scores and benchmark metrics.

Spearman's coefficient is the Pearson correlation of the ranks, with tied values sharing their
average rank::

    >>> spearman([1, 2, 2, 4], [1, 3, 2, 4])
    0.9486832980505138

.. autofunction:: spearman
.. autofunction:: spearman_matrix
.. autoclass:: CorrelationTable
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy import stats

from robnas.errors import ValidationError


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Spearman rank correlation, in ``[-1, 1]``.

    Raises:
        ValidationError: on length mismatch, fewer than 2 values, non-finite values, or a
            constant list (the correlation is undefined)
    """

    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValidationError(f"Spearman needs two lists of equal length, got {xs.shape} and {ys.shape}")
    if len(xs) < 2:
        raise ValidationError(f"Spearman needs at least 2 values, got {len(xs)}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValidationError("Spearman input contains non-finite values")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise ValidationError("Spearman correlation is undefined for a constant list")

    rho, _ = stats.spearmanr(xs, ys)
    return float(np.clip(rho, -1.0, 1.0))


@dataclass
class CorrelationTable:
    """
    Spearman coefficients between named rows and columns, as exported by the command line.
    """

    rows: Tuple[str, ...]
    columns: Tuple[str, ...]
    #: ``len(rows) × len(columns)`` coefficients
    values: np.ndarray

    def get(self, row: str, column: str) -> float:
        return float(self.values[self.rows.index(row), self.columns.index(column)])

    def to_csv(self, stream: TextIO):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(('', *self.columns))
        for name, values in zip(self.rows, self.values):
            writer.writerow((name, *(f'{value:.4f}' for value in values)))

    def to_dict(self):
        return {'version': 1, 'rows': list(self.rows), 'columns': list(self.columns),
                'values': self.values.tolist()}


def spearman_matrix(rows: Mapping[str, Sequence[float]],
                    columns: Optional[Mapping[str, Sequence[float]]] = None) -> CorrelationTable:
    """
    Pairwise :func:`spearman` between each of ``rows`` and each of ``columns``; without
    ``columns``, the square matrix of ``rows`` against themselves (with an exact unit
    diagonal).
    """

    square = columns is None
    if square:
        columns = rows
    values = np.empty((len(rows), len(columns)))
    for i, xs in enumerate(rows.values()):
        for j, ys in enumerate(columns.values()):
            values[i, j] = 1.0 if square and i == j else spearman(xs, ys)
    return CorrelationTable(tuple(rows), tuple(columns), values)
