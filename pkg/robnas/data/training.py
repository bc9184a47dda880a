"""
Training settings and records: :class:`TrainConfig`, labeled data and the outputs of the
trainers in :mod:`algo.objective <robnas.algo.objective>`.

.. autoclass:: TrainConfig
.. autoclass:: LabeledSample
.. autoclass:: LabeledSet
    :members:
.. autoclass:: Trajectory
    :members: to_csv
.. autoclass:: EpochRecord
.. autoclass:: History
    :members:
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Any, Iterator, List, Optional, TextIO

import numpy as np

from robnas.data.adversary import AdversaryConfig
from robnas.data.network import WeightSet
from robnas.errors import ValidationError


class TrainMode(str, enum.Enum):
    #: One fresh sample per step, plain SGD on the two-term loss
    ALGORITHM1_ONLINE = 'algorithm1_online'
    #: Mini-batch SGD with momentum, weight decay and a one-cycle step size
    MINIBATCH_RECIPE = 'minibatch_recipe'


@dataclass(frozen=True)
class TrainConfig:
    """
    Settings of both trainers. The recipe fields (``momentum`` and below) are only used in
    ``minibatch_recipe`` mode.

    .. autoattribute:: beta
    .. autoattribute:: gamma
    .. autoattribute:: iterations
    .. autoattribute:: adversary
    .. autoattribute:: mode
    .. autoattribute:: momentum
    .. autoattribute:: weight_decay
    .. autoattribute:: batch_size
    .. autoattribute:: epochs
    .. autoattribute:: base_lr
    .. autoattribute:: peak_lr
    .. autoattribute:: warmup_fraction
    .. autoattribute:: seed
    """

    #: Weight of the robust term: the loss is ``(1-β)·clean + β·robust``
    beta: float = 1.0
    #: Step size of online SGD
    gamma: float = 0.01
    #: Number of online steps ``N`` (and of samples consumed)
    iterations: int = 100
    #: Attack generating the robust term's inputs (``None``: no robust term)
    adversary: Optional[AdversaryConfig] = None
    mode: TrainMode = TrainMode.ALGORITHM1_ONLINE

    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 256
    epochs: int = 1
    #: Step size at the start of the one-cycle schedule
    base_lr: float = 0.05
    #: Maximum of the one-cycle schedule
    peak_lr: float = 0.1
    #: Share of steps spent rising from ``base_lr`` to ``peak_lr``
    warmup_fraction: float = 0.3

    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'mode', TrainMode(self.mode))
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must be in [0, 1], got {self.beta}")
        if self.gamma <= 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be positive, got {self.iterations}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError(f"Invalid batch_size/epochs: {self.batch_size}/{self.epochs}")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValidationError(f"warmup_fraction must be in [0, 1], got {self.warmup_fraction}")


@dataclass
class LabeledSample:
    """Input ``x`` (vector, matrix or image) with label ``y`` (``±1``, or class index)."""

    x: np.ndarray
    y: Any

    def __iter__(self):
        return iter((self.x, self.y))


@dataclass
class LabeledSet:
    """
    A dataset as two aligned arrays: ``inputs`` of shape ``(N, *input_shape)`` and ``labels``
    of shape ``(N,)``.
    """

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if len(self.inputs) != len(self.labels):
            raise ValidationError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def __iter__(self) -> Iterator[LabeledSample]:
        for x, y in zip(self.inputs, self.labels):
            yield LabeledSample(x, y.item())

    def subset(self, indices) -> LabeledSet:
        return LabeledSet(self.inputs[indices], self.labels[indices])


@dataclass
class Trajectory:
    """
    Summary of an online run.

    .. autoattribute:: clean_losses
    .. autoattribute:: robust_losses
    .. autoattribute:: chosen
    .. autoattribute:: final
    """

    #: Clean loss of each step's sample before the update
    clean_losses: np.ndarray
    #: Robust loss of each step's sample before the update (NaN without an adversary)
    robust_losses: np.ndarray
    #: 1-based index ``k`` of the returned iterate ``W⁽ᵏ⁾``
    chosen: int
    #: Weights after the last update
    final: WeightSet

    def to_csv(self, stream: TextIO):
        """Writes one row per step; robust losses of a run without an adversary are empty cells."""
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(('step', 'clean_loss', 'robust_loss'))
        for step, (clean, robust) in enumerate(zip(self.clean_losses, self.robust_losses), start=1):
            writer.writerow((step, float(clean), '' if np.isnan(robust) else float(robust)))


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    clean_acc: float
    robust_acc: Optional[float]
    clean_loss: float
    robust_loss: Optional[float]


@dataclass
class History:
    """Per-epoch metrics of recipe training."""

    records: List[EpochRecord] = field(default_factory=list)

    COLUMNS = ('epoch', 'lr', 'clean_acc', 'robust_acc', 'clean_loss', 'robust_loss')

    def __len__(self):
        return len(self.records)

    def to_csv(self, stream: TextIO):
        """Writes one row per epoch; missing robust values are empty cells."""
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(self.COLUMNS)
        for record in self.records:
            writer.writerow(['' if getattr(record, name) is None else getattr(record, name) for name in self.COLUMNS])
