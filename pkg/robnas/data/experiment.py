"""
Declarative experiment settings, read by :mod:`readers.config <robnas.readers.config>` from a
TOML (or JSON) file:

.. code-block:: toml

    seed = 7
    dataset = "cifar10"
    bench_path = "data/robbench201.jsonl.gz"
    output_dir = "runs/correlate"

    [network]
    stem_channels = 8
    image_size = 8

    [correlate]
    subset_size = 500
    radii = [0.011764705882352941, 0.03137254901960784]

    [search]
    algorithm = "local_search"
    objective_metric = "pgd_8_255"

Every section is optional; every key not listed below is an error. The same seed always gives
the same results: each stage draws from its own :func:`substream <robnas.seeds.substream>` of
:attr:`ExperimentConfig.seed`. The experiment seed also replaces the ``seed`` of the
``search`` and ``training`` sections.

.. autoclass:: ExperimentConfig
.. autoclass:: KernelOptions
.. autoclass:: CorrelateOptions
.. autoclass:: BoundOptions
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

from robnas.algo.kernels import AGGREGATIONS, SCORE_SAMPLES
from robnas.data.adversary import EVALUATION_RADII, AdversaryConfig, AttackKind
from robnas.data.network import NetworkSpec
from robnas.data.search import SearchConfig
from robnas.data.training import TrainConfig
from robnas.errors import ValidationError

#: Prefix of :attr:`ExperimentConfig.bench_path` values that generate a synthetic benchmark
#: instead of reading one, e.g. ``synthetic:planted_optimum``
SYNTHETIC_PREFIX = 'synthetic:'


@dataclass(frozen=True)
class KernelOptions:
    #: Trade-off ``β`` the joint kernels are assembled with
    beta: float = 0.5
    #: How a Gram matrix becomes an NTK-score
    aggregation: str = 'frobenius'
    #: Number of sample inputs the kernels are computed on
    samples: int = SCORE_SAMPLES

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValidationError(f"beta must be in [0, 1], got {self.beta}")
        if self.aggregation not in AGGREGATIONS:
            raise ValidationError(f"Unknown aggregation {self.aggregation!r}, expected one of {', '.join(AGGREGATIONS)}")
        if self.samples < 2:
            raise ValidationError(f"Need at least 2 samples, got {self.samples}")


@dataclass(frozen=True)
class CorrelateOptions:
    #: Number of architectures scored (drawn from the benchmark with the experiment seed)
    subset_size: int = 500
    #: Attack radii of the robust score variants
    radii: Tuple[float, ...] = EVALUATION_RADII
    #: Attack building the robust variants (evaluation preset of that kind at each radius)
    attack: AttackKind = AttackKind.PGD
    #: Also score twice-attacked inputs
    twice: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'attack', AttackKind(self.attack))
        object.__setattr__(self, 'radii', tuple(float(r) for r in self.radii))
        if self.subset_size < 2:
            raise ValidationError(f"subset_size must be at least 2, got {self.subset_size}")
        if any(r <= 0 for r in self.radii):
            raise ValidationError(f"Radii must be positive, got {self.radii}")


@dataclass(frozen=True)
class BoundOptions:
    #: Dimension of the synthetic unit-sphere inputs
    input_dim: int = 16
    #: Radius of the spherical attack
    radius: float = 0.1
    #: Lipschitz constant ``L`` of the loss
    lipschitz: float = 1.0
    #: Confidence ``δ``
    delta: float = 0.05
    #: Read kernels (and labels) from this container instead of computing them
    kernels_path: Optional[str] = None

    def __post_init__(self):
        if self.input_dim < 1 or self.radius < 0 or self.lipschitz <= 0 or not 0 < self.delta < 1:
            raise ValidationError(f"Invalid bound settings: {self}")


@dataclass(frozen=True)
class ExperimentConfig:
    """
    .. autoattribute:: seed
    .. autoattribute:: dataset
    .. autoattribute:: bench_path
    .. autoattribute:: samples_path
    .. autoattribute:: output_dir
    .. autoattribute:: network
    .. autoattribute:: adversary
    .. autoattribute:: training
    .. autoattribute:: search
    .. autoattribute:: kernels
    .. autoattribute:: correlate
    .. autoattribute:: bound
    """

    #: Global seed, split into per-stage substreams
    seed: int = 0
    #: Benchmark dataset to query
    dataset: str = 'cifar10'
    #: Benchmark file (``ROBNAS_DATA`` environment variable by default), or
    #: ``synthetic:<landscape>``
    bench_path: Optional[str] = None
    #: Sample inputs container; synthetic images by default
    samples_path: Optional[str] = None
    #: Where artifacts are written
    output_dir: str = 'output'

    #: Network of the demos and bounds; for NTK-scores, the template every cell network is built on
    network: NetworkSpec = field(default_factory=NetworkSpec)
    #: Attack of the demos
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig.training_preset)
    training: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    kernels: KernelOptions = field(default_factory=KernelOptions)
    correlate: CorrelateOptions = field(default_factory=CorrelateOptions)
    bound: BoundOptions = field(default_factory=BoundOptions)


#: Types of the nested sections, for config reading
SECTIONS = {
    ExperimentConfig: {
        'network': NetworkSpec,
        'adversary': AdversaryConfig,
        'training': TrainConfig,
        'search': SearchConfig,
        'kernels': KernelOptions,
        'correlate': CorrelateOptions,
        'bound': BoundOptions,
    },
    TrainConfig: {
        'adversary': AdversaryConfig,
    },
}
