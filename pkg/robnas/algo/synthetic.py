"""
Synthetic stand-ins for the real benchmark and the real image data, so that searchers, the
correlation pipeline and the command line can be exercised without downloading anything.

A synthetic benchmark has one record per isomorphism class (stored under the class
representative), with values drawn from one of the :class:`Landscape` shapes. All robust metrics
are the clean accuracy scaled by a fixed factor, so every metric ranks architectures the same
way.

.. autoclass:: Landscape
.. autofunction:: synthesize_benchmark
.. autofunction:: functional_conv_count
.. autofunction:: planted_genotype
.. autofunction:: synthetic_samples
"""

from __future__ import annotations

import enum
import functools
from typing import Dict, Union

from robnas.algo.cellspace import canonical_classes, class_members
from robnas.data.bench import BenchRecord, BenchStore, Dataset
from robnas.data.cell import Genotype, Operator
from robnas.data.training import LabeledSet
from robnas.errors import ValidationError
from robnas.seeds import substream


class Landscape(str, enum.Enum):
    #: Accuracy grows with :func:`functional_conv_count`; the all-``conv3x3`` cell is the unique
    #: best
    UNIMODAL_CONV_COUNT = 'unimodal_conv_count'
    #: Independent uniform accuracy per class
    RUGGED_RANDOM = 'rugged_random'
    #: Accuracy decreases with the Hamming distance to :func:`planted_genotype`
    PLANTED_OPTIMUM = 'planted_optimum'


#: Ratio of each robust metric to clean accuracy
ROBUST_FACTORS = {'fgsm_3_255': 0.88, 'pgd_3_255': 0.87, 'fgsm_8_255': 0.68, 'pgd_8_255': 0.6}

PLANTED_PEAK = 0.9
PLANTED_STEP = 0.1
PLANTED_NOISE = 0.05


@functools.lru_cache(maxsize=None)
def functional_conv_count(genotype: Genotype) -> int:
    """
    Smallest number of ``conv3x3`` edges among the genotypes isomorphic to ``genotype``: the
    ``conv3x3`` edges that actually influence the output.
    """
    return min(member.edge_ops.count(Operator.CONV3X3) for member in class_members(genotype))


def planted_genotype(seed: int) -> Genotype:
    """
    Optimum of the ``planted_optimum`` landscape for ``seed``: a genotype chosen uniformly among
    those isomorphic to no other genotype, so the optimum is unique in the raw space too.
    """
    singletons = [cell.representative for cell in canonical_classes() if cell.class_size == 1]
    return singletons[int(substream(seed, 'synthetic/planted').integers(len(singletons)))]


def _hamming(a: Genotype, b: Genotype) -> int:
    return sum(x != y for x, y in zip(a.edge_ops, b.edge_ops))


def synthesize_benchmark(seed: int = 0, landscape: Union[str, Landscape] = Landscape.UNIMODAL_CONV_COUNT, *,
                         noise_scale: float = 1 / 24, seeds: int = 1,
                         dataset: Union[str, Dataset] = Dataset.SYNTHETIC) -> BenchStore:
    """
    Builds a synthetic benchmark. Same arguments always give an identical store.

    Args:
        seed: Seed of the noise (and of the planted optimum)
        landscape: Shape of the accuracy landscape
        noise_scale: Width of the uniform noise of ``unimodal_conv_count``; must stay below
            ``1/24`` for the all-``conv3x3`` cell to stay the unique best (``0`` gives metrics
            that are exact functions of the conv count)
        seeds: Training seeds per architecture, each with independent noise
        dataset: Dataset name of the records
    """

    landscape = Landscape(landscape)
    if not 0.0 <= noise_scale <= 1 / 24:
        raise ValidationError(f"noise_scale must be in [0, 1/24], got {noise_scale}")
    if seeds < 1:
        raise ValidationError(f"seeds must be positive, got {seeds}")
    rng = substream(seed, f'synthetic/{landscape.value}')
    planted = planted_genotype(seed) if landscape == Landscape.PLANTED_OPTIMUM else None

    records = []
    for cell in canonical_classes():
        genotype = cell.representative
        for run in range(seeds):
            if landscape == Landscape.UNIMODAL_CONV_COUNT:
                clean = functional_conv_count(genotype) / 6 * (23 / 24) + noise_scale * rng.random()
            elif landscape == Landscape.RUGGED_RANDOM:
                clean = rng.random()
            else:
                clean = PLANTED_PEAK - PLANTED_STEP * _hamming(genotype, planted) + PLANTED_NOISE * rng.random()
            records.append(BenchRecord(genotype, dataset, run, _metrics(clean)))

    return BenchStore(records)


def _metrics(clean: float) -> Dict[str, float]:
    return {'clean': clean, **{name: clean * factor for name, factor in ROBUST_FACTORS.items()}}


def synthetic_samples(seed: int, count: int = 50, image_size: int = 8, channels: int = 3,
                      num_classes: int = 10) -> LabeledSet:
    """
    Uniform random images in ``[0, 1]`` with uniform random labels: the sample batch for
    NTK-scores when no real data is supplied (scores need inputs, not meaningful labels).
    """
    rng = substream(seed, 'synthetic/samples')
    return LabeledSet(rng.uniform(0.0, 1.0, size=(count, channels, image_size, image_size)),
                      rng.integers(num_classes, size=count))
