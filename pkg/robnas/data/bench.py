"""
The module represents a look-up table benchmark: for every architecture of the cell space (and
every dataset and training seed), accuracies of the trained network under clean and attacked
evaluation.

The benchmark is stored as JSON Lines, one :class:`BenchRecord` per line:

.. code-block:: text

    {"genotype": "|nor_conv_3x3~0|+|...|", "dataset": "cifar10", "seed": 0, "metrics": {"clean": 0.79, "fgsm_3_255": 0.69, ...}}

See :mod:`readers.bench <robnas.readers.bench>` for reading and writing.

Once built, :class:`BenchStore` is never changed, and all its look-ups are pure: searchers from
:mod:`algo.searchers <robnas.algo.searchers>` treat it as an oracle of "what accuracy would
training this architecture give".

.. autodata:: METRICS
.. autodata:: ROBUST_MEAN

``Dataset``
-----------

.. autoclass:: Dataset

``BenchRecord``
---------------

.. autoclass:: BenchRecord

``BenchStore``
--------------

.. autoclass:: BenchStore
"""

from __future__ import annotations

import enum
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from robnas.algo.cellspace import canonical_form
from robnas.data.cell import Genotype
from robnas.errors import NotFoundError, ValidationError

#: Metrics every record has: clean accuracy and accuracy under FGSM/PGD at ρ = 3/255 and 8/255
METRICS = ('clean', 'fgsm_3_255', 'pgd_3_255', 'fgsm_8_255', 'pgd_8_255')

ROBUST_METRICS = METRICS[1:]

#: Derived metric: average of the four robust metrics. The benchmark's "optimal" architecture
#: is the one maximizing it.
ROBUST_MEAN = 'robust_mean'


class Dataset(str, enum.Enum):
    CIFAR10 = 'cifar10'
    CIFAR100 = 'cifar100'
    IMAGENET16_120 = 'imagenet16_120'
    #: Generated by :func:`synthesize_benchmark <robnas.algo.synthetic.synthesize_benchmark>`
    SYNTHETIC = 'synthetic'


Key = Tuple[Genotype, Dataset, int]


@dataclass(frozen=True)
class BenchRecord:
    """
    Results of training one architecture on one dataset with one seed.

    Metrics besides :data:`METRICS` (AutoAttack, corruption accuracies, ...) are kept as is.

    Raises:
        ValidationError: on a missing required metric, or an accuracy outside ``[0, 1]``
    """

    genotype: Genotype
    dataset: Dataset
    seed: int
    #: Metric name → accuracy in ``[0, 1]``
    metrics: Mapping[str, float]

    def __post_init__(self):
        try:
            object.__setattr__(self, 'dataset', Dataset(self.dataset))
        except ValueError:
            raise ValidationError(
                f"Unknown dataset {self.dataset!r}, expected one of {', '.join(d.value for d in Dataset)}"
            ) from None
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"Seed should be an integer, got {self.seed!r}")
        object.__setattr__(self, 'seed', int(self.seed))

        metrics = {}
        for name, value in self.metrics.items():
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ValidationError(f"Accuracy {name} should be a number, got {value!r}")
            value = float(value)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValidationError(f"Accuracy {name}={value} out of [0, 1]")
            metrics[name] = value
        missing = [name for name in METRICS if name not in metrics]
        if missing:
            raise ValidationError(f"Record {self.genotype} misses metrics: {', '.join(missing)}")
        object.__setattr__(self, 'metrics', MappingProxyType(metrics))

    def __reduce__(self):
        return (BenchRecord, (self.genotype, self.dataset, self.seed, dict(self.metrics)))

    @property
    def key(self) -> Key:
        return (self.genotype, self.dataset, self.seed)

    def value(self, metric: str) -> float:
        """
        Single metric, including the derived :data:`ROBUST_MEAN`.

        Raises:
            NotFoundError: for a metric the record doesn't have
        """
        if metric == ROBUST_MEAN:
            return sum(self.metrics[name] for name in ROBUST_METRICS) / len(ROBUST_METRICS)
        try:
            return self.metrics[metric]
        except KeyError:
            raise NotFoundError(f"Metric {metric!r} not in benchmark") from None


class BenchStore:
    """
    Immutable indexed collection of :class:`BenchRecord`, queried by ``(genotype, dataset)`` with
    results averaged over seeds::

        >>> store = ingest('robbench201.jsonl')
        >>> store.lookup(parse_genotype('|nor_conv_3x3~0|+|...|'), 'cifar10', 'pgd_8_255')
        0.4817
        >>> store.seed_count(genotype, 'cifar10')
        3

    Genotypes not present in the store as-is are routed to the stored member of their
    isomorphism class (the benchmark keeps one entry per class), so searchers may work with
    any raw genotype.

    **Look-ups**

    .. automethod:: lookup
    .. automethod:: lookup_all
    .. automethod:: seed_count
    .. automethod:: resolve
    .. automethod:: column

    **Contents**

    .. automethod:: genotypes
    .. autoattribute:: datasets
    .. autoattribute:: metric_names
    .. automethod:: report
    .. automethod:: dataset

    Raises:
        ValidationError: when two records share ``(genotype, dataset, seed)``
    """

    def __init__(self, records: Iterable[BenchRecord]):
        self._records: Dict[Key, BenchRecord] = {}
        self._by_genotype: Dict[Tuple[Genotype, Dataset], List[BenchRecord]] = defaultdict(list)
        self._by_form: Dict[Tuple[bytes, Dataset], Genotype] = {}

        for record in records:
            if record.key in self._records:
                genotype, dataset, seed = record.key
                raise ValidationError(f"Duplicate record: {genotype} / {dataset.value} / seed {seed}")
            self._records[record.key] = record
            self._by_genotype[(record.genotype, record.dataset)].append(record)
            self._by_form.setdefault((canonical_form(record.genotype), record.dataset), record.genotype)

        metric_names = dict.fromkeys(name for record in self._records.values() for name in record.metrics)
        #: All metric names present, plus :data:`ROBUST_MEAN`
        self.metric_names: Tuple[str, ...] = (*metric_names, ROBUST_MEAN)
        #: Datasets present, in order of first appearance
        self.datasets: Tuple[Dataset, ...] = tuple(dict.fromkeys(dataset for _, dataset in self._by_genotype))

    def __len__(self):
        return len(self._records)

    def __iter__(self) -> Iterator[BenchRecord]:
        return iter(self._records.values())

    def __repr__(self):
        return f"BenchStore({len(self)} records, {', '.join(d.value for d in self.datasets)})"

    def genotypes(self, dataset: Union[str, Dataset]) -> Tuple[Genotype, ...]:
        """Genotypes stored for the dataset, in order of first appearance."""
        dataset = self.dataset(dataset)
        return tuple(genotype for genotype, d in self._by_genotype if d == dataset)

    def resolve(self, genotype: Genotype, dataset: Union[str, Dataset]) -> Genotype:
        """
        Stored genotype answering for ``genotype``: itself, or the stored member of its
        isomorphism class.

        Raises:
            NotFoundError: if neither is present
        """
        dataset = self.dataset(dataset)
        if (genotype, dataset) in self._by_genotype:
            return genotype
        stored = self._by_form.get((canonical_form(genotype), dataset))
        if stored is None:
            raise NotFoundError(f"Genotype {genotype} not in benchmark for {dataset.value}")
        return stored

    def records(self, genotype: Genotype, dataset: Union[str, Dataset]) -> Sequence[BenchRecord]:
        dataset = self.dataset(dataset)
        return self._by_genotype[(self.resolve(genotype, dataset), dataset)]

    def lookup(self, genotype: Genotype, dataset: Union[str, Dataset], metric: str) -> float:
        """
        Mean of ``metric`` over the seeds the architecture was trained with.

        Raises:
            NotFoundError: for unknown genotype, dataset or metric
        """
        values = [record.value(metric) for record in self.records(genotype, dataset)]
        return float(np.mean(values))

    def lookup_all(self, genotype: Genotype, dataset: Union[str, Dataset]) -> Dict[str, float]:
        """All of :data:`METRICS` and :data:`ROBUST_MEAN`, averaged over seeds."""
        return {metric: self.lookup(genotype, dataset, metric) for metric in (*METRICS, ROBUST_MEAN)}

    def seed_count(self, genotype: Genotype, dataset: Union[str, Dataset]) -> int:
        return len(self.records(genotype, dataset))

    def column(self, dataset: Union[str, Dataset], metric: str,
               genotypes: Optional[Sequence[Genotype]] = None) -> np.ndarray:
        """
        Seed-averaged ``metric`` for each of ``genotypes`` (all stored ones by default).
        """
        if genotypes is None:
            genotypes = self.genotypes(dataset)
        return np.array([self.lookup(genotype, dataset, metric) for genotype in genotypes])

    def report(self) -> Dict:
        """
        Counts for a quick sanity check of ingested data::

            {'records': 58197, 'datasets': {'cifar10': {'genotypes': 6466, 'seeds': {'0': 6466, ...}}, ...}}
        """
        datasets = {}
        for dataset in self.datasets:
            seeds = Counter(seed for _, d, seed in self._records if d == dataset)
            datasets[dataset.value] = {
                'genotypes': len(self.genotypes(dataset)),
                'seeds': {str(seed): count for seed, count in sorted(seeds.items())},
            }
        return {'records': len(self), 'metrics': list(self.metric_names), 'datasets': datasets}

    def dataset(self, dataset: Union[str, Dataset]) -> Dataset:
        """
        Dataset by name.

        Raises:
            NotFoundError: if the store has no records for it
        """
        try:
            dataset = Dataset(dataset)
        except ValueError:
            raise NotFoundError(f"Unknown dataset {dataset!r}") from None
        if dataset not in self.datasets:
            raise NotFoundError(f"Dataset {dataset.value} not in benchmark")
        return dataset
