"""
:class:`Experiment` ties the configuration, the benchmark and the algorithms together: one method
per command of the :mod:`command line <robnas.cli>`, each returning plain data the command prints.

Unless ``bench_path`` is configured, the benchmark file is taken from the ``ROBNAS_DATA``
environment variable (:data:`DATA_ENV`); ``synthetic:<landscape>`` in its place makes a
:func:`synthetic benchmark <robnas.algo.synthetic.synthesize_benchmark>` instead.

.. autoclass:: Experiment
.. autodata:: DATA_ENV
"""

from __future__ import annotations

import functools
import json
import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from robnas.algo import analysis, cellspace, kernels, netcore, objective, searchers
from robnas.algo.ranking import CorrelationTable, spearman_matrix
from robnas.algo.synthetic import synthesize_benchmark, synthetic_samples
from robnas.data.adversary import AdversaryConfig, Norm, evaluation_presets
from robnas.data.bench import ROBUST_MEAN, BenchStore, Dataset
from robnas.data.cell import Genotype, Operator
from robnas.data.experiment import SYNTHETIC_PREFIX, ExperimentConfig
from robnas.data.network import Family, NetworkSpec, WeightSet
from robnas.data.search import Algorithm, RunReport, SearchResult
from robnas.data.training import LabeledSet, TrainMode
from robnas.errors import AssumptionViolated, NotFoundError, ValidationError
from robnas.readers import bench, config as config_reader, container
from robnas.seeds import stage_seed, substream

log = logging.getLogger(__name__)

#: Environment variable with the default benchmark path
DATA_ENV = 'ROBNAS_DATA'


class Experiment:
    """
    The main interface to ``robnas`` as a library: one object per experiment config, one
    method per command line subcommand.

    Usage::

        from robnas import Experiment

        experiment = Experiment.from_file('correlate.toml', seed=3)
        # or, with everything default and a generated benchmark
        experiment = Experiment.from_dict({'bench_path': 'synthetic:planted_optimum'})

        print(experiment.space_report())
        # {'version': 1, 'total': 15625, 'classes': 6466, 'class_sizes': {...}}

        for report in experiment.search([Algorithm.RANDOM_SEARCH, Algorithm.LOCAL_SEARCH]):
            print(report.algorithm, report.means['pgd_8_255'])

    Every method is deterministic given the config: randomness comes from named substreams of
    :attr:`ExperimentConfig.seed <robnas.data.experiment.ExperimentConfig.seed>`.

    **Creation**

    .. automethod:: from_file
    .. automethod:: from_dict

    **Data**

    .. autoattribute:: store
    .. autoattribute:: dataset
    .. automethod:: samples

    **Experiments**

    .. automethod:: space_report
    .. automethod:: correlation_subset
    .. automethod:: ntk_scores
    .. automethod:: correlate
    .. automethod:: search
    .. automethod:: optimal
    .. automethod:: score_selection
    .. automethod:: bound
    .. automethod:: attack_demo
    .. automethod:: train_demo
    .. automethod:: ingest_check
    .. automethod:: analyze

    **Artifacts**

    .. automethod:: output_path
    .. automethod:: write_config
    """

    def __init__(self, config: Optional[ExperimentConfig] = None):
        #: Settings of everything the experiment does
        self.config = config if config is not None else ExperimentConfig()

    @classmethod
    def from_file(cls, path: str, **overrides) -> Experiment:
        """
        Reads TOML/JSON config; ``overrides`` replace its values by dotted path
        (``**{'search.budget': 20}``), ``None`` values are ignored.
        """
        return cls(config_reader.apply_overrides(config_reader.read_config(path), overrides))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], **overrides) -> Experiment:
        return cls(config_reader.apply_overrides(config_reader.config_from_dict(data), overrides))

    # Data
    # ----

    @property
    def bench_path(self) -> str:
        path = self.config.bench_path or os.environ.get(DATA_ENV)
        if not path:
            raise NotFoundError(f"No benchmark: set bench_path in the config, --bench, or {DATA_ENV}")
        return path

    @property
    def synthetic(self) -> bool:
        return self.bench_path.startswith(SYNTHETIC_PREFIX)

    @functools.cached_property
    def store(self) -> BenchStore:
        """
        The benchmark: read from :attr:`bench_path`, or generated when it is
        ``synthetic:<landscape>``. Loaded on first access.
        """
        path = self.bench_path
        if path.startswith(SYNTHETIC_PREFIX):
            landscape = path[len(SYNTHETIC_PREFIX):]
            log.info("Generating synthetic benchmark (%s, seed %d)", landscape, self.config.seed)
            try:
                return synthesize_benchmark(self.config.seed, landscape)
            except ValueError as e:
                if isinstance(e, ValidationError):
                    raise
                raise ValidationError(f"Unknown synthetic landscape {landscape!r}") from None
        return bench.ingest(path)

    @functools.cached_property
    def dataset(self) -> Dataset:
        """Dataset the benchmark is queried for (always ``synthetic`` for generated ones)."""
        if self.synthetic:
            return self.store.dataset(Dataset.SYNTHETIC)
        return self.store.dataset(self.config.dataset)

    def samples(self) -> LabeledSet:
        """
        Sample inputs of NTK-scores: the first :attr:`KernelOptions.samples
        <robnas.data.experiment.KernelOptions.samples>` of the ``samples_path`` container, or
        synthetic images shaped for :attr:`ExperimentConfig.network
        <robnas.data.experiment.ExperimentConfig.network>`.
        """
        count = self.config.kernels.samples
        if self.config.samples_path:
            samples = container.load_samples(self.config.samples_path)
            if len(samples) < count:
                raise ValidationError(f"{self.config.samples_path} has {len(samples)} samples, {count} needed")
            return samples.subset(slice(0, count))
        spec = self.config.network
        return synthetic_samples(self.config.seed, count, spec.image_size, spec.input_channels, spec.num_classes)

    # Search space
    # ------------

    def space_report(self) -> Dict[str, Any]:
        """
        Census of the search space: genotype count, isomorphism class count and how many classes
        have each size.
        """
        classes = cellspace.canonical_classes()
        sizes = Counter(cell.class_size for cell in classes)
        return {
            'version': 1,
            'total': len(cellspace.enumerate_genotypes()),
            'classes': len(classes),
            'class_sizes': {str(size): count for size, count in sorted(sizes.items())},
        }

    # NTK-scores
    # ----------

    def correlation_subset(self) -> List[Genotype]:
        """
        Architectures the correlation study scores: :attr:`CorrelateOptions.subset_size
        <robnas.data.experiment.CorrelateOptions.subset_size>` of the stored ones drawn without
        replacement (all if there are fewer), sorted.
        """
        genotypes = self.store.genotypes(self.dataset)
        size = self.config.correlate.subset_size
        if len(genotypes) > size:
            rng = substream(self.config.seed, 'correlate/subset')
            genotypes = [genotypes[int(i)] for i in rng.choice(len(genotypes), size=size, replace=False)]
        return sorted(genotypes)

    def score_variants(self) -> Dict[str, Tuple[str, Optional[AdversaryConfig]]]:
        """
        Score name → ``(variant, attack)``: ``ntk_clean``, and for each radius the robust score
        (``ntk_pgd_8_255``) and, unless disabled, the twice-robust one (``ntk_pgd_8_255_twice``).
        """
        options = self.config.correlate
        variants: Dict[str, Tuple[str, Optional[AdversaryConfig]]] = {'ntk_clean': ('clean', None)}
        for radius in options.radii:
            attack = AdversaryConfig.evaluation_preset(radius, options.attack)
            variants[f'ntk_{attack.metric_name}'] = ('robust', attack)
            if options.twice:
                variants[f'ntk_{attack.metric_name}_twice'] = ('robust_twice', attack)
        return variants

    def ntk_scores(self, genotypes: Sequence[Genotype], jobs: int = 1) -> Dict[Genotype, Dict[str, float]]:
        """
        All :meth:`score_variants` for every genotype, each network initialized with the same
        seed. With ``jobs > 1`` architectures are scored in parallel processes; the result is
        in ``genotypes`` order either way.
        """
        samples = self.samples()
        seed = stage_seed(self.config.seed, 'correlate/weights')
        variants = self.score_variants()
        tasks = [(genotype, samples, self.config.network, variants, self.config.kernels.aggregation, seed)
                 for genotype in genotypes]

        log.info("Scoring %d architectures on %d samples: %s", len(tasks), len(samples), ', '.join(variants))
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                scores = list(executor.map(_score_architecture, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
        else:
            scores = [_score_architecture(task) for task in tasks]
        return dict(zip(genotypes, scores))

    def correlate(self, scores: Mapping[Genotype, Mapping[str, float]]) -> CorrelationTable:
        """
        Spearman coefficients between each score variant (rows) and each benchmark metric
        (columns) over the scored architectures. Metrics some of them lack (like AutoAttack,
        present for a part of the benchmark only) are left out.
        """
        genotypes = list(scores)
        names = list(next(iter(scores.values())))
        rows = {name: [scores[genotype][name] for genotype in genotypes] for name in names}
        columns = {}
        for metric in self.store.metric_names:
            try:
                columns[metric] = self.store.column(self.dataset, metric, genotypes)
            except NotFoundError:
                log.info("Metric %s missing for some scored architectures, not correlated", metric)
        return spearman_matrix(rows, columns)

    def score_selection(self, scores: Mapping[Genotype, Mapping[str, float]], variant: str = 'ntk_clean') -> SearchResult:
        """Train-free pick: the scored architecture with the highest ``variant``."""
        return searchers.score_based_selection(
            self.store, {genotype: values[variant] for genotype, values in scores.items()}, self.dataset)

    # Search
    # ------

    def search(self, algorithms: Optional[Sequence[Algorithm]] = None, jobs: int = 1) -> List[RunReport]:
        """
        :func:`run_many <robnas.algo.searchers.run_many>` with the configured search settings, for
        each of ``algorithms`` (the configured one by default). Runs are seeded with the experiment
        seed.
        """
        base = replace(self.config.search, seed=self.config.seed)
        if base.dataset is None:
            base = replace(base, dataset=self.dataset.value)
        algorithms = [base.algorithm] if algorithms is None else algorithms
        return [searchers.run_many(self.store, replace(base, algorithm=Algorithm(algorithm)), jobs)
                for algorithm in algorithms]

    def optimal(self, metric: str = ROBUST_MEAN) -> RunReport:
        """The best stored architecture by ``metric``, as a one-run report named ``optimal``."""
        genotype, metrics = searchers.exhaustive_optimum(self.store, self.dataset, metric)
        result = SearchResult(best_genotype=genotype, best_value=self.store.lookup(genotype, self.dataset, metric),
                              queries_used=len(self.store.genotypes(self.dataset)), metrics=metrics)
        return RunReport.from_results('optimal', metric, [result])

    # Bounds
    # ------

    def bound(self, save_kernels: Optional[str] = None) -> Dict[str, Any]:
        """
        Terms of the generalization bounds (:func:`generalization_bound_terms
        <robnas.algo.kernels.generalization_bound_terms>`), for the kernels of
        :attr:`BoundOptions.kernels_path <robnas.data.experiment.BoundOptions.kernels_path>`,
        or for kernels computed on random unit-sphere data with ``±1`` labels under the spherical
        attack of :attr:`BoundOptions.radius <robnas.data.experiment.BoundOptions.radius>`.

        Computed kernels also get the minimum eigenvalue lower bound (``None`` when the samples
        are not separated enough for it), and are saved to ``save_kernels`` if given.
        """

        options = self.config.bound
        result: Dict[str, Any] = {}
        if options.kernels_path:
            kernel_set, labels = container.load_kernels(options.kernels_path)
        else:
            spec = self.config.network
            if spec.family == Family.CELL_NETWORK:
                raise ValidationError("Bounds need a network with scalar output, got cell_network")
            spec = replace(spec, input_dim=options.input_dim)
            rng = substream(self.config.seed, 'bound/samples')
            inputs = _on_sphere(rng, self.config.kernels.samples, spec.input_shape())
            labels = rng.choice([-1.0, 1.0], size=len(inputs))
            weights = netcore.init_weights(spec, stage_seed(self.config.seed, 'bound/weights'))
            kernel_set = kernels.build_kernel_set(inputs, labels, weights, AdversaryConfig.on_sphere(options.radius),
                                                  beta=self.config.kernels.beta)
            result.update(_lower_bound(inputs, options.radius, spec))
            if save_kernels:
                container.save_kernels(save_kernels, kernel_set, labels)

        report = kernels.generalization_bound_terms(
            kernels.assemble_clean_kernel(kernel_set), kernels.assemble_robust_kernel(kernel_set), labels,
            lipschitz=options.lipschitz, delta=options.delta)
        return {**report.to_dict(), 'beta': kernel_set.beta, 'radius': kernel_set.radius, **result}

    # Demos
    # -----

    def attack_demo(self, radius: Optional[float] = None, presets: bool = False) -> Dict[str, Any]:
        """
        Clean against robust accuracy of a freshly initialized network, on random inputs
        labeled with the network's own predictions (so clean accuracy is 1). The attack is
        :attr:`ExperimentConfig.adversary <robnas.data.experiment.ExperimentConfig.adversary>`,
        at ``radius`` if given; with ``presets``, also every benchmark evaluation attack.
        """

        spec = self.config.network
        attack = self.config.adversary if radius is None else self.config.adversary.with_radius(radius)
        weights = netcore.init_weights(spec, stage_seed(self.config.seed, 'attack/weights'))
        rng = substream(self.config.seed, 'attack/samples')
        count = self.config.kernels.samples
        if attack.norm == Norm.L2_SPHERE:
            inputs = _on_sphere(rng, count, spec.input_shape())
        else:
            inputs = rng.uniform(0.0, 1.0, size=(count, *spec.input_shape()))
        samples = LabeledSet(inputs, _own_labels(weights, inputs))

        attacks = {attack.metric_name: attack}
        if presets:
            attacks.update(evaluation_presets())
        accuracies = {name: objective.evaluate_accuracy(weights, samples, config) for name, config in attacks.items()}
        log.info("Attack demo on %r: %s", spec, ' '.join(f'{name}={value:.3f}' for name, value in accuracies.items()))
        return {
            'version': 1,
            'samples': count,
            'clean': objective.evaluate_accuracy(weights, samples),
            'robust': accuracies,
            'attack': repr(attack),
        }

    def train_demo(self) -> Tuple[WeightSet, Any]:
        """
        Trains with :attr:`ExperimentConfig.training <robnas.data.experiment.ExperimentConfig.training>`:

        * ``algorithm1_online``: online two-term SGD of :attr:`ExperimentConfig.network
          <robnas.data.experiment.ExperimentConfig.network>` on a stream of unit-sphere samples
          labeled by a random linear rule, under the spherical attack (of the configured training
          attack, or of :attr:`ExperimentConfig.adversary`'s radius);
        * ``minibatch_recipe``: adversarial training of a cell network on synthetic images.

        Returns:
            the weights (the picked iterate for online training), and the per-step
            :class:`Trajectory <robnas.data.training.Trajectory>` or per-epoch
            :class:`History <robnas.data.training.History>`
        """

        training = self.config.training
        spec = self.config.network
        seed = self.config.seed

        if training.mode == TrainMode.ALGORITHM1_ONLINE:
            if spec.family == Family.CELL_NETWORK:
                raise ValidationError("Online training needs a network with scalar output, got cell_network")
            attack = training.adversary or AdversaryConfig.on_sphere(self.config.adversary.radius)
            rng = substream(seed, 'train/samples')
            inputs = _on_sphere(rng, training.iterations, spec.input_shape())
            rule = rng.standard_normal(spec.input_shape())
            labels = np.where(np.tensordot(inputs, rule, axes=rule.ndim) >= 0, 1.0, -1.0)
            weights = netcore.init_weights(spec, stage_seed(seed, 'train/weights'))
            training = replace(training, adversary=attack, seed=seed)
            return objective.sgd_multiobjective(zip(inputs, labels), weights, training)

        attack = training.adversary or self.config.adversary
        genotype = spec.genotype or Genotype((Operator.CONV3X3,) * 6)
        dataset = synthetic_samples(seed, self.config.kernels.samples, spec.image_size, spec.input_channels,
                                    spec.num_classes)
        training = replace(training, adversary=attack, seed=seed)
        return objective.train_cell_recipe(dataset, genotype, training, network=spec)

    # Benchmark
    # ---------

    def ingest_check(self) -> Dict[str, Any]:
        """:meth:`BenchStore.report <robnas.data.bench.BenchStore.report>` of the benchmark."""
        return {'version': 1, 'path': self.bench_path, **self.store.report()}

    def analyze(self, metric: str = ROBUST_MEAN, k: int = 10) -> Dict[str, Any]:
        """
        Sparsity table, operator frequencies among the ``k`` best architectures, and Spearman
        coefficients between the benchmark metrics.
        """
        store, dataset = self.store, self.dataset
        return {
            'version': 1,
            'dataset': dataset.value,
            'metric': metric,
            'best_by_zeroize_count': {
                str(count): {'genotype': str(genotype), 'value': value}
                for count, (genotype, value) in analysis.best_by_zeroize_count(store, dataset, metric).items()
            },
            'operator_frequency': {
                f'{source}->{target}': counts
                for (source, target), counts in analysis.operator_frequency(store, dataset, metric, k).items()
            },
            'metric_correlations': analysis.metric_correlations(store, dataset).to_dict(),
        }

    # Artifacts
    # ---------

    def output_path(self, name: str) -> Path:
        """Path of an artifact in the output directory (created if needed)."""
        directory = Path(self.config.output_dir)
        directory.mkdir(parents=True, exist_ok=True)
        return directory / name

    def write_config(self) -> Path:
        """Writes the resolved config (every default filled in) as ``config.json``."""
        path = self.output_path('config.json')
        path.write_text(json.dumps(config_reader.config_to_dict(self.config), indent=2, sort_keys=True) + '\n',
                        encoding='utf-8')
        return path


# Helpers
# -------

def _score_architecture(task) -> Dict[str, float]:
    genotype, samples, template, variants, aggregation, seed = task
    spec = replace(template, family=Family.CELL_NETWORK, genotype=genotype)
    weights = netcore.init_weights(spec, seed)
    scores = {
        name: kernels.ntk_score(weights, samples.inputs, samples.labels, variant=variant,
                                aggregation=aggregation, adversary=attack)
        for name, (variant, attack) in variants.items()
    }
    log.debug("%s: %s", genotype, ' '.join(f'{name}={value:.4g}' for name, value in scores.items()))
    return scores


def _on_sphere(rng: np.random.Generator, count: int, shape: Tuple[int, ...]) -> np.ndarray:
    points = rng.standard_normal((count, *shape))
    norms = np.sqrt(np.sum(points.reshape(count, -1) ** 2, axis=1))
    return points / norms.reshape((count,) + (1,) * len(shape))


def _own_labels(weights: WeightSet, inputs: np.ndarray) -> np.ndarray:
    outputs = netcore.predict(weights, inputs)
    if weights.spec.family == Family.CELL_NETWORK:
        return np.argmax(outputs, axis=1)
    return np.where(outputs >= 0, 1.0, -1.0)


def _lower_bound(inputs: np.ndarray, radius: float, spec: NetworkSpec) -> Dict[str, Any]:
    try:
        value, order = kernels.lambda_min_lower_bound(inputs.reshape(len(inputs), -1), radius,
                                                      spec.activations[0], spec.leaky_slope)
    except AssumptionViolated as e:
        log.warning("No minimum eigenvalue lower bound: %s", e)
        return {'lambda_min_lower_bound': None, 'hermite_order': None}
    return {'lambda_min_lower_bound': value, 'hermite_order': order}
