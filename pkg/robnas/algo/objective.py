"""
The two-term (clean + robust) training objective, the trainers and accuracy evaluation. The
losses themselves are in :mod:`algo.losses <robnas.algo.losses>`.

The objective trades standard for adversarial training with ``β ∈ [0, 1]``::

    L(W) = (1 - β)·mean ℓ(y_i·f(x_i, W)) + β·mean ℓ(y_i·f(A_ρ(x_i, W), W))

where ``A_ρ`` is the attack (PGD standing in for the worst case inside the ρ-ball).

Two trainers minimize it:

* :func:`sgd_multiobjective`: online SGD, one fresh sample per step, returning a uniformly drawn
  iterate (not the last one);
* :func:`train_cell_recipe`: mini-batch SGD with momentum, weight decay and a one-cycle step
  size, for cell networks.

.. autofunction:: mixed_empirical_risk
.. autofunction:: sgd_multiobjective
.. autofunction:: pick_iterate
.. autofunction:: one_cycle_lr
.. autofunction:: train_cell_recipe
.. autofunction:: evaluate_accuracy
.. autofunction:: radius_sweep
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from robnas.algo import adversary, netcore
from robnas.data.adversary import RADIUS_SWEEP, AdversaryConfig
from robnas.data.cell import Genotype
from robnas.data.network import Family, NetworkSpec, WeightSet
from robnas.data.training import EpochRecord, History, LabeledSet, TrainConfig, TrainMode, Trajectory
from robnas.errors import ValidationError

log = logging.getLogger(__name__)


class Risk(NamedTuple):
    total: float
    clean: float
    robust: float


def mixed_empirical_risk(samples: LabeledSet, W: WeightSet, beta: float,
                         attack: Optional[AdversaryConfig]) -> Risk:
    """
    ``(total, clean, robust)`` with ``total = (1-β)·clean + β·robust``. Without an attack the
    robust term equals the clean one.

    Raises:
        ValidationError: for an empty sample set or ``β`` outside ``[0, 1]``
    """
    if len(samples) == 0:
        raise ValidationError("Empirical risk of an empty sample set")
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta must be in [0, 1], got {beta}")

    clean = _mean_loss(W, samples.inputs, samples.labels)
    if attack is None or attack.radius == 0:
        robust = clean
    else:
        attacked = adversary.attack_batch(samples.inputs, samples.labels, W, attack)
        robust = _mean_loss(W, attacked, samples.labels)

    return Risk((1.0 - beta) * clean + beta * robust, clean, robust)


def _mean_loss(W: WeightSet, inputs: np.ndarray, labels: np.ndarray) -> float:
    if W.spec.family == Family.CELL_NETWORK:
        return netcore.loss_value(W, inputs, labels)
    return float(np.mean([netcore.loss_value(W, x, y) for x, y in zip(inputs, labels)]))


def pick_iterate(count: int, seed: int) -> int:
    """
    Uniform draw from ``{1, …, count}``: which iterate ``W⁽ᵏ⁾`` online SGD returns.
    """
    return int(np.random.default_rng(seed).integers(1, count + 1))


def sgd_multiobjective(data_stream: Iterable[Tuple[np.ndarray, object]], W: WeightSet,
                       cfg: TrainConfig) -> Tuple[WeightSet, Trajectory]:
    """
    Online SGD on the two-term loss. Step ``i`` takes the next sample ``(x_i, y_i)`` and updates::

        W⁽ⁱ⁺¹⁾ = W⁽ⁱ⁾ - γ(1-β)·∇ℓ(y_i f(x_i, W⁽ⁱ⁾)) - γβ·∇ℓ(y_i f(A_ρ(x_i, W⁽ⁱ⁾), W⁽ⁱ⁾))

    With ``β = 0`` the attack is skipped and the run is plain SGD on the clean loss.

    Args:
        data_stream: At least ``cfg.iterations`` samples
        W: Initial weights ``W⁽¹⁾``
        cfg: Settings (``mode`` must be ``algorithm1_online``)

    Returns:
        the iterate ``W̄ = W⁽ᵏ⁾`` with ``k`` drawn by :func:`pick_iterate` from ``cfg.seed``, and the
        per-step losses
    """

    if cfg.mode != TrainMode.ALGORITHM1_ONLINE:
        raise ValidationError(f"sgd_multiobjective runs in algorithm1_online mode, got {cfg.mode.value}")
    if cfg.beta > 0 and cfg.adversary is None:
        raise ValidationError("beta > 0 needs an adversary")

    spec = W.spec
    steps = cfg.iterations
    chosen = pick_iterate(steps, cfg.seed)
    picked = W if chosen == 1 else None

    flat = W.flat()
    clean_losses = np.empty(steps)
    robust_losses = np.full(steps, np.nan)
    stream = iter(data_stream)

    for step in range(steps):
        try:
            x, y = next(stream)
        except StopIteration:
            raise ValidationError(f"Data stream ended after {step} samples, {steps} needed") from None

        current = W if step == 0 else WeightSet.from_flat(spec, flat)
        clean_losses[step], clean_gradient = netcore.loss_and_gradient(current, x, y)
        flat = flat - cfg.gamma * (1.0 - cfg.beta) * clean_gradient

        if cfg.beta > 0:
            attacked = adversary.pgd(x, y, current, cfg.adversary)
            robust_losses[step], robust_gradient = netcore.loss_and_gradient(current, attacked, y)
            flat = flat - cfg.gamma * cfg.beta * robust_gradient

        if step + 2 == chosen:
            picked = WeightSet.from_flat(spec, flat)

    final = WeightSet.from_flat(spec, flat)
    log.debug("Online SGD: %d steps, returning iterate %d, last clean loss %.4g", steps, chosen, clean_losses[-1])
    return picked, Trajectory(clean_losses, robust_losses, chosen, final)


def one_cycle_lr(step: int, total: int, base: float = 0.05, peak: float = 0.1,
                 warmup_fraction: float = 0.3) -> float:
    """
    One-cycle step size: linear from ``base`` at step 0 to exactly ``peak`` at step
    ``round(warmup_fraction·total)``, then cosine annealing to 0 at ``total``.
    """
    if total <= 0:
        return base
    peak_step = round(warmup_fraction * total)
    if step >= total:
        return 0.0
    if step < peak_step:
        return base + (peak - base) * step / peak_step
    if step == peak_step:
        return peak
    return peak * 0.5 * (1.0 + math.cos(math.pi * (step - peak_step) / (total - peak_step)))


def train_cell_recipe(dataset: LabeledSet, genotype: Genotype, cfg: TrainConfig,
                      network: Optional[NetworkSpec] = None,
                      weights: Optional[WeightSet] = None) -> Tuple[WeightSet, History]:
    """
    Mini-batch adversarial training of a cell network: SGD with momentum and weight decay, the
    step size following :func:`one_cycle_lr` over all steps, and each batch replaced (with weight
    ``β``) by its attacked copy.

    Args:
        dataset: Images ``(N, C, H, W)`` with integer labels
        genotype: Cell to instantiate
        cfg: Settings (``mode`` must be ``minibatch_recipe``)
        network: Template spec (defaults derived from ``dataset``); its genotype is replaced
        weights: Starting weights (initialized from ``cfg.seed`` by default)

    Returns:
        trained weights and per-epoch history (clean and robust training accuracy, losses)
    """

    if cfg.mode != TrainMode.MINIBATCH_RECIPE:
        raise ValidationError(f"train_cell_recipe runs in minibatch_recipe mode, got {cfg.mode.value}")
    if len(dataset) == 0:
        raise ValidationError("Can't train on an empty dataset")

    if weights is None:
        spec = _cell_spec(dataset, genotype, network)
        weights = netcore.init_weights(spec, cfg.seed)
    spec = weights.spec

    rng = np.random.default_rng(cfg.seed)
    batches = math.ceil(len(dataset) / cfg.batch_size)
    total_steps = cfg.epochs * batches
    attack = cfg.adversary if cfg.beta > 0 else None

    flat = weights.flat()
    velocity = np.zeros_like(flat)
    history = History()
    step = 0
    lr = cfg.base_lr

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for batch in range(batches):
            indices = order[batch * cfg.batch_size:(batch + 1) * cfg.batch_size]
            inputs, labels = dataset.inputs[indices], dataset.labels[indices]
            current = WeightSet.from_flat(spec, flat)

            gradient = np.zeros_like(flat)
            if cfg.beta < 1 or attack is None:
                _, clean_gradient = netcore.loss_and_gradient(current, inputs, labels)
                gradient += (1.0 - cfg.beta if attack is not None else 1.0) * clean_gradient
            if attack is not None:
                attacked = adversary.attack_batch(inputs, labels, current, attack)
                _, robust_gradient = netcore.loss_and_gradient(current, attacked, labels)
                gradient += cfg.beta * robust_gradient

            gradient += cfg.weight_decay * flat
            lr = one_cycle_lr(step, total_steps, cfg.base_lr, cfg.peak_lr, cfg.warmup_fraction)
            velocity = cfg.momentum * velocity + gradient
            flat = flat - lr * velocity
            step += 1

        current = WeightSet.from_flat(spec, flat)
        record = _epoch_record(epoch + 1, lr, current, dataset, attack)
        history.records.append(record)
        log.info("Epoch %d/%d: lr=%.4f clean_acc=%.3f robust_acc=%s", epoch + 1, cfg.epochs, lr,
                 record.clean_acc, 'n/a' if record.robust_acc is None else f'{record.robust_acc:.3f}')

    if cfg.epochs == 0:
        return weights, history
    return WeightSet.from_flat(spec, flat), history


def _cell_spec(dataset: LabeledSet, genotype: Genotype, network: Optional[NetworkSpec]) -> NetworkSpec:
    channels, size = dataset.inputs.shape[1], dataset.inputs.shape[2]
    if network is None:
        return NetworkSpec(Family.CELL_NETWORK, genotype=genotype, input_channels=channels, image_size=size,
                           num_classes=int(dataset.labels.max()) + 1)
    return replace(network, family=Family.CELL_NETWORK, genotype=genotype)


def _epoch_record(epoch: int, lr: float, W: WeightSet, dataset: LabeledSet,
                  attack: Optional[AdversaryConfig]) -> EpochRecord:
    clean_acc = evaluate_accuracy(W, dataset)
    clean_loss = _mean_loss(W, dataset.inputs, dataset.labels)
    if attack is None:
        return EpochRecord(epoch, lr, clean_acc, None, clean_loss, None)
    attacked = adversary.attack_batch(dataset.inputs, dataset.labels, W, attack)
    return EpochRecord(epoch, lr, clean_acc, evaluate_accuracy(W, LabeledSet(attacked, dataset.labels)),
                       clean_loss, _mean_loss(W, attacked, dataset.labels))


def evaluate_accuracy(W: WeightSet, eval_set: LabeledSet, attack: Optional[AdversaryConfig] = None,
                      tie_rule: str = 'indicator') -> float:
    """
    Share of correctly classified samples, on attacked inputs if ``attack`` is given.

    Scalar networks count ``y·f(x) >= 0`` as correct, which is ``1 - mean 1{y·f < 0}``; the
    cell network uses top-1 of its logits.

    Args:
        tie_rule: How a scalar output of exactly 0 counts: ``indicator`` (correct, as the 0-1
            loss ``1{y·f < 0}`` has it) or ``alternate`` (alternately correct and wrong, so that
            ties count as one half on average)
    """
    if len(eval_set) == 0:
        raise ValidationError("Accuracy of an empty evaluation set")
    if tie_rule not in ('indicator', 'alternate'):
        raise ValidationError(f"Unknown tie rule {tie_rule!r}")

    inputs = eval_set.inputs
    if attack is not None and attack.radius > 0:
        inputs = adversary.attack_batch(inputs, eval_set.labels, W, attack)

    outputs = netcore.predict(W, inputs)
    if W.spec.family == Family.CELL_NETWORK:
        return float(np.mean(np.argmax(outputs, axis=1) == eval_set.labels))

    margins = eval_set.labels * outputs
    correct = (margins > 0).astype(np.float64)
    ties = np.flatnonzero(margins == 0)
    if tie_rule == 'indicator':
        correct[ties] = 1.0
    else:
        correct[ties] = (np.arange(len(ties)) % 2 == 0)
    return float(correct.mean())


def radius_sweep(W: WeightSet, eval_set: LabeledSet, radii: Sequence[float] = RADIUS_SWEEP,
                 attack: Optional[AdversaryConfig] = None) -> Dict[float, float]:
    """
    Robust accuracy at every radius, with ``attack`` (PGD-20 on pixels by default) rescaled to
    each radius.
    """
    base = attack if attack is not None else AdversaryConfig.evaluation_preset(radii[0])
    return {radius: evaluate_accuracy(W, eval_set, base.with_radius(radius)) for radius in radii}
