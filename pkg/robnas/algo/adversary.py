"""
ρ-bounded adversaries: FGSM, multi-step PGD and the "twice" composition used by the robust
kernels.

Every attack ascends the loss ``ℓ(y·f(x, W))`` (cross-entropy for the cell network) with
gradients from :func:`netcore.gradient_wrt_input <robnas.algo.netcore.gradient_wrt_input>`:

* ``l_inf``: step along ``sign(∇_x ℓ)`` (with ``sign(0) = 0``), then clip to the box
  ``[x - ρ, x + ρ]`` and to the data range;
* ``l2_sphere``: step along ``∇_x ℓ / ‖∇_x ℓ‖``, then :func:`project` back onto the part of the
  unit sphere within ``ρ`` of the center.

The outputs satisfy the ball (and clamp) bounds exactly up to rounding, whatever the gradients.

.. autofunction:: normalize_input
.. autofunction:: project
.. autofunction:: fgsm
.. autofunction:: pgd
.. autofunction:: twice_perturb
.. autofunction:: attack_batch
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from robnas.algo import netcore
from robnas.data.adversary import AdversaryConfig, Norm
from robnas.data.network import Family, WeightSet
from robnas.errors import ValidationError


def normalize_input(x: np.ndarray) -> np.ndarray:
    """
    ``x / ‖x‖`` (Euclidean for vectors, Frobenius for matrices).

    Raises:
        ValidationError: for the zero input
    """
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x)
    if norm == 0 or not np.isfinite(norm):
        raise ValidationError(f"Can't normalize input with norm {norm}")
    return x / norm


def project(point: np.ndarray, center: np.ndarray, radius: float, norm: Norm = Norm.L_INF,
            clamp: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """
    Closest point of the attack set, for ``l_inf``: clip coordinates to
    ``[center - ρ, center + ρ]``, then to ``clamp``.

    For ``l2_sphere`` (``center`` on the unit sphere): shrink ``point - center`` to length ``ρ``
    if longer, renormalize to the unit sphere, and if renormalizing left the ball, rotate the
    point towards ``center`` onto the boundary of the spherical cap ``{u : ‖u - center‖ <= ρ}``.
    """

    point = np.asarray(point, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)

    if Norm(norm) == Norm.L_INF:
        result = np.clip(point, center - radius, center + radius)
        if clamp is not None:
            result = np.clip(result, clamp[0], clamp[1])
        return result

    diff = point - center
    distance = np.linalg.norm(diff)
    if distance > radius:
        point = center + diff * (radius / distance)
    length = np.linalg.norm(point)
    if length == 0:
        return center.copy()
    point = point / length

    if radius >= 2.0:
        # The ball contains the whole sphere
        return point

    axis = center / np.linalg.norm(center)
    cos_limit = 1.0 - radius * radius / 2.0
    inner = float(np.vdot(point, axis))
    if inner >= cos_limit:
        return point

    tangent = point - inner * axis
    tangent_norm = np.linalg.norm(tangent)
    if tangent_norm == 0:
        # Antipodal to the center
        return axis.copy()
    sin_limit = np.sqrt(max(0.0, 1.0 - cos_limit * cos_limit))
    return cos_limit * axis + sin_limit * (tangent / tangent_norm)


def _direction(gradient: np.ndarray, norm: Norm) -> np.ndarray:
    if norm == Norm.L_INF:
        return np.sign(gradient)
    length = np.linalg.norm(gradient)
    return gradient / length if length > 0 else np.zeros_like(gradient)


def _random_start(x: np.ndarray, cfg: AdversaryConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.norm == Norm.L_INF:
        return x + rng.uniform(-cfg.radius, cfg.radius, size=x.shape)
    direction = rng.standard_normal(x.shape)
    return x + direction / np.linalg.norm(direction) * cfg.radius * rng.uniform()


def pgd(x: np.ndarray, y, W: WeightSet, cfg: AdversaryConfig, center: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Projected gradient ascent on the loss: ``cfg.steps`` iterations of
    ``x_{t+1} = project(x_t + step·direction(∇_x ℓ(x_t)), center, ρ)``.

    Args:
        x: Starting point (one sample)
        y: Label
        W: Network weights
        cfg: Attack settings
        center: Center of the ball (``x`` by default)
        rng: Generator of the random start (by default one seeded with ``cfg.seed``)
    """

    x = np.asarray(x, dtype=np.float64)
    center = x if center is None else np.asarray(center, dtype=np.float64)
    if cfg.radius == 0:
        return x.copy()

    current = x
    if cfg.random_start:
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        current = project(_random_start(current, cfg, rng), center, cfg.radius, cfg.norm, cfg.clamp)

    for _ in range(cfg.steps):
        gradient = netcore.gradient_wrt_input(W, current, y)
        current = project(current + cfg.step_size * _direction(gradient, cfg.norm),
                          center, cfg.radius, cfg.norm, cfg.clamp)
    return current


def fgsm(x: np.ndarray, y, W: WeightSet, radius: float,
         clamp: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """
    ``project(x + ρ·sign(∇_x ℓ), x, ρ)``: exactly :func:`pgd` with one step of size ``ρ``.
    """
    return pgd(x, y, W, AdversaryConfig.fgsm(radius, clamp=clamp))


def twice_perturb(x: np.ndarray, y, W: WeightSet, cfg: AdversaryConfig) -> np.ndarray:
    """
    The same attack applied twice, the second one centered at the first one's output; the
    result may be up to ``2ρ`` away from ``x``.
    """
    first = pgd(x, y, W, cfg)
    return pgd(first, y, W, cfg, center=first)


def attack_batch(inputs: Sequence[np.ndarray], labels: Sequence, W: WeightSet, cfg: AdversaryConfig,
                 twice: bool = False) -> np.ndarray:
    """
    Attacked copies of many samples (all at once for the cell network, where gradients are
    batched; one by one otherwise).
    """

    inputs = np.asarray(inputs, dtype=np.float64)
    if len(inputs) == 0:
        raise ValidationError("Nothing to attack")

    if W.spec.family == Family.CELL_NETWORK and cfg.norm == Norm.L_INF and not cfg.random_start:
        result = pgd(inputs, np.asarray(labels), W, cfg)
        if twice:
            result = pgd(result, np.asarray(labels), W, cfg, center=result)
        return result

    attack = twice_perturb if twice else pgd
    return np.stack([attack(x, y, W, cfg) for x, y in zip(inputs, labels)])

