"""
Hermite coefficients of activations, used in the lower bound on ``λ_min`` of the robust NTK.

The expansion uses *orthonormal* probabilists' Hermite polynomials,
``h_r(z) = He_r(z) / sqrt(r!)``, so that ``σ(z) = Σ_r μ_r(σ)·h_r(z)`` with
``μ_r(σ) = E_{z ~ N(0, 1)}[σ(z)·h_r(z)]``.

>>> round(hermite_coefficient('relu', 1), 6)
0.5
>>> round(hermite_coefficient('identity', 1), 6)
1.0

Smooth activations are integrated by Gauss–Hermite quadrature. ReLU-like activations have a
kink at 0, where quadrature converges slowly, so they are integrated by adaptive quadrature on
both half-lines instead.

.. autofunction:: hermite_coefficient
.. autofunction:: hermite_coefficient_mc
.. autofunction:: hermite_coefficients_mc
"""

from __future__ import annotations

import functools
import logging
import math
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from robnas.algo.netcore import activation_function
from robnas.data.network import Activation
from robnas.errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

#: Default number of Gauss–Hermite nodes
QUADRATURE_NODES = 200

#: Activations with a kink at 0
KINKED = (Activation.RELU, Activation.LEAKY_RELU)

# |σ(z)|·φ(z) at the growth probe must stay below this for the expectation to be trusted
GROWTH_PROBE = 12.0
GROWTH_LIMIT = 1e-6

ActivationLike = Union[Activation, str, Callable[[np.ndarray], np.ndarray]]


@functools.lru_cache(maxsize=8)
def _nodes(count: int):
    nodes, weights = special.roots_hermitenorm(count)
    return nodes, weights / np.sqrt(2 * np.pi)


def _resolve(activation: ActivationLike, slope: float):
    if callable(activation) and not isinstance(activation, (str, Activation)):
        return activation, None
    kind = Activation(activation)
    return activation_function(kind, slope), kind


def _check_growth(sigma: Callable, name: str):
    probe = np.array([-GROWTH_PROBE, GROWTH_PROBE])
    with np.errstate(over='ignore', invalid='ignore'):
        values = np.abs(np.asarray(sigma(probe), dtype=np.float64))
    density = math.exp(-GROWTH_PROBE ** 2 / 2) / math.sqrt(2 * math.pi)
    if not np.all(np.isfinite(values)) or np.max(values) * density > GROWTH_LIMIT:
        raise NumericalError(f"Activation {name} grows too fast for its Hermite expansion to be computed")


def hermite_coefficient(activation: ActivationLike, r: int, *, slope: float = 0.01,
                        nodes: int = QUADRATURE_NODES) -> float:
    """
    ``μ_r(σ) = E[σ(z)·He_r(z)] / sqrt(r!)`` for ``z ~ N(0, 1)``.

    Args:
        activation: :class:`Activation <robnas.data.network.Activation>` (or its name), or any
            vectorized callable
        r: Order, ``>= 0``
        slope: Negative slope of ``leaky_relu``
        nodes: Gauss–Hermite nodes for smooth activations

    Raises:
        NumericalError: if ``σ`` grows too fast for the expectation to exist numerically
    """

    if r < 0 or int(r) != r:
        raise ValidationError(f"Hermite order must be a non-negative integer, got {r}")
    r = int(r)
    sigma, kind = _resolve(activation, slope)
    name = kind.value if kind else getattr(activation, '__name__', repr(activation))
    _check_growth(sigma, name)
    norm = math.sqrt(math.factorial(r))

    if kind in KINKED:
        def integrand(z):
            return float(sigma(np.array(z))) * special.eval_hermitenorm(r, z) * math.exp(-z * z / 2)

        total = 0.0
        for lo, hi in ((-np.inf, 0.0), (0.0, np.inf)):
            value, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
            total += value
        return total / math.sqrt(2 * math.pi) / norm

    points, weights = _nodes(nodes)
    values = np.asarray(sigma(points), dtype=np.float64) * special.eval_hermitenorm(r, points)
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"Non-finite values integrating μ_{r} of {name}")
    return float(np.dot(weights, values)) / norm


def hermite_coefficients_mc(activation: ActivationLike, max_order: int, *, samples: int = 10**7,
                            seed: int = 0, slope: float = 0.01, chunk: int = 10**6) -> np.ndarray:
    """
    Stratified Monte Carlo estimates of ``μ_0 … μ_max_order``: one uniform draw inside each of
    ``samples`` equal-probability strata of ``N(0, 1)``, mapped through the inverse normal CDF.

    Returns:
        Array of ``max_order + 1`` coefficients
    """

    if max_order < 0:
        raise ValidationError(f"Hermite order must be non-negative, got {max_order}")
    sigma, _ = _resolve(activation, slope)
    rng = np.random.default_rng(seed)
    sums = np.zeros(max_order + 1)

    for start in range(0, samples, chunk):
        stop = min(start + chunk, samples)
        u = (np.arange(start, stop) + rng.uniform(size=stop - start)) / samples
        z = special.ndtri(u)
        values = np.asarray(sigma(z), dtype=np.float64)
        # He_{k+1} = z·He_k - k·He_{k-1}
        previous, current = np.zeros_like(z), np.ones_like(z)
        for k in range(max_order + 1):
            sums[k] += np.dot(values, current)
            previous, current = current, z * current - k * previous

    norms = np.sqrt([math.factorial(k) for k in range(max_order + 1)])
    return sums / samples / norms


def hermite_coefficient_mc(activation: ActivationLike, r: int, *, samples: int = 10**7,
                           seed: int = 0, slope: float = 0.01) -> float:
    """Single-order shortcut of :func:`hermite_coefficients_mc`."""
    return float(hermite_coefficients_mc(activation, r, samples=samples, seed=seed, slope=slope)[r])
