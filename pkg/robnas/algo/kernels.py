"""
Empirical NTK Gram matrices at initialization, the clean and robust mixed kernels built from
them, NTK-scores and the eigenvalue and generalization-bound quantities derived from the mixed
kernels.

Kernels
-------

For weights ``W⁽¹⁾`` at initialization, ``k(a, b) = <∇_W f(a, W⁽¹⁾), ∇_W f(b, W⁽¹⁾)>``. Every
input's Jacobian row is computed once and the Gram matrices are products of Jacobian blocks.
With ``β`` the weight of the robust term, the two mixed kernels are::

    K_all = (1-β)²·K   + β(1-β)·(K̄_ρ  + K̄_ρᵀ)  + β²·K̂_ρ
    K̃_all = (1-β)²·K̂_ρ + β(1-β)·(K̄_2ρ + K̄_2ρᵀ) + β²·K̂_2ρ

They are Gram matrices of ``(1-β)·J + β·Ĵ``, hence PSD for every ``β`` in ``[0, 1]``.

.. autofunction:: empirical_ntk_gram
.. autofunction:: build_kernel_set
.. autofunction:: assemble_clean_kernel
.. autofunction:: assemble_robust_kernel

Scores
------

.. autofunction:: ntk_score
.. autofunction:: aggregate
.. autofunction:: architecture_score

Eigenvalues and bounds
----------------------

.. autofunction:: lambda_min_exact
.. autofunction:: separation
.. autofunction:: choose_r
.. autofunction:: lambda_min_lower_bound
.. autofunction:: generalization_bound_terms
.. autofunction:: theoretical_step_size
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from robnas.algo import netcore
from robnas.algo.adversary import attack_batch
from robnas.algo.hermite import hermite_coefficient
from robnas.data.adversary import AdversaryConfig
from robnas.data.cell import Genotype
from robnas.data.kernels import BoundReport, KernelSet
from robnas.data.network import Activation, Family, NetworkSpec, WeightSet
from robnas.errors import AssumptionViolated, NumericalError, ValidationError

log = logging.getLogger(__name__)

#: Diagonal jitter tried, in order, when a kernel fails to factorize
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

#: Gram matrices an NTK-score can be computed from
SCORE_VARIANTS = ('clean', 'robust', 'robust_twice')

#: Reductions of a Gram matrix to a score
AGGREGATIONS = ('frobenius', 'trace', 'lambda_min')

#: Samples per NTK-score, as in the benchmark correlation study
SCORE_SAMPLES = 50

UNIT_TOLERANCE = 1e-8


# Gram matrices
# -------------

def _symmetrized(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2


def _gram(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if left is right:
        return _symmetrized(left @ left.T)
    return left @ right.T


def empirical_ntk_gram(inputs_a: Sequence[np.ndarray], inputs_b: Optional[Sequence[np.ndarray]],
                       W: WeightSet) -> np.ndarray:
    """
    ``G[i, j] = k(a_i, b_j)``. With ``inputs_b`` being ``None`` (or the very same object as
    ``inputs_a``), the result is the exactly symmetric Gram of ``inputs_a``.
    """
    left = netcore.jacobian(W, inputs_a)
    if inputs_b is None or inputs_b is inputs_a:
        return _gram(left, left)
    return _gram(left, netcore.jacobian(W, inputs_b))


def build_kernel_set(inputs: Sequence[np.ndarray], labels: Sequence, W: WeightSet,
                     adversary: AdversaryConfig, beta: float = 0.5) -> KernelSet:
    """
    All five Gram matrices of one weight draw: the inputs are attacked once (``x̂``) and the
    attacked copies attacked again (``x̂̂``, centered at ``x̂``).

    With ``adversary.radius == 0`` all five matrices are the same.
    """

    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta must be in [0, 1], got {beta}")
    inputs = np.asarray(inputs, dtype=np.float64)

    clean = netcore.jacobian(W, inputs)
    if adversary.radius == 0:
        once = twice = clean
    else:
        attacked = attack_batch(inputs, labels, W, adversary)
        once = netcore.jacobian(W, attacked)
        twice = netcore.jacobian(W, attack_batch(attacked, labels, W, adversary))

    log.debug("Kernel set: N=%d, P=%d, %r", len(inputs), clean.shape[1], adversary)
    return KernelSet(
        clean=_gram(clean, clean),
        cross=_gram(clean, once),
        robust=_gram(once, once),
        cross_twice=_gram(once, twice),
        robust_twice=_gram(twice, twice),
        beta=beta,
        radius=adversary.radius,
        provenance={'network': repr(W.spec), 'seed': W.seed, 'adversary': repr(adversary)},
    )


def _mix(beta: float, plain: np.ndarray, cross: np.ndarray, attacked: np.ndarray) -> np.ndarray:
    if not 0.0 <= beta <= 1.0:
        raise ValidationError(f"beta must be in [0, 1], got {beta}")
    mixed = (1 - beta) ** 2 * plain + beta * (1 - beta) * (cross + cross.T) + beta ** 2 * attacked
    return _symmetrized(mixed)


def assemble_clean_kernel(kernels: KernelSet, beta: Optional[float] = None) -> np.ndarray:
    """
    ``K_all`` of the kernel set (``beta`` overrides ``kernels.beta``). Equals ``K`` exactly at
    ``β = 0`` and ``K̂_ρ`` at ``β = 1``.
    """
    beta = kernels.beta if beta is None else beta
    return _mix(beta, kernels.clean, kernels.cross, kernels.robust)


def assemble_robust_kernel(kernels: KernelSet, beta: Optional[float] = None) -> np.ndarray:
    """
    ``K̃_all`` of the kernel set. Equals ``K̂_ρ`` exactly at ``β = 0`` and ``K̂_2ρ`` at ``β = 1``.
    """
    beta = kernels.beta if beta is None else beta
    return _mix(beta, kernels.robust, kernels.cross_twice, kernels.robust_twice)


# Scores
# ------

def aggregate(gram: np.ndarray, aggregation: str = 'frobenius') -> float:
    """
    Reduces a Gram matrix to a number: ``frobenius`` norm, ``trace``, or exact ``lambda_min``.
    """
    if aggregation == 'frobenius':
        return float(np.linalg.norm(gram, 'fro'))
    if aggregation == 'trace':
        return float(np.trace(gram))
    if aggregation == 'lambda_min':
        return lambda_min_exact(gram)
    raise ValidationError(f"Unknown aggregation {aggregation!r}, expected one of {', '.join(AGGREGATIONS)}")


def ntk_score(W: WeightSet, inputs: Sequence[np.ndarray], labels: Optional[Sequence] = None, *,
              variant: str = 'clean', aggregation: str = 'frobenius',
              adversary: Optional[AdversaryConfig] = None) -> float:
    """
    NTK-score of a network: :func:`aggregate` of the Gram matrix of ``inputs`` (``clean``), of
    their attacked copies (``robust``) or of the twice-attacked copies (``robust_twice``).

    Sample order doesn't change the score: reordering permutes rows and columns of the Gram
    matrix.
    """

    if variant not in SCORE_VARIANTS:
        raise ValidationError(f"Unknown score variant {variant!r}, expected one of {', '.join(SCORE_VARIANTS)}")
    inputs = np.asarray(inputs, dtype=np.float64)

    if variant != 'clean':
        if adversary is None or labels is None:
            raise ValidationError(f"Score variant {variant} needs an adversary and labels")
        inputs = attack_batch(inputs, labels, W, adversary, twice=(variant == 'robust_twice'))

    return aggregate(empirical_ntk_gram(inputs, None, W), aggregation)


def architecture_score(genotype: Genotype, inputs: Sequence[np.ndarray], labels: Optional[Sequence] = None, *,
                       seed: int = 0, network: Optional[NetworkSpec] = None, **kwargs) -> float:
    """
    :func:`ntk_score` of the cell network built from ``genotype`` (with the rest of its settings
    taken from ``network``), at initialization drawn with ``seed``.
    """
    base = network if network is not None else NetworkSpec(Family.CELL_NETWORK, genotype=genotype)
    spec = replace(base, family=Family.CELL_NETWORK, genotype=genotype)
    return ntk_score(netcore.init_weights(spec, seed), inputs, labels, **kwargs)


# Eigenvalues
# -----------

def lambda_min_exact(matrix: np.ndarray) -> float:
    """
    Smallest eigenvalue of the symmetrized ``matrix`` by a dense symmetric eigensolver.

    Raises:
        NumericalError: for non-finite entries
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("Matrix has non-finite entries")
    values = linalg.eigh(_symmetrized(matrix), eigvals_only=True, subset_by_index=[0, 0])
    return float(values[0])


def separation(inputs: Sequence[np.ndarray], radius: float) -> float:
    """
    ``c = max_{i≠j} |<x_i, x_j>| + 2ρ + ρ²`` for unit-norm inputs (``2ρ + ρ²`` for one input).

    Raises:
        ValidationError: if some input is not unit-norm
    """
    flat = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(np.abs(norms - 1) > UNIT_TOLERANCE):
        raise ValidationError(f"Inputs must be unit-norm, got norms in [{norms.min():.6g}, {norms.max():.6g}]")
    inner = 0.0
    if len(flat) > 1:
        products = np.abs(flat @ flat.T)
        np.fill_diagonal(products, -np.inf)
        inner = float(products.max())
    return inner + 2 * radius + radius * radius


def choose_r(count: int, c: float) -> int:
    """
    Smallest ``r >= 1`` with ``(N - 1)·cʳ < 1``.

    Raises:
        AssumptionViolated: if ``c >= 1``, where no ``r`` exists and the bound is vacuous
    """
    if count < 1:
        raise ValidationError(f"Need at least one sample, got {count}")
    if c >= 1:
        raise AssumptionViolated(f"Separation assumption violated: bound vacuous (c = {c:.6g} >= 1)")
    r = 1
    while (count - 1) * c ** r >= 1:
        r += 1
    return r


def lambda_min_lower_bound(inputs: Sequence[np.ndarray], radius: float, activation: Activation = Activation.RELU,
                           slope: float = 0.01) -> Tuple[float, int]:
    """
    Lower bound ``2·μ_r(σ)²·(1 - (N - 1)·cʳ)`` on the smallest eigenvalue of the robust NTK of
    two-layer networks, with ``c`` from :func:`separation` and ``r`` from :func:`choose_r`.

    Returns:
        The bound and the ``r`` it was evaluated at
    """
    c = separation(inputs, radius)
    count = len(inputs)
    r = choose_r(count, c)
    mu = hermite_coefficient(activation, r, slope=slope)
    bound = 2 * mu * mu * (1 - (count - 1) * c ** r)
    log.debug("λ_min lower bound: N=%d c=%.6g r=%d μ_r=%.6g → %.6g", count, c, r, mu, bound)
    return bound, r


# Bounds
# ------

def _solve(matrix: np.ndarray, rhs: np.ndarray, name: str) -> Tuple[np.ndarray, float]:
    identity = np.eye(len(matrix))
    for jitter in JITTERS:
        try:
            factor = linalg.cho_factor(matrix + jitter * identity)
        except linalg.LinAlgError:
            continue
        if jitter:
            log.warning("%s needed diagonal jitter %g to factorize", name, jitter)
        return linalg.cho_solve(factor, rhs), jitter
    raise NumericalError(
        f"{name} is singular even with jitter {JITTERS[-1]}: λ_min = {lambda_min_exact(matrix):.6g}"
    )


def generalization_bound_terms(clean_kernel: np.ndarray, robust_kernel: np.ndarray, y: Sequence[float],
                               lipschitz: float = 1.0, samples: Optional[int] = None,
                               delta: float = 0.05) -> BoundReport:
    """
    Evaluates the terms of the clean and robust generalization bounds for labels ``y`` (``±1``).

    Args:
        clean_kernel: ``K_all``
        robust_kernel: ``K̃_all``
        y: Labels
        lipschitz: Lipschitz constant ``L`` of the loss surrogate
        samples: ``N`` (``len(y)`` by default)
        delta: Failure probability of the bounds

    Raises:
        NumericalError: when a kernel can't be factorized even with the largest jitter
    """

    y = np.asarray(y, dtype=np.float64)
    count = len(y) if samples is None else samples
    if not 0 < delta < 1:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    for name, kernel in (('K_all', clean_kernel), ('K̃_all', robust_kernel)):
        if np.shape(kernel) != (len(y), len(y)):
            raise ValidationError(f"{name}: expected shape {(len(y), len(y))}, got {np.shape(kernel)}")

    clean_kernel = _symmetrized(np.asarray(clean_kernel, dtype=np.float64))
    robust_kernel = _symmetrized(np.asarray(robust_kernel, dtype=np.float64))
    clean_solution, clean_jitter = _solve(clean_kernel, y, 'K_all')
    robust_solution, robust_jitter = _solve(robust_kernel, y, 'K̃_all')

    clean_quadratic = float(y @ clean_solution)
    robust_quadratic = float(y @ robust_solution)
    lambda_clean = lambda_min_exact(clean_kernel)
    lambda_robust = lambda_min_exact(robust_kernel)
    norm = float(y @ y)
    square = lipschitz * lipschitz

    def bound(quadratic):
        return math.sqrt(max(square * quadratic / count, 0.0))

    def courant(eigenvalue):
        return norm / eigenvalue if eigenvalue > 0 else math.inf

    return BoundReport(
        clean_quadratic=clean_quadratic,
        robust_quadratic=robust_quadratic,
        clean_bound_main=bound(clean_quadratic),
        robust_bound_main=bound(robust_quadratic),
        lambda_min_clean=lambda_clean,
        lambda_min_robust=lambda_robust,
        clean_courant=courant(lambda_clean),
        robust_courant=courant(lambda_robust),
        clean_courant_bound=bound(courant(lambda_clean)),
        robust_courant_bound=bound(courant(lambda_robust)),
        confidence=math.sqrt(math.log(1 / delta) / count),
        lipschitz=lipschitz,
        samples=count,
        delta=delta,
        jitter=max(clean_jitter, robust_jitter),
    )


def theoretical_step_size(report: BoundReport, nu: float, c_lip: float, width: int,
                          pixels: Optional[int] = None, filter_size: Optional[int] = None) -> float:
    """
    Step size under which online training of a wide residual network attains the bounds of
    ``report``, with ``q = min(yᵀK_all⁻¹y, yᵀK̃_all⁻¹y)``:

    * FCNN: ``ν·sqrt(q) / (sqrt(C_Lip)·exp(C_Lip)·m·sqrt(N))``;
    * CNN (``pixels`` and ``filter_size`` given): ``ν·q / (sqrt(C_Lip·p·κ)·exp(C_Lip·sqrt(κ))·m·sqrt(N))``.
    """

    q = min(report.clean_quadratic, report.robust_quadratic)
    root_n = math.sqrt(report.samples)
    if pixels is None and filter_size is None:
        return nu * math.sqrt(q) / (math.sqrt(c_lip) * math.exp(c_lip) * width * root_n)
    if pixels is None or filter_size is None:
        raise ValidationError("CNN step size needs both pixels and filter_size")
    return nu * q / (math.sqrt(c_lip * pixels * filter_size) * math.exp(c_lip * math.sqrt(filter_size)) * width * root_n)
