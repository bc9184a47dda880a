"""
Kernel matrices and bound reports computed by :mod:`algo.kernels <robnas.algo.kernels>`.

For ``N`` samples ``x_i``, their attacked copies ``x̂_i`` and twice-attacked copies ``x̂̂_i``,
with ``k(a, b) = <∇_W f(a, W⁽¹⁾), ∇_W f(b, W⁽¹⁾)>`` the empirical NTK at initialization:

.. list-table::
    :header-rows: 1

    * - attribute
      - entry ``(i, j)``
    * - :attr:`KernelSet.clean`
      - ``k(x_i, x_j)``
    * - :attr:`KernelSet.cross`
      - ``k(x_i, x̂_j)``
    * - :attr:`KernelSet.robust`
      - ``k(x̂_i, x̂_j)``
    * - :attr:`KernelSet.cross_twice`
      - ``k(x̂_i, x̂̂_j)``
    * - :attr:`KernelSet.robust_twice`
      - ``k(x̂̂_i, x̂̂_j)``

.. autoclass:: KernelSet
    :members: matrices

.. autoclass:: BoundReport
    :members: to_dict
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict

import numpy as np

#: Names of :class:`KernelSet` matrices, in serialization order
KERNEL_NAMES = ('clean', 'cross', 'robust', 'cross_twice', 'robust_twice')


@dataclass(frozen=True, eq=False)
class KernelSet:
    """
    The five Gram matrices of one weight draw, plus the trade-off ``β`` used to assemble them.

    .. autoattribute:: clean
    .. autoattribute:: cross
    .. autoattribute:: robust
    .. autoattribute:: cross_twice
    .. autoattribute:: robust_twice
    .. autoattribute:: beta
    .. autoattribute:: radius
    .. autoattribute:: provenance
    """

    #: ``K``, symmetric PSD
    clean: np.ndarray
    #: ``K̄_ρ``, generally not symmetric
    cross: np.ndarray
    #: ``K̂_ρ``, symmetric PSD
    robust: np.ndarray
    #: ``K̄_2ρ``, generally not symmetric
    cross_twice: np.ndarray
    #: ``K̂_2ρ``, symmetric PSD
    robust_twice: np.ndarray
    #: Weight of the robust term
    beta: float = 0.5
    #: Attack radius the matrices were built with
    radius: float = 0.0
    #: Where the matrices came from: network spec, seed, attack (strings, for reports)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in KERNEL_NAMES:
            matrix = np.array(getattr(self, name), dtype=np.float64)
            matrix.flags.writeable = False
            object.__setattr__(self, name, matrix)

    def matrices(self) -> Dict[str, np.ndarray]:
        """Name → matrix, in :data:`KERNEL_NAMES` order."""
        return {name: getattr(self, name) for name in KERNEL_NAMES}

    @property
    def size(self) -> int:
        return self.clean.shape[0]

    def __repr__(self):
        return f"KernelSet(N={self.size}, β={self.beta}, ρ={self.radius})"


@dataclass
class BoundReport:
    """
    Terms of the generalization bounds on the expected clean and robust 0-1 losses::

        clean  <= sqrt(L²·yᵀ K_all⁻¹ y / N) + sqrt(log(1/δ) / N)
        robust <= sqrt(L²·yᵀ K̃_all⁻¹ y / N) + sqrt(log(1/δ) / N)

    and their relaxations by ``yᵀ M⁻¹ y <= yᵀy / λ_min(M)``.
    """

    #: ``yᵀ K_all⁻¹ y``
    clean_quadratic: float
    #: ``yᵀ K̃_all⁻¹ y``
    robust_quadratic: float
    #: ``sqrt(L²·yᵀ K_all⁻¹ y / N)``
    clean_bound_main: float
    #: ``sqrt(L²·yᵀ K̃_all⁻¹ y / N)``
    robust_bound_main: float
    lambda_min_clean: float
    lambda_min_robust: float
    #: ``yᵀy / λ_min(K_all)``
    clean_courant: float
    #: ``yᵀy / λ_min(K̃_all)``
    robust_courant: float
    #: ``sqrt(L²·yᵀy / (λ_min(K_all)·N))``
    clean_courant_bound: float
    #: ``sqrt(L²·yᵀy / (λ_min(K̃_all)·N))``
    robust_courant_bound: float
    #: ``sqrt(log(1/δ) / N)``
    confidence: float
    lipschitz: float
    samples: int
    delta: float
    #: Diagonal jitter the factorizations needed (0 if none)
    jitter: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {'version': 1, **asdict(self)}
