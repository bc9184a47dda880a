"""
The module represents points of the cell search space: a 4-node DAG whose 6 edges each carry
one of 5 operators.

.. code-block:: text

    node 0 (cell input) ──► node 1 ──► node 2 ──► node 3 (cell output)
          └────────────────────────────┘
    edges, in the fixed order used everywhere:  0→1, 0→2, 1→2, 0→3, 1→3, 2→3

The interoperable text form of a genotype lists, for every non-input node, its incoming edges
with the source node index::

    |nor_conv_3x3~0|+|nor_conv_3x3~0|skip_connect~1|+|none~0|avg_pool_3x3~1|nor_conv_1x1~2|

See :mod:`algo.cellspace <robnas.algo.cellspace>` for parsing, enumeration and
canonicalization.

``Operator``
------------

.. autoclass:: Operator
    :members:

``Genotype``
------------

.. autoclass:: Genotype

``CanonicalCell``
-----------------

.. autoclass:: CanonicalCell
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

#: Edges of the cell DAG as ``(source, target)`` pairs; the order defines :attr:`Genotype.edge_ops`
EDGES: Tuple[Tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3))

#: Number of nodes in a cell, including input and output
NODES = 4


class Operator(enum.IntEnum):
    """
    Operator on a cell edge. The integer value is the stable total order used for enumeration
    and every tie-break (so the lexicographically first genotype is "all ``conv3x3``").
    """

    CONV3X3 = 0
    CONV1X1 = 1
    ZEROIZE = 2
    SKIP_CONNECT = 3
    AVG_POOL = 4

    @property
    def label(self) -> str:
        """Short name (``conv3x3``, ``zeroize``, ...), also used in canonical forms."""
        return _LABELS[self]

    @property
    def wire_name(self) -> str:
        """Name in the genotype string format (``nor_conv_3x3``, ``none``, ...)."""
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire_name(cls, name: str) -> Operator:
        """
        Raises:
            KeyError: for unknown names
        """
        return _BY_WIRE_NAME[name]

    @classmethod
    def from_label(cls, label: str) -> Operator:
        """
        Raises:
            KeyError: for unknown labels
        """
        return _BY_LABEL[label]

    @property
    def is_conv(self) -> bool:
        return self in (Operator.CONV3X3, Operator.CONV1X1)

    @property
    def kernel_size(self) -> int:
        """Spatial size of the convolution (0 for operators without weights)."""
        return {Operator.CONV3X3: 3, Operator.CONV1X1: 1}.get(self, 0)


_LABELS = {
    Operator.CONV3X3: 'conv3x3',
    Operator.CONV1X1: 'conv1x1',
    Operator.ZEROIZE: 'zeroize',
    Operator.SKIP_CONNECT: 'skip_connect',
    Operator.AVG_POOL: 'avg_pool',
}

_WIRE_NAMES = {
    Operator.CONV3X3: 'nor_conv_3x3',
    Operator.CONV1X1: 'nor_conv_1x1',
    Operator.ZEROIZE: 'none',
    Operator.SKIP_CONNECT: 'skip_connect',
    Operator.AVG_POOL: 'avg_pool_3x3',
}

_BY_WIRE_NAME = {name: op for op, name in _WIRE_NAMES.items()}
_BY_LABEL = {label: op for op, label in _LABELS.items()}


@dataclass(frozen=True, order=True)
class Genotype:
    """
    Assignment of an :class:`Operator` to each of the 6 edges from :data:`EDGES`.

    Genotypes are immutable, hashable and ordered lexicographically by their edge operators,
    which is also the enumeration order of :func:`enumerate_genotypes
    <robnas.algo.cellspace.enumerate_genotypes>`::

        >>> g = Genotype.from_index(0)
        >>> g
        Genotype(conv3x3 conv3x3 conv3x3 conv3x3 conv3x3 conv3x3)
        >>> g.op(0, 3)
        <Operator.CONV3X3: 0>
        >>> print(g.replace(5, Operator.SKIP_CONNECT))
        |nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|nor_conv_3x3~0|nor_conv_3x3~1|skip_connect~2|

    .. autoattribute:: edge_ops
    .. autoattribute:: index
    .. automethod:: from_index
    .. automethod:: op
    .. automethod:: replace
    """

    #: Operators, indexed like :data:`EDGES`
    edge_ops: Tuple[Operator, ...]

    def __post_init__(self):
        if len(self.edge_ops) != len(EDGES):
            raise ValueError(f"Genotype needs {len(EDGES)} edge operators, got {len(self.edge_ops)}")
        # Normalize ints (e.g. from numpy) to Operator, keeping the dataclass frozen
        object.__setattr__(self, 'edge_ops', tuple(Operator(op) for op in self.edge_ops))

    @classmethod
    def from_index(cls, index: int) -> Genotype:
        """
        Genotype number ``index`` in lexicographic order (base-5 digits, first edge most
        significant).
        """
        if not 0 <= index < len(Operator) ** len(EDGES):
            raise ValueError(f"Genotype index {index} out of range")
        digits = []
        for _ in EDGES:
            index, digit = divmod(index, len(Operator))
            digits.append(digit)
        return cls(tuple(reversed(digits)))

    @property
    def index(self) -> int:
        """Position of the genotype in lexicographic enumeration."""
        result = 0
        for op in self.edge_ops:
            result = result * len(Operator) + int(op)
        return result

    def op(self, source: int, target: int) -> Operator:
        """Operator on the edge ``source → target``."""
        return self.edge_ops[EDGES.index((source, target))]

    def replace(self, edge: int, op: Operator) -> Genotype:
        """Copy of the genotype with edge number ``edge`` carrying ``op``."""
        ops = list(self.edge_ops)
        ops[edge] = op
        return Genotype(tuple(ops))

    def __str__(self):
        groups = []
        for target in range(1, NODES):
            tokens = [f"{self.op(source, target).wire_name}~{source}" for source in range(target)]
            groups.append('|' + '|'.join(tokens) + '|')
        return '+'.join(groups)

    def __repr__(self):
        return f"Genotype({' '.join(op.label for op in self.edge_ops)})"


@dataclass(frozen=True)
class CanonicalCell:
    """
    Isomorphism class of genotypes: all genotypes that compute the same function once zeroize
    edges, dead nodes and skip connections are resolved.

    .. autoattribute:: canonical_form
    .. autoattribute:: class_size
    .. autoattribute:: representative
    """

    #: Serialized reduced form; equal forms mean isomorphic genotypes
    canonical_form: bytes
    #: How many genotypes of the full space fall into this class (0 when the cell was
    #: canonicalized on its own, without the census)
    class_size: int = 0
    #: First member of the class in enumeration order (``None`` when unknown)
    representative: Genotype = None

    @property
    def hex(self) -> str:
        """Form as hex string, as exported by the command line."""
        return self.canonical_form.hex()

    @property
    def is_empty(self) -> bool:
        """The cell output does not depend on its input."""
        return b'0' not in self.canonical_form

    def __repr__(self):
        return f"CanonicalCell({self.canonical_form.decode('ascii')} ×{self.class_size})"
