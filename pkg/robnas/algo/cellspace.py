"""
Operations on the cell search space: enumeration, text format, canonicalization and the 1-edit
neighborhood used by the searchers.

Canonicalization
----------------

Two genotypes are isomorphic when they compute the same function. The canonical form is
obtained by evaluating the cell *symbolically*: node 0 is the expression ``0``, and every other
node is the sorted ``+``-join of the terms its incoming edges contribute:

* a ``zeroize`` edge, or an edge from a node that is exactly ``#``, contributes ``#`` (zero);
* a ``skip_connect`` edge contributes the source expression itself (the edge is contracted);
* any other edge contributes ``(source)@label``.

The expression of node 3 is the form. Sorting the terms makes parallel edges an
order-insensitive multiset, contraction of skips merges the endpoints, and a node that only
feeds zeros upward never shows up in the output expression, so dead nodes disappear. Over the
whole space this gives exactly 6466 classes::

    >>> len(canonical_classes())
    6466
    >>> canonicalize(parse_genotype('|nor_conv_3x3~0|+|none~0|none~1|+|none~0|none~1|none~2|'))
    CanonicalCell(#+#+# ×225)

A form without ``0`` means the output does not depend on the input (:attr:`CanonicalCell.is_empty
<robnas.data.cell.CanonicalCell.is_empty>`).

.. autofunction:: enumerate_genotypes
.. autofunction:: parse_genotype
.. autofunction:: format_genotype
.. autofunction:: canonical_form
.. autofunction:: canonicalize
.. autofunction:: canonical_classes
.. autofunction:: class_members
.. autofunction:: neighbors
.. autofunction:: mutate
.. autofunction:: zeroize_count
"""

from __future__ import annotations

import functools
import re
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from robnas.data.cell import EDGES, NODES, CanonicalCell, Genotype, Operator
from robnas.errors import ParseError

#: Size of the full search space, ``5 ** 6``
SPACE_SIZE = len(Operator) ** len(EDGES)

#: Number of isomorphism classes the census of the full space finds
CLASS_COUNT = 6466

ZERO = '#'
INPUT = '0'

TOKEN_RE = re.compile(r'([^|~+]*)~(\d+)')


@functools.lru_cache(maxsize=None)
def enumerate_genotypes() -> Tuple[Genotype, ...]:
    """
    All 15625 genotypes in lexicographic edge-operator order (first is "all ``conv3x3``").
    """
    return tuple(Genotype.from_index(index) for index in range(SPACE_SIZE))


def parse_genotype(text: str) -> Genotype:
    """
    Parses the genotype string format::

        |op~0|+|op~0|op~1|+|op~0|op~1|op~2|

    with ``op`` one of ``nor_conv_3x3``, ``nor_conv_1x1``, ``none``, ``skip_connect``,
    ``avg_pool_3x3``.

    Raises:
        ParseError: with :attr:`token <robnas.errors.ParseError.token>` and ``position`` of the
            first thing that doesn't fit
    """

    text = text.strip()
    groups = text.split('+')
    if len(groups) != NODES - 1:
        raise ParseError(f"Expected {NODES - 1} '+'-separated node groups, got {len(groups)}: {text!r}",
                         token=text, position=0)

    ops: Dict[Tuple[int, int], Operator] = {}
    offset = 0
    for target, group in enumerate(groups, start=1):
        if len(group) < 2 or not group.startswith('|') or not group.endswith('|'):
            raise ParseError(f"Node group {group!r} should be enclosed in '|'", token=group, position=offset)

        position = offset + 1
        tokens = group[1:-1].split('|')
        if len(tokens) != target:
            raise ParseError(f"Node {target} needs {target} incoming edges, got {len(tokens)}",
                             token=group, position=offset)

        for source, token in enumerate(tokens):
            match = TOKEN_RE.fullmatch(token)
            if not match:
                raise ParseError(f"Malformed edge token {token!r}", token=token, position=position)
            name, source_str = match.groups()
            try:
                op = Operator.from_wire_name(name)
            except KeyError:
                raise ParseError(f"Unknown operator {name!r} at position {position}",
                                 token=name, position=position) from None
            if int(source_str) != source:
                raise ParseError(f"Edge {token!r} should come from node {source}",
                                 token=token, position=position)
            ops[(source, target)] = op
            position += len(token) + 1

        offset += len(group) + 1

    return Genotype(tuple(ops[edge] for edge in EDGES))


def format_genotype(genotype: Genotype) -> str:
    """
    Inverse of :func:`parse_genotype`.
    """
    return str(genotype)


def canonical_form(genotype: Genotype, edge_order: Optional[Sequence[int]] = None) -> bytes:
    """
    Serialized reduced form of the genotype (see module docs).

    Args:
        genotype: Genotype to reduce
        edge_order: Order (permutation of edge indices) in which edges are visited. Any order
            produces the same form; exposed to check exactly that.
    """

    incoming: Dict[int, List[int]] = defaultdict(list)
    for edge in (range(len(EDGES)) if edge_order is None else edge_order):
        incoming[EDGES[edge][1]].append(edge)

    expressions = {0: INPUT}

    def expression(node: int) -> str:
        if node not in expressions:
            terms = []
            for edge in incoming[node]:
                op = genotype.edge_ops[edge]
                source = expression(EDGES[edge][0])
                if op == Operator.ZEROIZE or source == ZERO:
                    terms.append(ZERO)
                elif op == Operator.SKIP_CONNECT:
                    terms.append(source)
                else:
                    terms.append(f'({source})@{op.label}')
            expressions[node] = '+'.join(sorted(terms))
        return expressions[node]

    return expression(NODES - 1).encode('ascii')


@functools.lru_cache(maxsize=None)
def _census() -> Tuple[Dict[bytes, CanonicalCell], Dict[bytes, Tuple[Genotype, ...]]]:
    members: Dict[bytes, List[Genotype]] = {}
    for genotype in enumerate_genotypes():
        members.setdefault(canonical_form(genotype), []).append(genotype)

    cells = {
        form: CanonicalCell(canonical_form=form, class_size=len(group), representative=group[0])
        for form, group in members.items()
    }
    return cells, {form: tuple(group) for form, group in members.items()}


def canonicalize(genotype: Genotype) -> CanonicalCell:
    """
    Isomorphism class of the genotype, with its size and representative (first member in
    enumeration order). The first call builds the census of the whole space.
    """
    cells, _ = _census()
    return cells[canonical_form(genotype)]


def canonical_classes() -> Tuple[CanonicalCell, ...]:
    """
    All isomorphism classes, ordered by representative.
    """
    cells, _ = _census()
    return tuple(cells.values())


def class_members(genotype: Genotype) -> Tuple[Genotype, ...]:
    """
    All genotypes isomorphic to ``genotype`` (including itself), in enumeration order.
    """
    _, members = _census()
    return members[canonical_form(genotype)]


def neighbors(genotype: Genotype) -> List[Genotype]:
    """
    The 24 genotypes differing from ``genotype`` in exactly one edge, ordered by edge index and
    then by operator.
    """
    return [
        genotype.replace(edge, op)
        for edge, current in enumerate(genotype.edge_ops)
        for op in Operator
        if op != current
    ]


def mutate(genotype: Genotype, rng: np.random.Generator) -> Genotype:
    """
    Random 1-edit neighbor: a uniform edge gets a uniform choice among the 4 other operators.
    """
    edge = int(rng.integers(len(EDGES)))
    alternatives = [op for op in Operator if op != genotype.edge_ops[edge]]
    return genotype.replace(edge, alternatives[int(rng.integers(len(alternatives)))])


def zeroize_count(genotype: Genotype) -> int:
    return sum(1 for op in genotype.edge_ops if op == Operator.ZEROIZE)
