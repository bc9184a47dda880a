"""
Forward and backward passes of the cell network: a genotype instantiated as a small
convolutional classifier.

.. code-block:: text

    image (C_in × H × W)
      └─► stem: 3×3 conv, C channels
            └─► cell × cell_count
                  └─► global average pool
                        └─► linear classifier (+ bias) ─► logits

Inside a cell, node ``j`` is the *mean* of its ``j`` incoming edge outputs, so the all-skip cell
is the identity and stacking cells keeps activations of the same order. Edge operators:

* ``conv3x3`` / ``conv1x1``: ReLU, then convolution (stride 1, "same" zero padding, no bias);
* ``avg_pool``: 3×3 mean pooling, stride 1, zero padding 1, always dividing by 9;
* ``skip_connect``: identity;
* ``zeroize``: zero.

There is no normalization layer. Every function takes a batch ``(B, C, H, W)``; weight
gradients are summed over the batch.

Convolutions use the im2col layout: for a ``k × k`` filter, row ``c·k² + u·k + v`` of the column
matrix is channel ``c`` shifted by ``(u, v)``.

.. autofunction:: forward_cell_network
.. autofunction:: backward_cell_network
.. autofunction:: im2col
.. autofunction:: col2im
.. autofunction:: avg_pool
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from robnas.data.cell import EDGES, NODES, Operator
from robnas.data.network import Family, WeightSet
from robnas.errors import ValidationError


def im2col(images: np.ndarray, size: int) -> np.ndarray:
    """
    ``(B, C, H, W)`` → ``(B, C·size², H·W)`` with zero padding ``size // 2``.
    """
    batch, channels, height, width = images.shape
    pad = size // 2
    padded = np.pad(images, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    columns = np.stack(
        [padded[:, :, u:u + height, v:v + width] for u in range(size) for v in range(size)],
        axis=2
    )
    return columns.reshape(batch, channels * size * size, height * width)


def col2im(columns: np.ndarray, shape: Tuple[int, ...], size: int) -> np.ndarray:
    """
    Adjoint of :func:`im2col`: sums every column entry back onto the pixel it was copied from.
    """
    batch, channels, height, width = shape
    pad = size // 2
    columns = columns.reshape(batch, channels, size * size, height, width)
    padded = np.zeros((batch, channels, height + 2 * pad, width + 2 * pad))
    for u in range(size):
        for v in range(size):
            padded[:, :, u:u + height, v:v + width] += columns[:, :, u * size + v]
    return padded[:, :, pad:pad + height, pad:pad + width]


def avg_pool(images: np.ndarray) -> np.ndarray:
    """
    3×3 mean pooling with zero padding (border pixels are still divided by 9). The operator is
    symmetric, so it is its own adjoint.
    """
    batch, channels, height, width = images.shape
    columns = im2col(images, 3).reshape(batch, channels, 9, height * width)
    return columns.mean(axis=2).reshape(images.shape)


def _conv(weights: np.ndarray, images: np.ndarray, size: int) -> Tuple[np.ndarray, np.ndarray]:
    batch, _, height, width = images.shape
    columns = im2col(images, size)
    return (weights @ columns).reshape(batch, weights.shape[0], height, width), columns


@dataclass
class _EdgeCache:
    pre_activation: np.ndarray
    columns: np.ndarray


@dataclass
class CellNetworkCache:
    """Intermediate values of :func:`forward_cell_network` needed by the backward pass."""

    images: np.ndarray
    stem_columns: np.ndarray
    #: Per cell: node values
    nodes: List[List[np.ndarray]]
    #: Per cell: conv edge index → cached input
    edges: List[Dict[int, _EdgeCache]]
    features: np.ndarray


def _check(weights: WeightSet, images: np.ndarray) -> np.ndarray:
    spec = weights.spec
    if spec.family != Family.CELL_NETWORK:
        raise ValidationError(f"Expected a cell_network, got {spec.family.value}")
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    if images.shape[1:] != spec.input_shape():
        raise ValidationError(f"Input: expected images of shape {spec.input_shape()}, got {images.shape[1:]}")
    return images


def forward_cell_network(images: np.ndarray, weights: WeightSet) -> Tuple[np.ndarray, CellNetworkCache]:
    """
    Class logits ``(B, num_classes)`` for a batch of images (a single ``(C, H, W)`` image is
    treated as a batch of one).
    """

    images = _check(weights, images)
    spec = weights.spec
    genotype = spec.genotype

    state, stem_columns = _conv(weights['stem'], images, 3)

    all_nodes = []
    all_edges = []
    for cell in range(spec.cell_count):
        nodes = [state]
        edges = {}
        for target in range(1, NODES):
            total = np.zeros_like(state)
            for source in range(target):
                edge = EDGES.index((source, target))
                op = genotype.edge_ops[edge]
                value = nodes[source]
                if op == Operator.SKIP_CONNECT:
                    total += value
                elif op == Operator.AVG_POOL:
                    total += avg_pool(value)
                elif op.is_conv:
                    output, columns = _conv(weights[f'cell{cell}.edge{edge}'], np.maximum(value, 0.0), op.kernel_size)
                    edges[edge] = _EdgeCache(value, columns)
                    total += output
            nodes.append(total / target)
        all_nodes.append(nodes)
        all_edges.append(edges)
        state = nodes[-1]

    features = state.mean(axis=(2, 3))
    logits = (features @ weights['classifier'].T + weights['bias']) * spec.output_scale

    return logits, CellNetworkCache(images, stem_columns, all_nodes, all_edges, features)


def backward_cell_network(weights: WeightSet, cache: CellNetworkCache,
                          grad_logits: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Reverse pass.

    Args:
        weights: Weights the forward pass used
        cache: What the forward pass returned
        grad_logits: Gradient of the scalar being differentiated with respect to the logits,
            ``(B, num_classes)``

    Returns:
        gradients of every weight array (in :meth:`NetworkSpec.layer_shapes
        <robnas.data.network.NetworkSpec.layer_shapes>` order) and the gradient with respect to
        the input images
    """

    spec = weights.spec
    genotype = spec.genotype
    grads = {name: np.zeros_like(weights[name]) for name in weights.names}

    grad_logits = np.atleast_2d(grad_logits) * spec.output_scale
    grads['classifier'] = grad_logits.T @ cache.features
    grads['bias'] = grad_logits.sum(axis=0)

    state_shape = cache.nodes[-1][-1].shape
    height, width = state_shape[2:]
    grad_state = np.broadcast_to(
        (grad_logits @ weights['classifier'])[:, :, None, None] / (height * width), state_shape
    ).copy()

    for cell in reversed(range(spec.cell_count)):
        node_grads = [np.zeros(state_shape) for _ in range(NODES)]
        node_grads[-1] = grad_state
        for target in reversed(range(1, NODES)):
            incoming = node_grads[target] / target
            for source in range(target):
                edge = EDGES.index((source, target))
                op = genotype.edge_ops[edge]
                if op == Operator.SKIP_CONNECT:
                    node_grads[source] += incoming
                elif op == Operator.AVG_POOL:
                    node_grads[source] += avg_pool(incoming)
                elif op.is_conv:
                    name = f'cell{cell}.edge{edge}'
                    edge_cache = cache.edges[cell][edge]
                    flat = incoming.reshape(incoming.shape[0], incoming.shape[1], -1)
                    grads[name] += np.einsum('bop,bip->oi', flat, edge_cache.columns)
                    grad_relu = col2im(weights[name].T @ flat, state_shape, op.kernel_size)
                    node_grads[source] += grad_relu * (edge_cache.pre_activation > 0)
        grad_state = node_grads[0]

    flat = grad_state.reshape(grad_state.shape[0], grad_state.shape[1], -1)
    grads['stem'] = np.einsum('bop,bip->oi', flat, cache.stem_columns)
    grad_images = col2im(weights['stem'].T @ flat, cache.images.shape, 3)

    return [grads[name] for name in weights.names], grad_images
