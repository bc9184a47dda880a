"""
Forward passes and exact reverse-mode gradients of the network families from
:mod:`data.network <robnas.data.network>`.

All arithmetic is float64. Every family is implemented as a pair of private functions: forward,
returning the output together with a trace of intermediate values, and backward, consuming the
trace and the gradient of the output. The public functions below are combinations of those:

.. code-block:: python

    W = init_weights(spec, seed=0)
    forward(W, x)                 # scalar network output
    gradient_wrt_weights(W, x)    # ∇_W f(x, W), flat (see WeightSet.flat)
    gradient_wrt_input(W, x, y)   # ∇_x ℓ(y·f(x, W)), powers the attacks
    jacobian(W, inputs)           # one gradient row per input, for kernels

For the cell network (a classifier), the scalar output is the sum of its logits and losses are
softmax cross-entropy over integer labels; for all other families the output is a scalar and the
loss is logistic over labels ``±1``.

Initialization
--------------

.. autofunction:: init_weights

Residual networks
-----------------

.. autofunction:: forward_fcnn
.. autofunction:: forward_cnn
.. autofunction:: extract_patches
.. autofunction:: fold_patches
.. autofunction:: conv_direct

Any family
----------

.. autofunction:: forward
.. autofunction:: predict
.. autofunction:: forward_cell_network
.. autofunction:: gradient_wrt_weights
.. autofunction:: gradient_wrt_input
.. autofunction:: jacobian
.. autofunction:: loss_value
.. autofunction:: loss_and_gradient

Activations
-----------

.. autofunction:: activation_function
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from robnas.algo import cellnet
from robnas.algo.losses import logistic_derivative, logistic_loss, softmax_cross_entropy
from robnas.data.network import Activation, Family, NetworkSpec, WeightSet
from robnas.errors import ValidationError

NORM_TOLERANCE = 1e-10


# Activations
# -----------

def _activate(kind: Activation, z: np.ndarray, slope: float) -> np.ndarray:
    if kind == Activation.RELU:
        return np.maximum(z, 0.0)
    if kind == Activation.LEAKY_RELU:
        return np.where(z > 0, z, slope * z)
    if kind == Activation.SIGMOID:
        return special.expit(z)
    if kind == Activation.ERF:
        return special.erf(z)
    return np.array(z, dtype=np.float64)


def _activate_derivative(kind: Activation, z: np.ndarray, slope: float) -> np.ndarray:
    if kind == Activation.RELU:
        return (z > 0).astype(np.float64)
    if kind == Activation.LEAKY_RELU:
        return np.where(z > 0, 1.0, slope)
    if kind == Activation.SIGMOID:
        s = special.expit(z)
        return s * (1.0 - s)
    if kind == Activation.ERF:
        return 2.0 / np.sqrt(np.pi) * np.exp(-z * z)
    return np.ones_like(z, dtype=np.float64)


def activation_function(kind: Activation, slope: float = 0.01) -> Callable[[np.ndarray], np.ndarray]:
    """
    Activation as a plain vectorized callable (e.g. for Hermite expansion).
    """
    kind = Activation(kind)
    return lambda z: _activate(kind, np.asarray(z, dtype=np.float64), slope)


# Initialization
# --------------

def _init_scales(spec: NetworkSpec) -> List[float]:
    if spec.family in (Family.RESIDUAL_FCNN, Family.RESIDUAL_CNN):
        return [1.0 / np.sqrt(spec.width)] * spec.depth
    if spec.family == Family.LINEAR:
        return [1.0 / np.sqrt(spec.input_dim)]
    if spec.family == Family.TWO_LAYER:
        return [1.0, 1.0]

    # Cell network: fan-in scaling, zero bias
    return [1.0 / np.sqrt(shape[1]) if len(shape) == 2 else 0.0 for _, shape in spec.layer_shapes()]


def init_weights(spec: NetworkSpec, seed: int) -> WeightSet:
    """
    Gaussian initialization, deterministic given ``seed``.

    * residual FCNN/CNN: every entry ``N(0, 1/m)``;
    * ``linear``: ``N(0, 1/d)``;
    * ``two_layer``: standard normal (the ``sqrt(2/m)`` factor is part of the network);
    * cell network: ``N(0, 1/fan_in)`` for convolutions and the classifier, zero bias.
    """
    rng = np.random.default_rng(seed)
    arrays = tuple(
        rng.normal(0.0, scale, size=shape) if scale else np.zeros(shape)
        for (_, shape), scale in zip(spec.layer_shapes(), _init_scales(spec))
    )
    return WeightSet(spec, arrays, seed)


# Patches
# -------

def extract_patches(X: np.ndarray, size: int) -> np.ndarray:
    """
    Patch matrix ``φ(X)`` of a ``d × p`` feature map: column ``j`` stacks, channel by channel,
    ``X[v, j - (κ-1)/2 … j + (κ-1)/2]`` with zeros outside the map. Row ``v·κ + u`` holds
    ``X[v, j + u - (κ-1)/2]``.

    >>> extract_patches(np.array([[1., 2., 3.]]), 3)
    array([[0., 1., 2.],
           [1., 2., 3.],
           [2., 3., 0.]])
    """
    if size % 2 == 0:
        raise ValidationError(f"Patch size must be odd, got {size}")
    X = np.asarray(X, dtype=np.float64)
    channels, pixels = X.shape
    half = (size - 1) // 2
    padded = np.pad(X, ((0, 0), (half, half)))
    patches = np.stack([padded[:, u:u + pixels] for u in range(size)], axis=1)
    return patches.reshape(channels * size, pixels)


def fold_patches(patches: np.ndarray, size: int) -> np.ndarray:
    """
    Adjoint of :func:`extract_patches`: ``<φ(X), P> = <X, fold(P)>``.
    """
    rows, pixels = patches.shape
    channels = rows // size
    half = (size - 1) // 2
    patches = patches.reshape(channels, size, pixels)
    padded = np.zeros((channels, pixels + 2 * half))
    for u in range(size):
        padded[:, u:u + pixels] += patches[:, u]
    return padded[:, half:half + pixels]


def conv_direct(weights: np.ndarray, X: np.ndarray, size: int) -> np.ndarray:
    """
    Convolution by its sum formula, without patches:
    ``out[i, j] = Σ_v Σ_u W[i, v·κ + u] · X[v, j + u - (κ-1)/2]`` (zero outside the map).
    Slow; meant as an independent check of :func:`extract_patches`.
    """
    channels, pixels = X.shape
    half = (size - 1) // 2
    kernel = np.asarray(weights).reshape(weights.shape[0], channels, size)
    out = np.zeros((weights.shape[0], pixels))
    for i in range(weights.shape[0]):
        for j in range(pixels):
            total = 0.0
            for v in range(channels):
                for u in range(size):
                    c = j + u - half
                    if 0 <= c < pixels:
                        total += kernel[i, v, u] * X[v, c]
            out[i, j] = total
    return out


# Traces
# ------

@dataclass
class _Trace:
    input: np.ndarray
    #: Pre-activations h_1 … h_{L-1}
    pre: List[np.ndarray] = field(default_factory=list)
    #: Layer outputs f_1 … f_{L-1}
    post: List[np.ndarray] = field(default_factory=list)
    #: Patch matrices of the layer inputs (CNN only)
    patches: List[np.ndarray] = field(default_factory=list)
    extra: object = None


def _check_input(spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != spec.input_shape():
        raise ValidationError(f"Input: expected shape {spec.input_shape()}, got {x.shape}")
    return x


def _check_unit(x: np.ndarray):
    norm = np.linalg.norm(x)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ValidationError(f"Input: expected unit norm, got {norm!r} (see adversary.normalize_input)")


def _forward_residual(W: WeightSet, x: np.ndarray) -> Tuple[float, _Trace]:
    spec = W.spec
    depth, slope = spec.depth, spec.leaky_slope
    convolutional = spec.family == Family.RESIDUAL_CNN
    trace = _Trace(x)

    value = x
    for layer in range(1, depth):
        if convolutional:
            layer_input = extract_patches(value, spec.filter_size)
            trace.patches.append(layer_input)
        else:
            layer_input = value
        h = W.arrays[layer - 1] @ layer_input
        activated = _activate(spec.activations[layer - 1], h, slope)
        if layer == 1:
            value = activated
        else:
            value = spec.branch_scale * activated + spec.skip_flags[layer - 2] * value
        trace.pre.append(h)
        trace.post.append(value)

    output = spec.output_scale * float(np.sum(W.arrays[-1] * value))
    return output, trace


def _backward_residual(W: WeightSet, trace: _Trace, grad_output: float) -> Tuple[List[np.ndarray], np.ndarray]:
    spec = W.spec
    depth, slope = spec.depth, spec.leaky_slope
    convolutional = spec.family == Family.RESIDUAL_CNN
    grads: List[Optional[np.ndarray]] = [None] * depth

    grad_output = grad_output * spec.output_scale
    grads[-1] = grad_output * trace.post[-1]
    g = grad_output * W.arrays[-1]

    for layer in range(depth - 1, 0, -1):
        derivative = _activate_derivative(spec.activations[layer - 1], trace.pre[layer - 1], slope)
        if layer == 1:
            delta = g * derivative
            layer_input = trace.patches[0] if convolutional else trace.input
        else:
            delta = g * spec.branch_scale * derivative
            layer_input = trace.patches[layer - 1] if convolutional else trace.post[layer - 2]

        if convolutional:
            grads[layer - 1] = delta @ layer_input.T
            back = fold_patches(W.arrays[layer - 1].T @ delta, spec.filter_size)
        else:
            grads[layer - 1] = np.outer(delta, layer_input)
            back = W.arrays[layer - 1].T @ delta

        if layer == 1:
            g = back
        else:
            g = back + spec.skip_flags[layer - 2] * g

    return grads, g


def _forward_linear(W: WeightSet, x: np.ndarray) -> Tuple[float, _Trace]:
    return W.spec.output_scale * float(W.arrays[0] @ x), _Trace(x)


def _backward_linear(W: WeightSet, trace: _Trace, grad_output: float) -> Tuple[List[np.ndarray], np.ndarray]:
    scale = grad_output * W.spec.output_scale
    return [scale * trace.input], scale * W.arrays[0]


def _two_layer_factor(spec: NetworkSpec) -> float:
    return spec.output_scale * np.sqrt(2.0 / spec.width)


def _forward_two_layer(W: WeightSet, x: np.ndarray) -> Tuple[float, _Trace]:
    spec = W.spec
    h = W['W'] @ x
    activated = _activate(spec.activations[0], h, spec.leaky_slope)
    return _two_layer_factor(spec) * float(W['a'] @ activated), _Trace(x, [h], [activated])


def _backward_two_layer(W: WeightSet, trace: _Trace, grad_output: float) -> Tuple[List[np.ndarray], np.ndarray]:
    spec = W.spec
    scale = grad_output * _two_layer_factor(spec)
    h, activated = trace.pre[0], trace.post[0]
    delta = scale * W['a'] * _activate_derivative(spec.activations[0], h, spec.leaky_slope)
    return [np.outer(delta, trace.input), scale * activated], W['W'].T @ delta


_FORWARD = {
    Family.RESIDUAL_FCNN: _forward_residual,
    Family.RESIDUAL_CNN: _forward_residual,
    Family.LINEAR: _forward_linear,
    Family.TWO_LAYER: _forward_two_layer,
}

_BACKWARD = {
    Family.RESIDUAL_FCNN: _backward_residual,
    Family.RESIDUAL_CNN: _backward_residual,
    Family.LINEAR: _backward_linear,
    Family.TWO_LAYER: _backward_two_layer,
}


# Public API
# ----------

def forward_fcnn(x: np.ndarray, W: WeightSet, *, check_norm: bool = True) -> Tuple[float, List[np.ndarray]]:
    """
    Residual FCNN output and layer outputs ``f_1 … f_{L-1}``.

    Raises:
        ValidationError: wrong family, input shape, or (with ``check_norm``) non-unit input
    """
    if W.spec.family != Family.RESIDUAL_FCNN:
        raise ValidationError(f"Expected a residual_fcnn, got {W.spec.family.value}")
    x = _check_input(W.spec, x)
    if check_norm:
        _check_unit(x)
    output, trace = _forward_residual(W, x)
    return output, trace.post


def forward_cnn(X: np.ndarray, W: WeightSet, *, check_norm: bool = True) -> Tuple[float, List[np.ndarray]]:
    """
    Residual CNN output and feature maps ``F_1 … F_{L-1}``, each ``m × p``.

    Raises:
        ValidationError: wrong family, input shape, or (with ``check_norm``) input with
            Frobenius norm other than 1
    """
    if W.spec.family != Family.RESIDUAL_CNN:
        raise ValidationError(f"Expected a residual_cnn, got {W.spec.family.value}")
    X = _check_input(W.spec, X)
    if check_norm:
        _check_unit(X)
    output, trace = _forward_residual(W, X)
    return output, trace.post


def forward_cell_network(images: np.ndarray, W: WeightSet) -> np.ndarray:
    """
    Class logits of the cell network, ``(B, num_classes)``. See :mod:`algo.cellnet
    <robnas.algo.cellnet>`.
    """
    logits, _ = cellnet.forward_cell_network(images, W)
    return logits


def forward(W: WeightSet, x: np.ndarray) -> float:
    """
    Scalar output of any family for one input (the sum of logits for the cell network). Input
    norm is not checked.
    """
    if W.spec.family == Family.CELL_NETWORK:
        return float(forward_cell_network(x, W).sum())
    x = _check_input(W.spec, x)
    output, _ = _FORWARD[W.spec.family](W, x)
    return output


def predict(W: WeightSet, inputs: Sequence[np.ndarray]) -> np.ndarray:
    """
    Outputs for many inputs: a vector of scalars, or a ``(N, num_classes)`` logit matrix for the
    cell network.
    """
    if W.spec.family == Family.CELL_NETWORK:
        return forward_cell_network(np.asarray(inputs), W)
    return np.array([forward(W, x) for x in inputs])


def _gradients(W: WeightSet, x: np.ndarray, grad_output) -> Tuple[List[np.ndarray], np.ndarray]:
    if W.spec.family == Family.CELL_NETWORK:
        _, cache = cellnet.forward_cell_network(x, W)
        return cellnet.backward_cell_network(W, cache, grad_output)
    x = _check_input(W.spec, x)
    _, trace = _FORWARD[W.spec.family](W, x)
    return _BACKWARD[W.spec.family](W, trace, grad_output)


def gradient_wrt_weights(W: WeightSet, x: np.ndarray) -> np.ndarray:
    """
    ``∇_W f(x, W)`` as a flat vector, laid out like :meth:`WeightSet.flat
    <robnas.data.network.WeightSet.flat>`.
    """
    if W.spec.family == Family.CELL_NETWORK:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ValidationError(f"Input: expected one image, got shape {x.shape}")
        grads, _ = _gradients(W, x, np.ones((1, W.spec.num_classes)))
    else:
        grads, _ = _gradients(W, x, 1.0)
    return np.concatenate([g.ravel() for g in grads])


def jacobian(W: WeightSet, inputs: Sequence[np.ndarray]) -> np.ndarray:
    """
    ``N × P`` matrix whose rows are :func:`gradient_wrt_weights` of each input.
    """
    return np.stack([gradient_wrt_weights(W, x) for x in inputs])


def gradient_wrt_input(W: WeightSet, x: np.ndarray, y,
                       loss_derivative: Callable = logistic_derivative) -> np.ndarray:
    """
    Gradient of the loss with respect to the input.

    For scalar networks this is ``∇_x ℓ(y·f(x, W)) = y·ℓ'(y·f)·∇_x f`` with ``ℓ'`` given by
    ``loss_derivative`` (logistic by default). For the cell network it is the gradient of the
    cross-entropy of each image against its label; ``x`` may be one image or a batch, with ``y``
    an int or an int array.
    """
    if W.spec.family == Family.CELL_NETWORK:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 3
        batch = x[None] if single else x
        labels = np.atleast_1d(y)
        logits, cache = cellnet.forward_cell_network(batch, W)
        _, grad_logits = softmax_cross_entropy(logits, labels)
        # Per-image gradients: undo the batch mean
        _, grad_input = cellnet.backward_cell_network(W, cache, grad_logits * len(labels))
        return grad_input[0] if single else grad_input

    x = _check_input(W.spec, x)
    output, trace = _FORWARD[W.spec.family](W, x)
    _, grad_input = _BACKWARD[W.spec.family](W, trace, y * float(loss_derivative(y * output)))
    return grad_input


def loss_value(W: WeightSet, x: np.ndarray, y) -> float:
    """
    ``ℓ(y·f(x, W))`` (logistic), or the cross-entropy for the cell network (mean over a batch).
    """
    if W.spec.family == Family.CELL_NETWORK:
        x = np.asarray(x, dtype=np.float64)
        loss, _ = softmax_cross_entropy(forward_cell_network(x, W), np.atleast_1d(y))
        return loss
    return float(logistic_loss(y * forward(W, x)))


def loss_and_gradient(W: WeightSet, x: np.ndarray, y) -> Tuple[float, np.ndarray]:
    """
    Loss value and its flat gradient with respect to the weights.

    For the cell network ``x`` may be a batch; loss and gradient are then batch means.
    """
    if W.spec.family == Family.CELL_NETWORK:
        logits, cache = cellnet.forward_cell_network(x, W)
        loss, grad_logits = softmax_cross_entropy(logits, np.atleast_1d(y))
        grads, _ = cellnet.backward_cell_network(W, cache, grad_logits)
    else:
        x = _check_input(W.spec, x)
        output, trace = _FORWARD[W.spec.family](W, x)
        loss = float(logistic_loss(y * output))
        grads, _ = _BACKWARD[W.spec.family](W, trace, y * float(logistic_derivative(y * output)))
    return loss, np.concatenate([g.ravel() for g in grads])
