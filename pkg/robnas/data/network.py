"""
Networks whose kernels the package computes: their hyperparameters (:class:`NetworkSpec`) and
weights (:class:`WeightSet`).

Families
--------

``residual_fcnn``
    Fully connected residual network of depth ``L``::

        f_1 = σ_1(W_1 x)
        f_l = (1/L)·σ_l(W_l f_{l-1}) + α_{l-1}·f_{l-1}      2 <= l <= L-1
        f   = <w_L, f_{L-1}>

``residual_cnn``
    The same recursion over ``d × p`` feature maps, where ``W_l`` multiplies the patch matrix
    :func:`φ(F) <robnas.algo.netcore.extract_patches>` and the output is the Frobenius inner
    product with the ``m × p`` matrix ``W_L``.

``cell_network``
    Desk-scale instantiation of a :class:`Genotype <robnas.data.cell.Genotype>`: stem 3×3
    convolution, ``cell_count`` stacked cells, global average pooling, linear classifier. See
    :mod:`algo.cellnet <robnas.algo.cellnet>`.

``linear`` and ``two_layer``
    ``f = <w, x>`` and ``f = sqrt(2/m)·<a, σ(W x)>``. They have closed-form (or well known
    wide-limit) kernels, so they serve as oracles.

``NetworkSpec``
---------------

.. autoclass:: NetworkSpec

``WeightSet``
-------------

.. autoclass:: WeightSet
    :members:

Enums
-----

.. autoclass:: Family
.. autoclass:: Activation
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from robnas.algo.cellspace import parse_genotype
from robnas.data.cell import Genotype
from robnas.errors import ValidationError


class Family(str, enum.Enum):
    RESIDUAL_FCNN = 'residual_fcnn'
    RESIDUAL_CNN = 'residual_cnn'
    CELL_NETWORK = 'cell_network'
    LINEAR = 'linear'
    TWO_LAYER = 'two_layer'


class Activation(str, enum.Enum):
    RELU = 'relu'
    LEAKY_RELU = 'leaky_relu'
    SIGMOID = 'sigmoid'
    ERF = 'erf'
    IDENTITY = 'identity'


Shape = Tuple[int, ...]


@dataclass(frozen=True)
class NetworkSpec:
    """
    Architecture hyperparameters. Only the fields relevant to :attr:`family` are used; per-layer
    sequences of length 1 are broadcast to every layer.

    **Common:**

    .. autoattribute:: family
    .. autoattribute:: output_scale

    **Residual networks** (and the ``linear``/``two_layer`` oracles):

    .. autoattribute:: depth
    .. autoattribute:: width
    .. autoattribute:: input_dim
    .. autoattribute:: pixels
    .. autoattribute:: filter_size
    .. autoattribute:: activations
    .. autoattribute:: skip_flags
    .. autoattribute:: leaky_slope

    **Cell network:**

    .. autoattribute:: genotype
    .. autoattribute:: cell_count
    .. autoattribute:: stem_channels
    .. autoattribute:: image_size
    .. autoattribute:: input_channels
    .. autoattribute:: num_classes

    **Derived:**

    .. autoattribute:: branch_scale
    .. automethod:: layer_shapes
    .. automethod:: input_shape

    **Serialization:**

    .. automethod:: to_dict
    .. automethod:: from_dict
    """

    #: Network family
    family: Family = Family.RESIDUAL_FCNN
    #: Number of layers ``L`` (>= 3 for residual networks)
    depth: int = 3
    #: Width ``m`` (channels for the CNN)
    width: int = 64
    #: Input dimension ``d`` (input channels for the CNN)
    input_dim: int = 16
    #: Number of pixels ``p`` (CNN only)
    pixels: int = 1
    #: Odd filter size ``κ`` (CNN only)
    filter_size: int = 1
    #: Activations ``σ_1 … σ_{L-1}``
    activations: Tuple[Activation, ...] = (Activation.RELU,)
    #: Skip flags ``α_1 … α_{L-2}``, each 0 or 1
    skip_flags: Tuple[int, ...] = (1,)
    #: Negative-side slope of ``leaky_relu``
    leaky_slope: float = 0.01
    #: Multiplier of the network output
    output_scale: float = 1.0

    #: Cell of the cell network
    genotype: Optional[Genotype] = None
    #: Number of stacked cells
    cell_count: int = 2
    #: Channels after the stem
    stem_channels: int = 8
    #: Height and width of input images
    image_size: int = 8
    #: Channels of input images
    input_channels: int = 3
    #: Classifier outputs
    num_classes: int = 10

    def __post_init__(self):
        object.__setattr__(self, 'family', Family(self.family))
        activations = tuple(Activation(a) for a in self.activations)
        skip_flags = tuple(int(a) for a in self.skip_flags)

        if self.family in (Family.RESIDUAL_FCNN, Family.RESIDUAL_CNN):
            if self.depth < 3:
                raise ValidationError(f"Residual networks need depth >= 3, got {self.depth}")
            activations = _broadcast(activations, self.depth - 1, 'activations')
            skip_flags = _broadcast(skip_flags, self.depth - 2, 'skip_flags')
            if any(a not in (0, 1) for a in skip_flags):
                raise ValidationError(f"skip_flags must be 0 or 1, got {skip_flags}")
        elif not activations:
            raise ValidationError("At least one activation is needed")

        if self.family == Family.RESIDUAL_CNN and self.filter_size % 2 == 0:
            raise ValidationError(f"filter_size must be odd, got {self.filter_size}")
        if self.family == Family.CELL_NETWORK and self.genotype is None:
            raise ValidationError("cell_network needs a genotype")

        for name in ('width', 'input_dim', 'pixels', 'filter_size', 'cell_count', 'stem_channels',
                     'image_size', 'input_channels', 'num_classes'):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")

        object.__setattr__(self, 'activations', activations)
        object.__setattr__(self, 'skip_flags', skip_flags)

    @property
    def branch_scale(self) -> float:
        """Factor of the residual branch, ``1/L``."""
        return 1.0 / self.depth

    def layer_shapes(self) -> List[Tuple[str, Shape]]:
        """
        Names and shapes of weight arrays, in the flattening order of :meth:`WeightSet.flat`.
        """
        m, d = self.width, self.input_dim
        if self.family == Family.RESIDUAL_FCNN:
            return [('W1', (m, d))] + [(f'W{l}', (m, m)) for l in range(2, self.depth)] + \
                [(f'W{self.depth}', (m,))]
        if self.family == Family.RESIDUAL_CNN:
            k = self.filter_size
            return [('W1', (m, k * d))] + [(f'W{l}', (m, k * m)) for l in range(2, self.depth)] + \
                [(f'W{self.depth}', (m, self.pixels))]
        if self.family == Family.LINEAR:
            return [('w', (d,))]
        if self.family == Family.TWO_LAYER:
            return [('W', (m, d)), ('a', (m,))]

        c = self.stem_channels
        shapes = [('stem', (c, self.input_channels * 9))]
        for cell in range(self.cell_count):
            for edge, op in enumerate(self.genotype.edge_ops):
                if op.is_conv:
                    shapes.append((f'cell{cell}.edge{edge}', (c, c * op.kernel_size ** 2)))
        return shapes + [('classifier', (self.num_classes, c)), ('bias', (self.num_classes,))]

    def input_shape(self) -> Shape:
        """Shape of one input sample."""
        if self.family == Family.RESIDUAL_CNN:
            return (self.input_dim, self.pixels)
        if self.family == Family.CELL_NETWORK:
            return (self.input_channels, self.image_size, self.image_size)
        return (self.input_dim,)

    @property
    def parameter_count(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layer_shapes())

    def __repr__(self):
        if self.family == Family.CELL_NETWORK:
            return (f"NetworkSpec(cell_network {self.genotype!r} cells={self.cell_count} "
                    f"C={self.stem_channels} {self.image_size}x{self.image_size})")
        return (f"NetworkSpec({self.family.value} L={self.depth} m={self.width} d={self.input_dim}"
                f"{f' p={self.pixels} κ={self.filter_size}' if self.family == Family.RESIDUAL_CNN else ''})")

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form (enums as values, genotype as string), as stored in configs and weight files."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['family'] = self.family.value
        data['activations'] = [a.value for a in self.activations]
        data['skip_flags'] = list(self.skip_flags)
        data['genotype'] = None if self.genotype is None else str(self.genotype)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> NetworkSpec:
        """
        Inverse of :meth:`to_dict`. A single activation may be given as a plain string.

        Raises:
            ValidationError: for unknown keys or invalid values
        """
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"Unknown network settings: {', '.join(sorted(unknown))}")
        data = dict(data)
        if isinstance(data.get('genotype'), str):
            data['genotype'] = parse_genotype(data['genotype'])
        for name in ('activations', 'skip_flags'):
            if isinstance(data.get(name), (str, int)):
                data[name] = (data[name],)
            elif name in data:
                data[name] = tuple(data[name])
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Invalid network settings: {e}") from None


def _broadcast(values: tuple, count: int, name: str) -> tuple:
    if len(values) == 1:
        return values * count
    if len(values) != count:
        raise ValidationError(f"{name} needs 1 or {count} values, got {len(values)}")
    return values


@dataclass(frozen=True, eq=False)
class WeightSet:
    """
    Weights of a network, immutable: arrays are read-only and training produces new sets.

    Arrays are checked against :meth:`NetworkSpec.layer_shapes` on construction, the error names
    the offending layer::

        >>> WeightSet(spec, (np.zeros((3, 4)), ...))
        ValidationError: Layer W1: expected shape (64, 16), got (3, 4)

    The flat layout (:meth:`flat`, used for gradients and Jacobians) is layer-major, row-major
    within each layer.
    """

    #: Hyperparameters the weights belong to
    spec: NetworkSpec
    #: One array per layer, in :meth:`NetworkSpec.layer_shapes` order
    arrays: Tuple[np.ndarray, ...]
    #: Seed the set was initialized from (``None`` for trained/derived sets)
    seed: Optional[int] = None
    names: Tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        shapes = self.spec.layer_shapes()
        if len(self.arrays) != len(shapes):
            raise ValidationError(f"Expected {len(shapes)} weight arrays, got {len(self.arrays)}")

        arrays = []
        for (name, shape), array in zip(shapes, self.arrays):
            array = np.array(array, dtype=np.float64)
            if array.shape != shape:
                raise ValidationError(f"Layer {name}: expected shape {shape}, got {array.shape}")
            array.flags.writeable = False
            arrays.append(array)

        object.__setattr__(self, 'arrays', tuple(arrays))
        object.__setattr__(self, 'names', tuple(name for name, _ in shapes))

    def __getitem__(self, key: Union[int, str]) -> np.ndarray:
        if isinstance(key, str):
            if key not in self.names:
                raise KeyError(key)
            key = self.names.index(key)
        return self.arrays[key]

    def __len__(self):
        return len(self.arrays)

    def flat(self) -> np.ndarray:
        """All weights as one vector."""
        return np.concatenate([array.ravel() for array in self.arrays])

    @classmethod
    def from_flat(cls, spec: NetworkSpec, vector: np.ndarray, seed: Optional[int] = None) -> WeightSet:
        """Inverse of :meth:`flat`."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (spec.parameter_count,):
            raise ValidationError(f"Expected flat vector of {spec.parameter_count} weights, got shape {vector.shape}")

        arrays = []
        offset = 0
        for _, shape in spec.layer_shapes():
            size = int(np.prod(shape))
            arrays.append(vector[offset:offset + size].reshape(shape))
            offset += size
        return cls(spec, tuple(arrays), seed)

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> WeightSet:
        return cls(spec, tuple(np.zeros(shape) for _, shape in spec.layer_shapes()))

    def replace(self, arrays: Dict[str, np.ndarray]) -> WeightSet:
        """Copy with some layers (by name) replaced."""
        unknown = set(arrays) - set(self.names)
        if unknown:
            raise ValidationError(f"Unknown layers: {', '.join(sorted(unknown))}")
        return WeightSet(self.spec, tuple(arrays.get(name, array) for name, array in zip(self.names, self.arrays)))

    def __repr__(self):
        return f"WeightSet({self.spec!r}, {self.spec.parameter_count} weights, seed={self.seed})"
