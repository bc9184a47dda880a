"""
Binary container for arrays: initialized or trained weights, kernel matrices, sample inputs.

Layout (all little-endian):

.. code-block:: text

    b'RNAS'                 magic, 4 bytes
    version                 uint16, currently 1
    header length           uint32
    header                  UTF-8 JSON: {"kind": ..., "meta": {...}, "arrays": [{"name", "shape", "dtype"}, ...]}
    array data              each array in header order, C-ordered, float64 (or int64 for labels)

``kind`` is one of ``weights``, ``kernels``, ``samples``; ``meta`` is whatever the kind needs to
rebuild its object (network spec and seed for weights, ``β`` and radius for kernels).

.. autofunction:: write_container
.. autofunction:: read_container

Typed helpers
-------------

.. autofunction:: save_weights
.. autofunction:: load_weights
.. autofunction:: save_kernels
.. autofunction:: load_kernels
.. autofunction:: save_samples
.. autofunction:: load_samples
"""

import json
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from robnas.data.kernels import KERNEL_NAMES, KernelSet
from robnas.data.network import NetworkSpec, WeightSet
from robnas.data.training import LabeledSet
from robnas.errors import NotFoundError, ParseError, ValidationError

MAGIC = b'RNAS'
VERSION = 1
PREAMBLE = struct.Struct('<4sHI')
DTYPES = ('<f8', '<i8')

PathLike = Union[str, Path]


def write_container(stream: BinaryIO, kind: str, arrays: Mapping[str, np.ndarray],
                    meta: Optional[Dict[str, Any]] = None) -> None:
    """
    Writes named arrays (order preserved) with JSON-serializable ``meta``.
    """

    prepared = []
    for name, array in arrays.items():
        array = np.asarray(array)
        dtype = '<i8' if np.issubdtype(array.dtype, np.integer) else '<f8'
        prepared.append((name, np.ascontiguousarray(array, dtype=dtype)))

    header = json.dumps({
        'kind': kind,
        'meta': meta or {},
        'arrays': [{'name': name, 'shape': list(array.shape), 'dtype': array.dtype.str} for name, array in prepared],
    }).encode('utf-8')

    stream.write(PREAMBLE.pack(MAGIC, VERSION, len(header)))
    stream.write(header)
    for _, array in prepared:
        stream.write(array.tobytes())


def read_container(stream: BinaryIO) -> Tuple[str, Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Returns:
        ``(kind, meta, arrays)``

    Raises:
        ParseError: on wrong magic, unsupported version, broken header or truncated data
    """

    preamble = stream.read(PREAMBLE.size)
    if len(preamble) < PREAMBLE.size:
        raise ParseError("Truncated container: no header")
    magic, version, header_size = PREAMBLE.unpack(preamble)
    if magic != MAGIC:
        raise ParseError(f"Not a robnas container (magic {magic!r})")
    if version != VERSION:
        raise ParseError(f"Unsupported container version {version}, expected {VERSION}")

    try:
        header = json.loads(stream.read(header_size).decode('utf-8'))
        kind = header['kind']
        meta = header['meta']
        descriptions = header['arrays']
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ParseError(f"Broken container header: {e}") from None

    arrays = {}
    for description in descriptions:
        name, shape, dtype = description['name'], tuple(description['shape']), description['dtype']
        if dtype not in DTYPES:
            raise ParseError(f"Array {name}: unsupported dtype {dtype}")
        size = int(np.prod(shape, dtype=np.int64)) * 8
        data = stream.read(size)
        if len(data) < size:
            raise ParseError(f"Truncated container: array {name} needs {size} bytes, got {len(data)}")
        arrays[name] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()

    return kind, meta, arrays


def _write(path: PathLike, kind: str, arrays, meta) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('wb') as stream:
        write_container(stream, kind, arrays, meta)


def _read(path: PathLike, expected_kind: str) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise NotFoundError(f"Container not found: {path}")
    with path.open('rb') as stream:
        kind, meta, arrays = read_container(stream)
    if kind != expected_kind:
        raise ValidationError(f"{path} holds {kind}, expected {expected_kind}")
    return meta, arrays


def _require(arrays: Dict[str, np.ndarray], *names: str) -> None:
    missing = [name for name in names if name not in arrays]
    if missing:
        raise ParseError(f"Container misses arrays: {', '.join(missing)}")


# Weights
# -------

def save_weights(path: PathLike, weights: WeightSet) -> None:
    _write(path, 'weights', dict(zip(weights.names, weights.arrays)),
           {'spec': weights.spec.to_dict(), 'seed': weights.seed})


def load_weights(path: PathLike) -> WeightSet:
    meta, arrays = _read(path, 'weights')
    spec = NetworkSpec.from_dict(meta['spec'])
    names = [name for name, _ in spec.layer_shapes()]
    _require(arrays, *names)
    return WeightSet(spec, tuple(arrays[name] for name in names), meta.get('seed'))


# Kernels
# -------

def save_kernels(path: PathLike, kernels: KernelSet, labels: np.ndarray) -> None:
    """Kernel matrices together with the labels the bounds need."""
    _write(path, 'kernels', {**kernels.matrices(), 'labels': np.asarray(labels, dtype=np.float64)},
           {'beta': kernels.beta, 'radius': kernels.radius, 'provenance': kernels.provenance})


def load_kernels(path: PathLike) -> Tuple[KernelSet, np.ndarray]:
    meta, arrays = _read(path, 'kernels')
    _require(arrays, *KERNEL_NAMES, 'labels')
    kernels = KernelSet(**{name: arrays[name] for name in KERNEL_NAMES},
                        beta=meta.get('beta', 0.5), radius=meta.get('radius', 0.0),
                        provenance=meta.get('provenance', {}))
    return kernels, arrays['labels']


# Samples
# -------

def save_samples(path: PathLike, samples: LabeledSet) -> None:
    _write(path, 'samples', {'inputs': samples.inputs, 'labels': samples.labels}, {})


def load_samples(path: PathLike) -> LabeledSet:
    _, arrays = _read(path, 'samples')
    _require(arrays, 'inputs', 'labels')
    return LabeledSet(arrays['inputs'], arrays['labels'])
