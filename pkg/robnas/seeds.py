"""
Named random substreams.

One global seed drives a whole experiment; each stage (``"weights"``, ``"samples"``,
``"search"``, ...) draws from its own :class:`numpy.random.Generator`, so adding a stage never
changes the numbers another stage sees.

.. autofunction:: substream
.. autofunction:: stage_seed
"""

import zlib

import numpy as np


def stage_seed(seed: int, name: str) -> int:
    """
    Integer seed of the named stage (stable across Python runs, unlike ``hash()``).
    """
    sequence = np.random.SeedSequence([seed, zlib.crc32(name.encode('utf-8'))])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def substream(seed: int, name: str) -> np.random.Generator:
    """
    Generator for the stage ``name`` of an experiment seeded with ``seed``.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode('utf-8'))]))
