"""Keyed, order-independent random streams.

Every stochastic quantity is drawn from a Philox generator keyed on
``(seed, stream, block)``. Per-index draws are produced in fixed-size blocks so
that any range of indices can be regenerated in isolation: splitting a run
into shards gives exactly the same numbers as one monolithic run.
"""

from __future__ import annotations

import numpy as np

BLOCK = 1 << 14

# stream identifiers; keep stable, they are part of the reproducibility contract
STREAM_EMISSION = 1
STREAM_DETECTION = 2
STREAM_DETUNING = 3
STREAM_COUNTS = 4
STREAM_BOOTSTRAP = 5


def keyed_generator(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator keyed on ``seed`` and any number of integer keys."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def uniforms(seed: int, stream: int, start: int, stop: int, width: int) -> np.ndarray:
    """Uniform [0, 1) draws of shape ``(stop - start, width)`` for indices in [start, stop).

    Row ``i`` depends only on ``(seed, stream, i)``.
    """
    if stop <= start:
        return np.empty((0, width))
    first, last = start // BLOCK, (stop - 1) // BLOCK
    parts = [
        keyed_generator(seed, stream, width, b).random((BLOCK, width))
        for b in range(first, last + 1)
    ]
    out = np.concatenate(parts)
    offset = first * BLOCK
    return out[start - offset : stop - offset]


def normals(seed: int, stream: int, start: int, stop: int, width: int) -> np.ndarray:
    """Standard normal draws with the same indexing contract as :func:`uniforms`."""
    if stop <= start:
        return np.empty((0, width))
    first, last = start // BLOCK, (stop - 1) // BLOCK
    parts = [
        keyed_generator(seed, stream, width, b, 1).standard_normal((BLOCK, width))
        for b in range(first, last + 1)
    ]
    out = np.concatenate(parts)
    offset = first * BLOCK
    return out[start - offset : stop - offset]


def uniforms_at(seed: int, stream: int, indices, width: int) -> np.ndarray:
    """Rows of :func:`uniforms` for an arbitrary sorted set of indices.

    Only the blocks that contain requested indices are generated.
    """
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.size, width))
    if not indices.size:
        return out
    blocks = indices // BLOCK
    for b in np.unique(blocks):
        sel = np.flatnonzero(blocks == b)
        draws = keyed_generator(seed, stream, width, int(b)).random((BLOCK, width))
        out[sel] = draws[indices[sel] - b * BLOCK]
    return out
