"""Counter-based random streams addressed by purpose and indices.

Every random draw in the simulator comes from a stream identified by a key
``(seed, tag code, *indices)``, for example ``(seed, BATCH, t, i, s)`` for the
mini-batch of client ``i`` at local step ``s`` of round ``t``. Streams do not
share state, so results do not depend on the order in which clients run.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from ._helpers import _enum_to_int
from .enums import STREAM_TAG_BY_INT, StreamTag
from .exceptions import InvalidSampleSizeError

StreamKey = tuple[int, ...]

_SEED_MASK = (1 << 63) - 1


def stream_key(seed: int, tag: StreamTag, *indices: int) -> StreamKey:
    """Build the key of the stream for *tag* at the given indices."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if any(index < 0 for index in indices):
        raise ValueError("stream indices must be non-negative")
    return (int(seed), _enum_to_int(tag, STREAM_TAG_BY_INT), *(int(i) for i in indices))


def derive_seed(seed: int, tag: StreamTag, *indices: int) -> int:
    """Hash a key down to a fresh non-negative master seed (per-trial seeds)."""
    state = np.random.SeedSequence(list(stream_key(seed, tag, *indices))).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0]) & _SEED_MASK


class CounterStream:
    """A deterministic random stream backed by numpy's Philox generator.

    Parameters
    ----------
    key:
        The stream key; equal keys give equal draws on every platform.

    Example
    -------
    >>> from fedsubspace.enums import StreamTag
    >>> stream = counter_stream(stream_key(0, StreamTag.HEADS))
    >>> stream.normal((2, 3)).shape
    (2, 3)
    """

    def __init__(self, key: StreamKey) -> None:
        self.key = key
        bit_generator = np.random.Philox(np.random.SeedSequence(list(key)))
        self._generator = np.random.Generator(bit_generator)

    def uniform(self, n: int) -> NDArray[np.float64]:
        """Draw *n* uniforms on ``[0, 1)``."""
        return self._generator.random(n)

    def normal(self, shape: int | tuple[int, ...]) -> NDArray[np.float64]:
        """Standard normals of the given shape by the Box-Muller transform."""
        dims = (shape,) if isinstance(shape, int) else tuple(shape)
        size = math.prod(dims)
        pairs = (size + 1) // 2
        u1 = 1.0 - self._generator.random(pairs)
        u2 = self._generator.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        values = np.empty(2 * pairs)
        values[0::2] = radius * np.cos(angle)
        values[1::2] = radius * np.sin(angle)
        return values[:size].reshape(dims)

    def partial_shuffle(self, n: int, m: int) -> list[int]:
        """First *m* entries of a Fisher-Yates shuffle of ``range(n)``."""
        if not 0 <= m <= n:
            raise InvalidSampleSizeError(f"cannot draw {m} items from {n}")
        items = list(range(n))
        draws = self.uniform(m)
        for j in range(m):
            r = min(j + int(draws[j] * (n - j)), n - 1)
            items[j], items[r] = items[r], items[j]
        return items[:m]


def counter_stream(key: StreamKey) -> CounterStream:
    """Open the stream addressed by *key*."""
    return CounterStream(key)
