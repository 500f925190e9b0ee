"""Stateless counter-based uniform streams.

Every stream is addressed by a tuple of integers (master seed plus any
sub-indices).  Draw ``i`` of a stream depends only on its address and ``i``,
so splitting a request into pieces, or handing pieces to different workers,
never changes the numbers produced.
"""

from __future__ import annotations

import numpy as np

_BLOCK = 4  # Philox emits 4 x 64-bit words per counter increment


def stream_key(*words: int) -> np.ndarray:
    return np.random.SeedSequence([int(w) for w in words]).generate_state(2, np.uint64)


def uniform_stream(key, start: int, count: int) -> np.ndarray:
    """Doubles in [0, 1) at positions ``start .. start+count-1`` of stream ``key``."""
    if count <= 0:
        return np.empty(0)
    bg = np.random.Philox(key=np.asarray(key, dtype=np.uint64))
    block, skip = divmod(int(start), _BLOCK)
    if block:
        bg.advance(block)
    raw = bg.random_raw(skip + count)[skip:]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def haar_sample(seed: int, n: int, dim: int, start: int = 0) -> np.ndarray:
    """``n`` Haar (uniform) points on T^dim, rows ``start .. start+n-1`` of the stream."""
    key = stream_key(seed, 0x4A4152, dim)
    return uniform_stream(key, start * dim, n * dim).reshape(n, dim)
