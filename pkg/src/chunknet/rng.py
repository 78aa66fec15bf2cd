"""Deterministic 64-bit random streams.

Every random decision in a simulation (schedule links, chunk choices,
combination masks, message bits) is drawn from a :class:`Stream`. A stream
is a SplitMix64 generator whose state lives in a one-element ``uint64``
array, so the compiled kernels in :mod:`chunknet._kernels` advance exactly
the same state the Python code sees. One call to :meth:`Stream.next` is one
*draw*; draw counts per operation are documented where they are consumed.

Streams for independent trials are keyed by :func:`derive_seed`, a stable
mixing hash, so results never depend on process layout or execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """SplitMix64 output function applied to ``x + GOLDEN``."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _as_u64(part) -> int:
    if isinstance(part, str):
        return int.from_bytes(hashlib.blake2b(part.encode(), digest_size=8).digest(), "little")
    return int(part) & MASK64


def derive_seed(*parts) -> int:
    """Fold integers and strings into one 64-bit seed.

    The fold is order sensitive and platform independent (strings go through
    BLAKE2b, never through Python's salted ``hash``).
    """
    h = 0x6A09E667F3BCC908
    for part in parts:
        h = mix64(h ^ mix64(_as_u64(part)))
    return h


class Stream:
    """A SplitMix64 stream.

    ``Stream(seed)`` and ``Stream(seed, stream_id)`` give reproducible,
    mutually independent sequences; distinct ids under one seed are mixed
    through :func:`derive_seed`.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, stream_id=None):
        start = _as_u64(seed) if stream_id is None else derive_seed(seed, stream_id)
        self.state = np.array([start], dtype=np.uint64)

    def next(self) -> int:
        s = (int(self.state[0]) + GOLDEN) & MASK64
        self.state[0] = s
        z = ((s ^ (s >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` from one draw (multiply-shift on the top 32 bits)."""
        return ((self.next() >> 32) * bound) >> 32

    def words(self, count: int) -> np.ndarray:
        return np.array([self.next() for _ in range(count)], dtype=np.uint64)

    def spawn(self, stream_id) -> "Stream":
        """Child stream keyed by the current state and ``stream_id``; does not advance ``self``."""
        return Stream(int(self.state[0]), stream_id)

    def __repr__(self) -> str:
        return f"Stream(state=0x{int(self.state[0]):016x})"
