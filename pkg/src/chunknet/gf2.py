"""Word-packed GF(2) vectors and column-oriented matrices.

A :class:`BinaryVector` stores ``length`` bits in ``ceil(length / 64)``
uint64 words, bit ``j`` at position ``j % 64`` of word ``j // 64``. Bits past
``length`` are always zero, so two vectors are equal iff their words are.

A :class:`BinaryMatrix` is a list of column vectors (packets arrive as
columns). Rank and solve run first-nonzero-pivot Gaussian elimination over
the transposed (one row per column) packed array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .rng import Stream


class DimensionError(ValueError):
    """Operands have incompatible lengths or counts."""


class UnderdeterminedError(ArithmeticError):
    """The system has rank below the number of unknowns."""

    def __init__(self, rank: int, unknowns: int):
        super().__init__(f"underdetermined: rank {rank} < {unknowns}")
        self.rank = rank
        self.unknowns = unknowns


def n_words(nbits: int) -> int:
    return (nbits + 63) // 64


def _tail_mask(nbits: int) -> np.uint64:
    r = nbits % 64
    return np.uint64((1 << r) - 1 if r else (1 << 64) - 1)


@dataclass(frozen=True, eq=False)
class BinaryVector:
    length: int
    words: np.ndarray

    def __post_init__(self):
        if self.length < 1:
            raise DimensionError("vector length must be positive")
        words = np.ascontiguousarray(self.words, dtype=np.uint64).copy()
        if words.shape != (n_words(self.length),):
            raise DimensionError(f"{self.length} bits need {n_words(self.length)} words, got {words.shape}")
        words[-1] &= _tail_mask(self.length)
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def zeros(cls, length: int) -> "BinaryVector":
        return cls(length, np.zeros(n_words(length), dtype=np.uint64))

    @classmethod
    def from_bits(cls, bits: str | Sequence[int]) -> "BinaryVector":
        """Build from a bit string or 0/1 sequence; the first character is bit 0."""
        values = [int(b) for b in bits]
        words = np.zeros(n_words(len(values)), dtype=np.uint64)
        for j, b in enumerate(values):
            if b not in (0, 1):
                raise ValueError(f"bit {j} is {b!r}")
            if b:
                words[j // 64] |= np.uint64(1 << (j % 64))
        return cls(len(values), words)

    @classmethod
    def from_indices(cls, length: int, indices: Iterable[int]) -> "BinaryVector":
        words = np.zeros(n_words(length), dtype=np.uint64)
        for j in indices:
            if not 0 <= j < length:
                raise DimensionError(f"index {j} outside [0, {length})")
            words[j // 64] |= np.uint64(1 << (j % 64))
        return cls(length, words)

    def __getitem__(self, j: int) -> int:
        if not 0 <= j < self.length:
            raise IndexError(j)
        return int(self.words[j // 64] >> np.uint64(j % 64)) & 1

    def __len__(self) -> int:
        return self.length

    def __xor__(self, other: "BinaryVector") -> "BinaryVector":
        if other.length != self.length:
            raise DimensionError(f"length {self.length} vs {other.length}")
        return BinaryVector(self.length, self.words ^ other.words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryVector):
            return NotImplemented
        return self.length == other.length and self.words.tobytes() == other.words.tobytes()

    def __hash__(self) -> int:
        return hash((self.length, self.words.tobytes()))

    def support(self) -> list[int]:
        return [j for j in range(self.length) if self[j]]

    def weight(self) -> int:
        return sum(bin(int(w)).count("1") for w in self.words)

    def to_bits(self) -> str:
        return "".join(str(self[j]) for j in range(self.length))

    def __repr__(self) -> str:
        if self.length <= 64:
            return f"BinaryVector({self.to_bits()!r})"
        return f"BinaryVector(length={self.length}, weight={self.weight()})"


@dataclass(frozen=True)
class BinaryMatrix:
    rows: int
    columns: tuple[BinaryVector, ...]

    def __post_init__(self):
        cols = tuple(self.columns)
        for c in cols:
            if c.length != self.rows:
                raise DimensionError(f"column of length {c.length} in a {self.rows}-row matrix")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_packed(cls, rows: int, packed: np.ndarray) -> "BinaryMatrix":
        """Columns from a (num_columns, ceil(rows/64)) uint64 array."""
        return cls(rows, tuple(BinaryVector(rows, r) for r in np.asarray(packed, dtype=np.uint64)))

    @classmethod
    def from_dense(cls, array) -> "BinaryMatrix":
        """From a rows x columns 0/1 array (the usual mathematical orientation)."""
        a = np.asarray(array, dtype=np.uint8) & 1
        return cls(a.shape[0], tuple(BinaryVector.from_bits(a[:, j]) for j in range(a.shape[1])))

    @property
    def ncols(self) -> int:
        return len(self.columns)

    def packed(self) -> np.ndarray:
        """One row of words per column."""
        out = np.zeros((self.ncols, n_words(self.rows)), dtype=np.uint64)
        for i, c in enumerate(self.columns):
            out[i] = c.words
        return out

    def to_dense(self) -> np.ndarray:
        return np.array([[c[i] for c in self.columns] for i in range(self.rows)], dtype=np.uint8).reshape(
            self.rows, self.ncols
        )

    def with_column(self, column: BinaryVector) -> "BinaryMatrix":
        return BinaryMatrix(self.rows, self.columns + (column,))


def xor_combine(vectors: Sequence[BinaryVector], mask: BinaryVector) -> BinaryVector:
    """XOR of the vectors whose mask bit is set."""
    if len(vectors) == 0:
        raise DimensionError("cannot combine an empty list (length unknown)")
    if mask.length != len(vectors):
        raise DimensionError(f"mask has {mask.length} bits for {len(vectors)} vectors")
    length = vectors[0].length
    acc = np.zeros(n_words(length), dtype=np.uint64)
    for j, v in enumerate(vectors):
        if v.length != length:
            raise DimensionError(f"vector {j} has length {v.length}, expected {length}")
        if mask[j]:
            acc ^= v.words
    return BinaryVector(length, acc)


def random_bernoulli(length: int, rng: Stream) -> BinaryVector:
    """Uniform random vector; consumes exactly ``ceil(length / 64)`` draws.

    Draw ``i`` fills word ``i``; bits past ``length`` of the last draw are dropped.
    """
    if length < 1:
        raise DimensionError("length must be positive")
    return BinaryVector(length, rng.words(n_words(length)))


def rank(m: BinaryMatrix) -> int:
    """GF(2) rank. ``m`` is not modified."""
    if m.ncols == 0:
        return 0
    return int(_kernels.rank_kernel(m.packed(), m.rows))


def packed_rank(rows: np.ndarray, nbits: int) -> int:
    """Rank of the vectors stored as rows of a packed uint64 array."""
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    if rows.shape[0] == 0:
        return 0
    return int(_kernels.rank_kernel(rows, nbits))


def _symbol_words(y) -> np.ndarray:
    arr = np.asarray(y, dtype=np.uint64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError("symbols must be a 1-D or 2-D array of uint64 words")
    return arr


def solve_packed(rows: np.ndarray, nbits: int, symbols: np.ndarray) -> np.ndarray:
    """Solve with packed coefficient rows and a (m, P) symbol-word array."""
    if rows.shape[0] != symbols.shape[0]:
        raise DimensionError(f"{rows.shape[0]} equations but {symbols.shape[0]} symbols")
    aug = np.ascontiguousarray(np.hstack([rows, symbols]), dtype=np.uint64)
    basis = np.zeros((nbits, aug.shape[1]), dtype=np.uint64)
    has = np.zeros(nbits, dtype=np.bool_)
    r = int(_kernels.eliminate(aug, nbits, basis, has)) if aug.shape[0] else 0
    if r < nbits:
        raise UnderdeterminedError(r, nbits)
    return _kernels.back_substitute(basis, has, nbits)


def solve(m: BinaryMatrix, y) -> np.ndarray:
    """Find ``x`` with ``XOR(x[i] for i in support(c_j)) == y[j]`` for every column ``c_j``.

    ``y`` holds one coded symbol per column, either as a 1-D uint64 array
    (symbols up to 64 bits) or as an (ncols, P) array of words. The result
    has the same trailing shape. Raises :class:`UnderdeterminedError` when
    rank(m) < m.rows.
    """
    words = _symbol_words(y)
    if words.shape[0] != m.ncols:
        raise DimensionError(f"{m.ncols} columns but {words.shape[0]} symbols")
    x = solve_packed(m.packed(), m.rows, words) if m.ncols else None
    if x is None:
        raise UnderdeterminedError(0, m.rows)
    return x[:, 0] if np.asarray(y).ndim == 1 else x


def encode(m: BinaryMatrix, x) -> np.ndarray:
    """Coded symbols ``y_j = XOR of x over support(c_j)``; inverse of :func:`solve`."""
    xs = _symbol_words(x)
    if xs.shape[0] != m.rows:
        raise DimensionError(f"{m.rows} unknowns but {xs.shape[0]} symbols")
    y = np.zeros((m.ncols, xs.shape[1]), dtype=np.uint64)
    for j, c in enumerate(m.columns):
        for i in c.support():
            y[j] ^= xs[i]
    return y[:, 0] if np.asarray(x).ndim == 1 else y
