"""Dense, chunked and overlapped chunked codes, and one transfer over a schedule.

The message has ``k`` symbols split into ``q`` chunks. Chunk ``w`` covers
the ``alpha = tau * k/q`` symbols starting at ``w * k/q``, wrapping around
the end of the message, so contiguous chunks share ``gamma = alpha - k/q``
symbols and every symbol lies in exactly ``tau`` chunks. ``tau = 1`` gives
disjoint chunks; ``q = 1`` gives the dense code.

Packets carry aperture-local coefficients (``alpha`` bits) plus the chunk
index; the length-``k`` view is built only at the terminal.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence

import numpy as np

from . import _kernels
from .gf2 import BinaryMatrix, BinaryVector, DimensionError, n_words, random_bernoulli, xor_combine
from .rng import Stream
from .schedule import Schedule


class SpecError(ValueError):
    pass


class DegenerateSpecWarning(UserWarning):
    """Every chunk spans the whole message; the code behaves like a dense code."""


class Kind(str, enum.Enum):
    DENSE = "dense"
    CHUNKED = "chunked"
    OVERLAPPED = "overlapped"


Policy = Literal["uniform-all", "uniform-nonempty"]
Mode = Literal["rank", "payload"]
POLICIES = ("uniform-all", "uniform-nonempty")


@dataclass(frozen=True)
class CodeSpec:
    kind: Kind
    k: int
    q: int = 1
    tau: int = 1
    degenerate: bool = field(default=False, compare=False)

    @property
    def stride(self) -> int:
        return self.k // self.q

    @property
    def alpha(self) -> int:
        return self.tau * self.stride

    @property
    def gamma(self) -> int:
        return self.alpha - self.stride

    @property
    def label(self) -> str:
        if self.kind is Kind.DENSE:
            return "DC"
        if self.kind is Kind.CHUNKED:
            return f"CC-q{self.q}"
        return f"OCC-q{self.q}-t{self.tau}"

    def __str__(self) -> str:
        return f"{self.label}(k={self.k}, alpha={self.alpha}, gamma={self.gamma})"


def make_code_spec(kind: Kind | str, k: int, q: int = 1, tau: int = 1) -> CodeSpec:
    """Validate parameters and derive stride, aperture and overlap.

    ``tau == q > 1`` is accepted with a :class:`DegenerateSpecWarning`.
    """
    try:
        kind = Kind(kind)
    except ValueError:
        raise SpecError(f"unknown code kind {kind!r}") from None
    if k < 1 or q < 1 or tau < 1:
        raise SpecError(f"k, q and tau must be positive (k={k}, q={q}, tau={tau})")
    if k % q:
        raise SpecError(f"q={q} does not divide k={k}")
    if kind is Kind.DENSE and (q != 1 or tau != 1):
        raise SpecError("a dense code has q = 1 and tau = 1")
    if kind is Kind.CHUNKED and tau != 1:
        raise SpecError("chunked codes do not overlap (tau must be 1)")
    if tau > q:
        raise SpecError(f"tau={tau} > q={q}: aperture {tau * (k // q)} exceeds k={k}")
    degenerate = kind is Kind.OVERLAPPED and q > 1 and tau == q
    if degenerate:
        warnings.warn(
            f"tau = q = {q}: every chunk is the whole message", DegenerateSpecWarning, stacklevel=2
        )
    return CodeSpec(kind, k, q, tau, degenerate)


def chunk_support(spec: CodeSpec, w: int) -> list[int]:
    """Symbol indices of chunk ``w``, in local order (wrapping past ``k - 1``)."""
    if not 0 <= w < spec.q:
        raise IndexError(f"chunk {w} outside [0, {spec.q})")
    base = w * spec.stride
    return [(base + j) % spec.k for j in range(spec.alpha)]


@dataclass(frozen=True)
class Packet:
    chunk: int
    coeffs: BinaryVector
    info: Optional[np.ndarray] = None

    def global_vector(self, spec: CodeSpec) -> BinaryVector:
        support = chunk_support(spec, self.chunk)
        return BinaryVector.from_indices(spec.k, (support[j] for j in self.coeffs.support()))


class NodeState:
    """Per-chunk packet buffers of one node.

    The source's buffers are virtual: chunk ``w`` holds the unit vectors of
    its aperture (with the true symbols when a message is given).
    """

    def __init__(self, spec: CodeSpec, role: str, message: Optional[np.ndarray] = None):
        if role not in ("source", "relay", "terminal"):
            raise ValueError(f"unknown role {role!r}")
        self.spec = spec
        self.role = role
        self.message = None if message is None else _message_words(message, spec.k)
        self.buffers: list[list[Packet]] = [[] for _ in range(spec.q)]

    def receive(self, packet: Packet) -> None:
        if self.role == "source":
            raise RuntimeError("the source does not receive packets")
        self.buffers[packet.chunk].append(packet)

    def buffer(self, w: int) -> list[Packet]:
        if self.role != "source":
            return self.buffers[w]
        out = []
        for j, sym in enumerate(chunk_support(self.spec, w)):
            info = None if self.message is None else self.message[sym].copy()
            out.append(Packet(w, BinaryVector.from_indices(self.spec.alpha, [j]), info))
        return out

    def nonempty_chunks(self) -> list[int]:
        if self.role == "source":
            return list(range(self.spec.q))
        return [w for w, b in enumerate(self.buffers) if b]


def _message_words(message, k: int) -> np.ndarray:
    arr = np.asarray(message, dtype=np.uint64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != k:
        raise DimensionError(f"message must hold k={k} symbols, got shape {np.shape(message)}")
    return np.ascontiguousarray(arr)


def emit(state: NodeState, spec: CodeSpec, policy: Policy, rng: Stream) -> Optional[Packet]:
    """One transmission from ``state``: pick a chunk, send a random combination.

    Draws: one for the chunk choice, then ``ceil(alpha/64)`` at the source or
    ``ceil(B/64)`` at a relay whose chosen buffer holds ``B`` packets. A relay
    whose chosen buffer is empty returns ``None`` (the slot is wasted).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if state.role == "source" or policy == "uniform-all":
        w = rng.below(spec.q)
    else:
        candidates = state.nonempty_chunks()
        u = rng.below(max(len(candidates), 1))
        if not candidates:
            return None
        w = candidates[u]
    if state.role == "source":
        coeffs = random_bernoulli(spec.alpha, rng)
        info = None
        if state.message is not None:
            info = np.zeros(state.message.shape[1], dtype=np.uint64)
            support = chunk_support(spec, w)
            for j in coeffs.support():
                info ^= state.message[support[j]]
        return Packet(w, coeffs, info)
    buf = state.buffer(w)
    if not buf:
        return None
    mask = random_bernoulli(len(buf), rng)
    coeffs = xor_combine([p.coeffs for p in buf], mask)
    info = None
    if buf[0].info is not None:
        info = np.zeros_like(buf[0].info)
        for j, p in enumerate(buf):
            if mask[j]:
                info ^= p.info
    return Packet(w, coeffs, info)


class TerminalReport:
    """Packets received by the terminal, in arrival order.

    Stored packed: ``local`` has one row per packet with ``ceil(alpha/64)``
    coefficient words followed by the payload words (none in rank mode).
    """

    def __init__(self, spec: CodeSpec, local: np.ndarray, chunks: np.ndarray, payload_words: int = 0,
                 link_transmissions: Optional[int] = None):
        self.spec = spec
        self.local = np.ascontiguousarray(local, dtype=np.uint64)
        self.chunks = np.ascontiguousarray(chunks, dtype=np.int32)
        self.payload_words = payload_words
        self.link_transmissions = len(self.chunks) if link_transmissions is None else link_transmissions

    @property
    def n_packets(self) -> int:
        return int(self.chunks.size)

    @property
    def has_payload(self) -> bool:
        return self.payload_words > 0

    @property
    def wasted_slots(self) -> int:
        return self.link_transmissions - self.n_packets

    @cached_property
    def global_rows(self) -> np.ndarray:
        """Length-``k`` payload vectors, one packed row per packet (payload words appended)."""
        spec = self.spec
        if self.n_packets == 0:
            return np.zeros((0, n_words(spec.k) + self.payload_words), dtype=np.uint64)
        return _kernels.to_global_kernel(self.local, self.chunks, spec.k, spec.stride, spec.alpha)

    @property
    def packets(self) -> list[Packet]:
        ncoef = n_words(self.spec.alpha)
        out = []
        for row, w in zip(self.local, self.chunks.tolist()):
            info = row[ncoef:].copy() if self.has_payload else None
            out.append(Packet(w, BinaryVector(self.spec.alpha, row[:ncoef]), info))
        return out

    def matrix(self) -> BinaryMatrix:
        """The k x m matrix whose columns are the received payload vectors."""
        kw = n_words(self.spec.k)
        return BinaryMatrix.from_packed(self.spec.k, self.global_rows[:, :kw])

    def symbols(self) -> np.ndarray:
        if not self.has_payload:
            raise ValueError("rank-only report carries no coded symbols")
        return self.global_rows[:, n_words(self.spec.k):]

    def chunk_matrix(self, w: int) -> BinaryMatrix:
        """Columns of ω-packets only, in aperture-local coordinates."""
        ncoef = n_words(self.spec.alpha)
        return BinaryMatrix.from_packed(self.spec.alpha, self.local[self.chunks == w, :ncoef])

    def truncated(self, count: int) -> "TerminalReport":
        """Report of the first ``count`` packets."""
        return TerminalReport(self.spec, self.local[:count], self.chunks[:count], self.payload_words)

    def __repr__(self) -> str:
        return f"TerminalReport({self.spec.label}, packets={self.n_packets})"


def _report_from_packets(spec: CodeSpec, packets: Sequence[Packet], payload_words: int, slots: int) -> TerminalReport:
    ncoef = n_words(spec.alpha)
    local = np.zeros((len(packets), ncoef + payload_words), dtype=np.uint64)
    for r, p in enumerate(packets):
        local[r, :ncoef] = p.coeffs.words
        if payload_words:
            local[r, ncoef:] = p.info
    chunks = np.array([p.chunk for p in packets], dtype=np.int32)
    return TerminalReport(spec, local, chunks, payload_words, slots)


def simulate(
    spec: CodeSpec,
    schedule: Schedule,
    rng: Stream,
    mode: Mode = "rank",
    message=None,
    policy: Policy = "uniform-all",
    backend: Literal["compiled", "python"] = "compiled",
) -> TerminalReport:
    """Replay ``schedule`` in time order; node ``v_{i-1}`` emits for each link-``i`` transmission.

    Both backends consume ``rng`` identically and return identical reports.
    ``mode="payload"`` needs a message of ``k`` symbols (1-D uint64, or
    (k, P) words) and propagates coded symbols with the coefficients.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if mode == "payload":
        if message is None:
            raise ValueError("payload mode needs a message")
        msg = _message_words(message, spec.k)
    elif mode == "rank":
        msg = np.zeros((spec.k, 0), dtype=np.uint64)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    l = schedule.length
    slots = int(np.count_nonzero(schedule.links == l))

    if backend == "python":
        nodes = [NodeState(spec, "source", msg if mode == "payload" else None)]
        nodes += [NodeState(spec, "relay") for _ in range(l - 1)]
        nodes.append(NodeState(spec, "terminal"))
        arrivals = []
        for link, _time in schedule:
            packet = emit(nodes[link - 1], spec, policy, rng)
            if packet is not None:
                nodes[link].receive(packet)
                if link == l:
                    arrivals.append(packet)
        return _report_from_packets(spec, arrivals, msg.shape[1], slots)
    if backend != "compiled":
        raise ValueError(f"unknown backend {backend!r}")

    if len(schedule) == 0:
        return _report_from_packets(spec, [], msg.shape[1], 0)
    vec, chunk = _kernels.simulate_kernel(
        schedule.links, l, spec.k, spec.q, spec.stride, spec.alpha,
        policy == "uniform-nonempty", rng.state, msg,
    )
    keep = (schedule.links == l) & (chunk >= 0)
    return TerminalReport(spec, vec[keep], chunk[keep], msg.shape[1], slots)
