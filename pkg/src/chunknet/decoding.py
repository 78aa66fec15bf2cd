"""Terminal-side decoding.

:func:`decode_global` eliminates the whole ``k x m`` matrix. It succeeds
exactly when the received payload vectors have rank ``k``.

:func:`decode_chunked` only ever eliminates ``alpha``-wide systems. It visits
chunks in index order, substitutes symbols already decoded by other chunks,
and decodes every unknown that the reduced chunk system pins down (a unit
row after full reduction). It repeats until a full pass makes no progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .coding import CodeSpec, TerminalReport
from .gf2 import UnderdeterminedError, n_words, solve_packed


@dataclass(frozen=True)
class DecodeOutcome:
    success: bool
    global_rank: int
    decoded_symbols: frozenset[int]
    message: Optional[np.ndarray] = None
    rounds: int = 0
    values: Optional[np.ndarray] = None  # per-symbol payload words, valid where decoded

    @property
    def n_decoded(self) -> int:
        return len(self.decoded_symbols)


def global_rank(report: TerminalReport) -> int:
    k = report.spec.k
    if report.n_packets == 0:
        return 0
    rows = report.global_rows[:, : n_words(k)]
    return int(_kernels.rank_kernel(np.ascontiguousarray(rows), k))


def decode_global(report: TerminalReport) -> DecodeOutcome:
    """Success iff the received matrix has rank k; payload mode also recovers the message."""
    k = report.spec.k
    r = global_rank(report)
    if r < k:
        return DecodeOutcome(False, r, frozenset())
    message = None
    if report.has_payload:
        kw = n_words(k)
        rows = report.global_rows
        try:
            message = solve_packed(np.ascontiguousarray(rows[:, :kw]), k, np.ascontiguousarray(rows[:, kw:]))
        except UnderdeterminedError:  # pragma: no cover - rank was just checked
            raise
    return DecodeOutcome(True, r, frozenset(range(k)), message, 0, message)


def decode_chunked(report: TerminalReport, spec: Optional[CodeSpec] = None) -> DecodeOutcome:
    """Iterative per-chunk decoding with cross-chunk substitution.

    ``rounds`` counts the passes that decoded at least one symbol. The
    reported ``global_rank`` is that of the full matrix, for comparison.
    """
    spec = report.spec if spec is None else spec
    if spec != report.spec:
        raise ValueError(f"spec {spec} does not match report spec {report.spec}")
    r = global_rank(report)
    if report.n_packets == 0:
        return DecodeOutcome(False, r, frozenset())
    known, values, rounds = _kernels.chunked_decode_kernel(
        report.local, report.chunks, spec.k, spec.q, spec.stride, spec.alpha
    )
    decoded = frozenset(np.flatnonzero(known).tolist())
    success = len(decoded) == spec.k
    message = values if success and report.has_payload else None
    return DecodeOutcome(success, r, decoded, message, int(rounds), values if report.has_payload else None)
