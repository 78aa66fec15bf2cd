"""Closed-form capacity bounds and asymptotic-condition diagnostics.

All logarithms are base :data:`LOG_BASE` (2 by default). Each bound comes
back as a :class:`BoundResult` whose ``n_min`` is the left-to-right sum of
its named terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LOG_BASE = 2.0


def _log(x: float, base: float | None = None) -> float:
    return math.log(x) / math.log(LOG_BASE if base is None else base)


def _check(k: int, l: int, q: int, eps: float) -> None:
    if min(k, l, q) < 1:
        raise ValueError("k, l and q must be positive integers")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def eps_from_exponent(k: int, c: float) -> float:
    """Failure probability ``1 / k**c``."""
    if c <= 0:
        raise ValueError("c must be positive")
    return float(k) ** (-c)


@dataclass(frozen=True)
class BoundResult:
    name: str
    terms: dict[str, float]
    conditions: list[tuple[str, float]] = field(default_factory=list)
    notes: tuple[str, ...] = ()

    @property
    def n_min(self) -> float:
        total = 0.0
        for value in self.terms.values():
            total += value
        return total

    @property
    def overhead(self) -> float:
        return self.n_min - self.terms["k"]


def dense_bound(k: int, l: int, eps: float, base: float | None = None) -> BoundResult:
    """Dense code on a line of length ``l``: k + l log(kl/eps) + log(1/eps) + l + 1."""
    _check(k, l, 1, eps)
    return BoundResult(
        "dense",
        {
            "k": float(k),
            "l*log(kl/eps)": l * _log(k * l / eps, base),
            "log(1/eps)": _log(1 / eps, base),
            "l": float(l),
            "1": 1.0,
        },
    )


def cc_bound(k: int, l: int, q: int, eps: float, base: float | None = None) -> BoundResult:
    """Chunked code: k + ql log(kl/eps) + q log(1/eps) + q log q + q."""
    _check(k, l, q, eps)
    _divides(q, k)
    return BoundResult(
        "chunked",
        {
            "k": float(k),
            "q*l*log(kl/eps)": q * l * _log(k * l / eps, base),
            "q*log(1/eps)": q * _log(1 / eps, base),
            "q*log(q)": q * _log(q, base),
            "q": float(q),
        },
        conditions=[("l^4 q^2 log(kl/eps) / k", condition_chunk_count(k, l, q, eps, base))],
    )


def occ_bound(k: int, l: int, q: int, eps: float, base: float | None = None) -> BoundResult:
    """Overlapped chunks with overlap >= sqrt(k): k + ql log(kl/eps) + ql + log(1/eps) + 1."""
    _check(k, l, q, eps)
    _divides(q, k)
    return BoundResult(
        "overlapped",
        {
            "k": float(k),
            "q*l*log(kl/eps)": q * l * _log(k * l / eps, base),
            "q*l": float(q * l),
            "log(1/eps)": _log(1 / eps, base),
            "1": 1.0,
        },
        conditions=[("l^4 q^2 log(kl/eps) / k", condition_chunk_count(k, l, q, eps, base))],
        notes=("requires overlap gamma >= sqrt(k)",),
    )


def occ_small_overlap_bound(k: int, l: int, q: int, eps: float, base: float | None = None) -> BoundResult:
    """Overlap below sqrt(k): k + ql log(kl/eps) + kappa, kappa at its upper bound.

    kappa <= q log(1/eps) + q log q + q; tight without overlap, looser as tau grows.
    """
    _check(k, l, q, eps)
    _divides(q, k)
    kappa = q * _log(1 / eps, base) + q * _log(q, base) + q
    return BoundResult(
        "overlapped-small",
        {
            "k": float(k),
            "q*l*log(kl/eps)": q * l * _log(k * l / eps, base),
            "kappa_upper": kappa,
        },
        conditions=[("l^4 q^2 log(kl/eps) / k", condition_chunk_count(k, l, q, eps, base))],
        notes=("kappa is an upper bound: tight for tau = 1, looser as tau increases",),
    )


def erasure_bounds(kind: str, k: int, q: int, eps: float, base: float | None = None) -> BoundResult:
    """Single erasure channel (no relays): dense k + log(1/eps); chunked adds q log(1/eps) + q log q."""
    _check(k, 1, q, eps)
    if kind == "dense":
        return BoundResult("erasure-dense", {"k": float(k), "log(1/eps)": _log(1 / eps, base)})
    if kind == "chunked":
        _divides(q, k)
        return BoundResult(
            "erasure-chunked",
            {"k": float(k), "q*log(1/eps)": q * _log(1 / eps, base), "q*log(q)": q * _log(q, base)},
            conditions=[("q^2 log(n/eps) / n", condition_single_link(k, q, eps, base))],
        )
    raise ValueError(f"kind must be 'dense' or 'chunked', got {kind!r}")


def flow_after_loss(n: int, l: int, q: int, eps: float, constant: float = 1.0,
                      base: float | None = None) -> float:
    """Indicative per-chunk flow after lost transmissions.

    (1 - C ((l^4 q^2 / n) log(l n / eps))^(1/4)) * n/q. The constant C is not
    known; the value is only indicative and goes negative when the
    asymptotic regime is far away.
    """
    _check(n, l, q, eps)
    loss = constant * ((l**4 * q**2 / n) * _log(l * n / eps, base)) ** 0.25
    return (1.0 - loss) * (n / q)


def dense_columns_per_chunk(n: int, l: int, q: int, eps: float, base: float | None = None) -> float:
    """n/q - l (log(n/q) + log(1/eps) + log l + 1); diagnostic only."""
    _check(n, l, q, eps)
    return n / q - l * (_log(n / q, base) + _log(1 / eps, base) + _log(l, base) + 1)


def condition_line_flow(n: int, l: int, q: int, eps: float, base: float | None = None) -> float:
    return l**4 * q**2 * _log(l * n / eps, base) / n


def condition_single_link(n: int, q: int, eps: float, base: float | None = None) -> float:
    return q**2 * _log(n / eps, base) / n


def condition_chunk_count(k: int, l: int, q: int, eps: float, base: float | None = None) -> float:
    return l**4 * q**2 * _log(k * l / eps, base) / k


def condition_aperture(k: int, l: int, q: int, tau: int, alpha: int, eps: float, base: float | None = None) -> float:
    return tau * l**4 * q * _log(k * l / eps, base) / alpha


def condition_diagnostics(k: int, n: int, l: int, q: int, tau: int, alpha: int, eps: float,
                          base: float | None = None) -> list[tuple[str, float]]:
    """Left-hand side over right-hand side of each asymptotic hypothesis.

    A ratio far below 1 means the hypothesis is plausibly respected at this
    scale; above 1 it is violated.
    """
    _check(k, l, q, eps)
    return [
        ("l^4 q^2 log(ln/eps) / n", condition_line_flow(n, l, q, eps, base)),
        ("q^2 log(n/eps) / n", condition_single_link(n, q, eps, base)),
        ("l^4 q^2 log(kl/eps) / k", condition_chunk_count(k, l, q, eps, base)),
        ("tau l^4 q log(kl/eps) / alpha", condition_aperture(k, l, q, tau, alpha, eps, base)),
    ]


def conjecture_rank_failure_prob(k: int, n: int, eps: float | None = None) -> float:
    """Rank-deficiency bound for aperture-restricted matrices: 2^-(n-k).

    With ``eps`` (each aperture present in n/q columns with probability
    1 - eps) the exponent gains ``log2(eps)``. Returns 1 when n <= k.
    """
    if n <= k:
        return 1.0
    exponent = -(n - k)
    if eps is not None:
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        exponent += math.log2(eps)
    return min(1.0, 2.0**exponent)


def _divides(q: int, k: int) -> None:
    if k % q:
        raise ValueError(f"q={q} does not divide k={k}")


def bound_for(kind: str, k: int, l: int, q: int, eps: float, tau: int = 1) -> BoundResult:
    """Bound matching a code family: dense, chunked, or overlapped (large vs small overlap)."""
    if kind == "dense":
        return dense_bound(k, l, eps)
    if kind == "chunked":
        return cc_bound(k, l, q, eps)
    gamma = (tau - 1) * (k // q)
    if gamma >= math.sqrt(k):
        return occ_bound(k, l, q, eps)
    return occ_small_overlap_bound(k, l, q, eps)
