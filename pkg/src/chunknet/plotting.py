"""Success-probability curves rendered with matplotlib.

One panel per line length; one curve per code (x = capacity n, y = p_hat
with confidence whiskers) and a dashed vertical marker per code family at
its analytic sufficient capacity. Identical tables render to identical
bytes: the SVG hash salt is fixed and no date is embedded.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib as mpl  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from .bounds import bound_for  # noqa: E402
from .experiment import SweepTable  # noqa: E402

STYLE = {
    "svg.hashsalt": "chunknet",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "lines.markersize": 3.5,
}
_KIND_STYLE = {"dense": ("k", "s"), "chunked": ("tab:red", "o"), "overlapped": ("tab:blue", "^")}
_KIND_SHADES = {"dense": ["k"], "chunked": ["tab:red", "tab:orange", "tab:brown"],
                "overlapped": ["tab:blue", "tab:green", "tab:purple", "tab:cyan", "tab:olive"]}


def _family_representatives(points) -> dict[str, object]:
    """Largest-q spec of each code family present."""
    reps: dict[str, object] = {}
    for p in points:
        kind = p.spec.kind.value
        if kind not in reps or p.spec.q > reps[kind].q:
            reps[kind] = p.spec
    return reps


def render(table: SweepTable, eps: float = 0.01, bounds: bool = True) -> Figure:
    if not table.points:
        raise ValueError("cannot plot an empty table")
    lengths = table.lengths()
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(4.2 * len(lengths), 3.2))
        axes = fig.subplots(1, len(lengths), squeeze=False)[0]
        for ax, l in zip(axes, lengths):
            used = {kind: 0 for kind in _KIND_SHADES}
            xs_all = []
            for code in table.codes(l):
                pts = table.select(code, l)
                kind = pts[0].spec.kind.value
                shades = _KIND_SHADES[kind]
                color = shades[used[kind] % len(shades)]
                used[kind] += 1
                xs = [p.n for p in pts]
                ys = [p.p_hat for p in pts]
                err = [[p.p_hat - p.ci_low for p in pts], [p.ci_high - p.p_hat for p in pts]]
                bars = ax.errorbar(xs, ys, yerr=err, color=color, marker=_KIND_STYLE[kind][1], capsize=1.5,
                                   label=code)
                bars.lines[0].set_gid(f"curve-{code}-l{l}")
                xs_all.extend(xs)
            pts_l = [p for p in table.points if p.l == l]
            if bounds:
                for kind, spec in _family_representatives(pts_l).items():
                    b = bound_for(kind, spec.k, l, spec.q, eps, spec.tau)
                    ax.axvline(b.n_min, color=_KIND_STYLE[kind][0], linestyle="--", linewidth=0.8,
                               gid=f"bound-{kind}-l{l}")
            lo, hi = min(xs_all), max(xs_all)
            pad = max(1.0, 0.02 * (hi - lo))
            ax.set_xlim(lo - pad, hi + pad)
            ax.set_ylim(-0.03, 1.03)
            ax.set_xlabel("schedule capacity n")
            ax.set_ylabel("P(decoding success)")
            ax.set_title(f"k = {pts_l[0].spec.k}, l = {l}")
            ax.legend(loc="lower right", fontsize=7, frameon=False)
        fig.tight_layout()
    return fig


def emit_plot(table: SweepTable, path: str | Path, eps: float = 0.01, bounds: bool = True) -> Path:
    """Write the figure for ``table`` (format from the suffix, SVG by default)."""
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    fig = render(table, eps=eps, bounds=bounds)
    metadata = {"Date": None} if fmt == "svg" else None
    with mpl.rc_context(STYLE):
        fig.savefig(path, format=fmt, metadata=metadata)
    return path
