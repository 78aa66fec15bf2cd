"""Monte-Carlo sweeps over schedule capacity.

A trial draws a schedule of exact capacity ``n``, runs one transfer and
decodes at the terminal. Success means the terminal matrix has rank ``k``
(the message is recoverable); the per-chunk decoder's outcome is counted
alongside. Every trial owns its random streams, keyed by
``derive_seed(master_seed, spec id, n, trial)``, so a sweep's output is a
function of its configuration alone, whatever the worker count.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml
from scipy.stats import beta

from . import _kernels
from .coding import POLICIES, CodeSpec, Kind, make_code_spec, simulate
from .decoding import decode_chunked, decode_global
from .rng import Stream, derive_seed
from .schedule import generate_schedule

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "code", "kind", "k", "l", "q", "tau", "alpha", "gamma", "policy", "n",
    "trials", "successes", "chunked_successes", "p_hat", "ci_low", "ci_high", "seed", "capped",
)
DEFAULT_SEED = 20090707
PAYLOAD_SYMBOL_WORDS = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StopRule:
    """``fixed`` runs exactly ``trials``; ``successes`` runs until ``successes`` wins or ``cap`` trials."""

    kind: str = "fixed"
    trials: int = 1000
    successes: int = 100
    cap: int = 20000

    def __post_init__(self):
        if self.kind not in ("fixed", "successes"):
            raise ConfigError(f"unknown stop rule {self.kind!r}")
        if self.kind == "fixed" and self.trials < 1:
            raise ConfigError("fixed stop rule needs at least one trial")
        if self.kind == "successes" and not 1 <= self.successes <= self.cap:
            raise ConfigError("successes rule needs 1 <= S <= cap")

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        """``fixed:<T>`` or ``successes:<S>,<cap>``."""
        try:
            kind, _, rest = text.partition(":")
            if kind == "fixed":
                return cls("fixed", trials=int(rest))
            if kind == "successes":
                s, _, cap = rest.partition(",")
                return cls("successes", successes=int(s), cap=int(cap) if cap else 20000)
        except ValueError:
            pass
        raise ConfigError(f"bad stop rule {text!r}; expected fixed:<T> or successes:<S>,<cap>")

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.trials}"
        return f"successes:{self.successes},{self.cap}"


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    l: int
    codes: tuple[CodeSpec, ...]
    n_grid: tuple[int, ...]
    stop_rule: StopRule = StopRule()
    policy: str = "uniform-all"
    mode: str = "rank"
    master_seed: int = DEFAULT_SEED
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.k < 1 or self.l < 1:
            raise ConfigError("k and l must be positive")
        if not self.codes:
            raise ConfigError("no codes configured")
        for spec in self.codes:
            if spec.k != self.k:
                raise ConfigError(f"{spec.label} has k={spec.k}, config has k={self.k}")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigError("n_grid must be a non-empty list of positive integers")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly ascending")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.mode not in ("rank", "payload"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    chunked_success: bool
    rank: int
    payload_ok: bool = True


@dataclass(frozen=True)
class PointEstimate:
    spec: CodeSpec
    l: int
    n: int
    trials: int
    successes: int
    chunked_successes: int
    ci_low: float
    ci_high: float
    mean_terminal_rank: float
    seed: int
    policy: str = "uniform-all"
    capped: bool = False
    payload_mismatches: int = 0
    max_terminal_rank: int = 0

    @property
    def code(self) -> str:
        return self.spec.label

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def half_width(self) -> float:
        return max(self.p_hat - self.ci_low, self.ci_high - self.p_hat)

    def csv_row(self) -> list[str]:
        s = self.spec
        return [
            s.label, s.kind.value, str(s.k), str(self.l), str(s.q), str(s.tau), str(s.alpha), str(s.gamma),
            self.policy, str(self.n), str(self.trials), str(self.successes), str(self.chunked_successes),
            f"{self.p_hat:.6f}", f"{self.ci_low:.6f}", f"{self.ci_high:.6f}", str(self.seed),
            "1" if self.capped else "0",
        ]


@dataclass
class SweepTable:
    configs: list[ExperimentConfig]
    points: list[PointEstimate] = field(default_factory=list)

    def select(self, code: str, l: Optional[int] = None) -> list[PointEstimate]:
        return sorted(
            (p for p in self.points if p.code == code and (l is None or p.l == l)), key=lambda p: p.n
        )

    def codes(self, l: Optional[int] = None) -> list[str]:
        seen: dict[str, None] = {}
        for p in self.points:
            if l is None or p.l == l:
                seen.setdefault(p.code, None)
        return list(seen)

    def lengths(self) -> list[int]:
        return sorted({p.l for p in self.points})

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in self.points:
            w.writerow(p.csv_row())
        return out.getvalue()

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        try:
            path.write_text(self.to_csv(), encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot write sweep CSV to {path}: {exc.strerror}") from exc

    def metadata(self) -> dict:
        notes = []
        if any(c.stop_rule.kind == "successes" for c in self.configs):
            notes.append(
                "successes stop rule: p_hat = successes / trials is the negative-binomial "
                "estimator; it is biased upward by roughly p(1-p)/S"
            )
        return {
            "configs": [config_to_dict(c) for c in self.configs],
            "success_criterion": "successes: terminal matrix rank k (global elimination); "
                                 "chunked_successes: per-chunk iterative decoder",
            "notes": notes,
        }

    @classmethod
    def read_csv(cls, path: str | Path) -> "SweepTable":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_csv(text)

    @classmethod
    def from_csv(cls, text: str) -> "SweepTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
            raise ValueError("unexpected CSV header")
        points = []
        for r in rows:
            spec = CodeSpec(Kind(r["kind"]), int(r["k"]), int(r["q"]), int(r["tau"]))
            points.append(PointEstimate(
                spec=spec, l=int(r["l"]), n=int(r["n"]), trials=int(r["trials"]),
                successes=int(r["successes"]), chunked_successes=int(r["chunked_successes"]),
                ci_low=float(r["ci_low"]), ci_high=float(r["ci_high"]), mean_terminal_rank=float("nan"),
                seed=int(r["seed"]), policy=r["policy"], capped=r["capped"] == "1",
            ))
        return cls([], points)


# --------------------------------------------------------------------------
# trials


def spec_id(spec: CodeSpec, l: int) -> str:
    return f"{spec.label}/k{spec.k}/l{l}"


def trial_seed(master_seed: int, spec: CodeSpec, l: int, n: int, trial: int) -> int:
    return derive_seed(master_seed, spec_id(spec, l), n, trial)


def run_trial(spec: CodeSpec, l: int, n: int, seed: int, policy: str = "uniform-all",
              mode: str = "rank") -> TrialResult:
    """One schedule, one transfer, both decoders.

    Streams: ``schedule``, ``coding`` and ``message`` children of ``seed``;
    rank and payload modes consume the first two identically.
    """
    schedule = generate_schedule(l, n, Stream(seed, "schedule"))
    coding = Stream(seed, "coding")
    if mode == "payload":
        message = Stream(seed, "message").words(spec.k * PAYLOAD_SYMBOL_WORDS).reshape(spec.k, -1)
        report = simulate(spec, schedule, coding, "payload", message, policy)
    else:
        message = None
        report = simulate(spec, schedule, coding, "rank", None, policy)
    glob = decode_global(report)
    chunked = decode_chunked(report)
    ok = True
    if message is not None:
        if glob.success and not np.array_equal(glob.message, message):
            ok = False
        if chunked.values is not None:
            idx = np.fromiter(chunked.decoded_symbols, dtype=np.int64)
            if idx.size and not np.array_equal(chunked.values[idx], message[idx]):
                ok = False
        if chunked.success and not glob.success:
            ok = False
    return TrialResult(glob.success, chunked.success, glob.global_rank, ok)


def _run_batch(args) -> list[TrialResult]:
    spec, l, n, seed, policy, mode, start, stop = args
    return [run_trial(spec, l, n, trial_seed(seed, spec, l, n, t), policy, mode) for t in range(start, stop)]


def clopper_pearson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    a = (1 - level) / 2
    lo = 0.0 if successes == 0 else float(beta.ppf(a, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(beta.ppf(1 - a, successes + 1, trials - successes))
    return lo, hi


def _estimate(config: ExperimentConfig, spec: CodeSpec, n: int, results: Sequence[TrialResult],
              capped: bool) -> PointEstimate:
    trials = len(results)
    succ = sum(r.success for r in results)
    lo, hi = clopper_pearson(succ, trials)
    ranks = [r.rank for r in results]
    return PointEstimate(
        spec=spec, l=config.l, n=n, trials=trials, successes=succ,
        chunked_successes=sum(r.chunked_success for r in results),
        ci_low=lo, ci_high=hi, mean_terminal_rank=float(np.mean(ranks)) if ranks else 0.0,
        seed=config.master_seed, policy=config.policy, capped=capped,
        payload_mismatches=sum(not r.payload_ok for r in results),
        max_terminal_rank=max(ranks) if ranks else 0,
    )


def _batches(total: int, size: int) -> list[tuple[int, int]]:
    return [(a, min(a + size, total)) for a in range(0, total, size)]


class _Runner:
    """Maps trial batches in-process (one worker) or over a process pool."""

    def __init__(self, workers: int):
        self.workers = workers
        self.pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def map(self, tasks: list) -> list[list[TrialResult]]:
        if self.pool is None:
            return [_run_batch(t) for t in tasks]
        return list(self.pool.map(_run_batch, tasks))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _batch_size(config: ExperimentConfig, total: int) -> int:
    return max(1, min(64, math.ceil(total / (4 * config.workers))))


def _point_successes(config: ExperimentConfig, spec: CodeSpec, n: int, runner: _Runner) -> PointEstimate:
    rule = config.stop_rule
    results: list[TrialResult] = []
    done = 0
    wins = 0
    step = max(rule.successes, 32)
    while wins < rule.successes and done < rule.cap:
        stop = min(rule.cap, done + step * config.workers)
        tasks = [(spec, config.l, n, config.master_seed, config.policy, config.mode, a + done, b + done)
                 for a, b in _batches(stop - done, step)]
        for batch in runner.map(tasks):
            results.extend(batch)
        done = stop
        wins = sum(r.success for r in results)
    if wins >= rule.successes:
        count = 0
        for i, r in enumerate(results):
            count += r.success
            if count == rule.successes:
                results = results[: i + 1]
                break
        return _estimate(config, spec, n, results, capped=False)
    return _estimate(config, spec, n, results, capped=True)


def run_point(config: ExperimentConfig, spec: CodeSpec, n: int) -> PointEstimate:
    """Estimate the success probability of ``spec`` at capacity ``n``."""
    with _Runner(config.workers) as runner:
        return _run_point(config, spec, n, runner)


def _run_point(config, spec, n, runner) -> PointEstimate:
    if config.stop_rule.kind == "successes":
        return _point_successes(config, spec, n, runner)
    total = config.stop_rule.trials
    tasks = [(spec, config.l, n, config.master_seed, config.policy, config.mode, a, b)
             for a, b in _batches(total, _batch_size(config, total))]
    results = [r for batch in runner.map(tasks) for r in batch]
    return _estimate(config, spec, n, results, capped=False)


def run_sweep(configs: ExperimentConfig | Sequence[ExperimentConfig], out: str | Path | None = None,
              progress: bool = False) -> SweepTable:
    """One point per (config, spec, n), rows ordered by (config, spec, n).

    Fixed-trial sweeps submit every batch at once so a pool stays busy.
    """
    if isinstance(configs, ExperimentConfig):
        configs = [configs]
    table = SweepTable(list(configs))
    workers = max(c.workers for c in configs)
    with _Runner(workers) as runner:
        for config in configs:
            if config.stop_rule.kind == "fixed":
                total = config.stop_rule.trials
                keys, tasks = [], []
                for spec in config.codes:
                    for n in config.n_grid:
                        for a, b in _batches(total, _batch_size(config, total)):
                            keys.append((spec, n))
                            tasks.append((spec, config.l, n, config.master_seed, config.policy, config.mode, a, b))
                collected: dict[tuple[CodeSpec, int], list[TrialResult]] = {}
                for key, batch in zip(keys, runner.map(tasks)):
                    collected.setdefault(key, []).extend(batch)
                for spec in config.codes:
                    for n in config.n_grid:
                        table.points.append(_estimate(config, spec, n, collected[(spec, n)], capped=False))
            else:
                for spec in config.codes:
                    for n in config.n_grid:
                        table.points.append(_point_successes(config, spec, n, runner))
            if progress:
                log.info("finished l=%d (%d points)", config.l, len(table.points))
    if out is not None:
        table.write_csv(out)
    return table


def overhead(table: SweepTable, code: str, p_star: float = 0.9, l: Optional[int] = None) -> Optional[int]:
    """Smallest grid ``n`` with ``p_hat >= p_star``, minus ``k``; ``None`` if never reached."""
    if not 0.0 < p_star < 1.0:
        raise ValueError("p_star must lie in (0, 1)")
    for p in table.select(code, l):
        if p.p_hat >= p_star:
            return p.n - p.spec.k
    return None


def capacity_at(table: SweepTable, code: str, p_star: float = 0.9, l: Optional[int] = None) -> Optional[int]:
    """Smallest grid ``n`` with ``p_hat >= p_star`` (``None`` if never reached)."""
    o = overhead(table, code, p_star, l)
    if o is None:
        return None
    return o + table.select(code, l)[0].spec.k


# --------------------------------------------------------------------------
# aperture-rank probe


@dataclass(frozen=True)
class ApertureResult:
    k: int
    q: int
    tau: int
    n: int
    trials: int
    full_rank: int
    balanced: bool

    @property
    def full_rank_rate(self) -> float:
        return self.full_rank / self.trials

    @property
    def failure_rate(self) -> float:
        return 1.0 - self.full_rank_rate


def aperture_rank_experiment(k: int, q: int, tau: int, n: int, trials: int, rng: Stream,
                             balanced: bool = False) -> ApertureResult:
    """Full-rank frequency of k x n matrices with aperture-restricted Bernoulli columns.

    Each column picks a chunk uniformly (one draw), or chunk ``c mod q`` for
    column ``c`` when ``balanced``, then ``ceil(alpha/64)`` draws of
    coefficients inside that chunk's aperture.
    """
    if n < k:
        raise ValueError("n must be at least k")
    kind = "dense" if q == 1 else ("chunked" if tau == 1 else "overlapped")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = make_code_spec(kind, k, q, tau)
    full = _kernels.aperture_rank_kernel(k, q, spec.stride, spec.alpha, n, trials, balanced, rng.state)
    return ApertureResult(k, q, tau, n, trials, int(full), balanced)


# --------------------------------------------------------------------------
# presets and config files


def fig2_configs(stop: StopRule = StopRule(), **kw) -> list[ExperimentConfig]:
    k = 1024
    codes = (
        make_code_spec("dense", k),
        make_code_spec("chunked", k, 2),
        make_code_spec("chunked", k, 4),
        make_code_spec("overlapped", k, 4, 2),
    )
    return [ExperimentConfig(k, 4, codes, tuple(range(1024, 1601, 32)), stop, **kw)]


def fig3_configs(stop: StopRule = StopRule(), **kw) -> list[ExperimentConfig]:
    k = 1024
    codes = (make_code_spec("chunked", k, 64),) + tuple(
        make_code_spec("overlapped", k, q, 16 * q // k) for q in (128, 256, 512, 1024)
    )
    # wide enough for the slowest chunked code to reach p = 0.9 at both lengths
    grid = tuple(range(1024, 3009, 32))
    return [ExperimentConfig(k, l, codes, grid, stop, **kw) for l in (1, 2)]


PRESETS = {"fig2": fig2_configs, "fig3": fig3_configs}


def preset(name: str, stop: StopRule = StopRule(), **kw) -> list[ExperimentConfig]:
    try:
        return PRESETS[name](stop, **kw)
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


_CONFIG_KEYS = {"k", "l", "codes", "n_grid", "stop_rule", "policy", "mode", "master_seed", "workers"}
_CODE_KEYS = {"kind", "q", "tau"}


def _parse_grid(value) -> tuple[int, ...]:
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "step"}
        if extra:
            raise ConfigError(f"unknown n_grid keys {sorted(extra)}")
        return tuple(range(int(value["start"]), int(value["stop"]) + 1, int(value.get("step", 1))))
    if isinstance(value, list):
        return tuple(int(v) for v in value)
    raise ConfigError("n_grid must be a list or a {start, stop, step} mapping")


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from the mapping form used by YAML config files.

    Unknown keys are rejected. ``l`` may be a list, in which case
    :func:`configs_from_dict` should be used.
    """
    configs = configs_from_dict(data)
    if len(configs) != 1:
        raise ConfigError("several line lengths given; use configs_from_dict")
    return configs[0]


def configs_from_dict(data: dict) -> list[ExperimentConfig]:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"k", "l", "codes", "n_grid"} - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    k = int(data["k"])
    codes = []
    for entry in data["codes"]:
        if not isinstance(entry, dict):
            raise ConfigError(f"code entry must be a mapping, got {entry!r}")
        extra = set(entry) - _CODE_KEYS
        if extra:
            raise ConfigError(f"unknown code keys: {sorted(extra)}")
        codes.append(make_code_spec(entry["kind"], k, int(entry.get("q", 1)), int(entry.get("tau", 1))))
    stop = data.get("stop_rule", "fixed:1000")
    stop = StopRule.parse(stop) if isinstance(stop, str) else StopRule(**stop)
    ls = data["l"] if isinstance(data["l"], list) else [data["l"]]
    return [
        ExperimentConfig(
            k=k, l=int(l), codes=tuple(codes), n_grid=_parse_grid(data["n_grid"]), stop_rule=stop,
            policy=data.get("policy", "uniform-all"), mode=data.get("mode", "rank"),
            master_seed=int(data.get("master_seed", DEFAULT_SEED)), workers=int(data.get("workers", 1)),
        )
        for l in ls
    ]


def load_config(path: str | Path) -> list[ExperimentConfig]:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return configs_from_dict(data)


def config_to_dict(c: ExperimentConfig) -> dict:
    return {
        "k": c.k,
        "l": c.l,
        "codes": [{"kind": s.kind.value, "q": s.q, "tau": s.tau} for s in c.codes],
        "n_grid": list(c.n_grid),
        "stop_rule": str(c.stop_rule),
        "policy": c.policy,
        "mode": c.mode,
        "master_seed": c.master_seed,
        "workers": c.workers,
    }
