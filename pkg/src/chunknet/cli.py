"""Command-line entry point: ``chunknet <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import bounds as B
from .coding import POLICIES, make_code_spec, simulate
from .decoding import decode_chunked, decode_global
from .experiment import (
    DEFAULT_SEED,
    ConfigError,
    StopRule,
    aperture_rank_experiment,
    capacity_at,
    load_config,
    overhead,
    preset,
    run_sweep,
)
from .rng import Stream
from .schedule import ScheduleError, capacity, capacity_maxflow_oracle, generate_schedule, read_schedule

log = logging.getLogger("chunknet")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default 1)")
    p.add_argument("--out", type=Path, help="CSV output path")
    p.add_argument("--plot", type=Path, help="figure path (.svg, .png, .pdf)")
    p.add_argument("--stop", type=StopRule.parse, default=None,
                   help="fixed:<T> or successes:<S>,<cap> (default fixed:1000)")
    p.add_argument("--policy", choices=POLICIES, default=None)
    p.add_argument("--mode", choices=("rank", "payload"), default=None)


def _with_parent(add_parser, parent):
    def add(name, **kw):
        return add_parser(name, parents=[parent], **kw)

    return add


def build_parser() -> argparse.ArgumentParser:
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="chunknet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser = _with_parent(sub.add_parser, verbosity)

    p = sub.add_parser("sweep", help="Monte-Carlo success probability versus capacity")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=("fig2", "fig3"))
    src.add_argument("--config", type=Path, help="YAML experiment config")
    _common(p)
    p.add_argument("--p-star", type=float, default=0.9, help="target probability for the overhead summary")
    p.add_argument("--eps", type=float, default=0.01, help="failure probability for plotted bound markers")

    p = sub.add_parser("bounds", help="analytic sufficient capacities, term by term")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=_int_list, default=[1])
    p.add_argument("--q", type=_int_list, default=[1])
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--n", type=int, default=None, help="capacity for the condition ratios (default k)")
    p.add_argument("--out", type=Path, help="CSV export of every bound over the l x q grid")

    p = sub.add_parser("aperture", help="full-rank rate of aperture-restricted random matrices")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--balanced", action="store_true", help="exactly n/q columns per aperture")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)

    p = sub.add_parser("capacity", help="min-cut capacity of a schedule file")
    p.add_argument("--schedule-file", type=Path, required=True)
    p.add_argument("--oracle", action="store_true", help="also run the max-flow oracle")

    p = sub.add_parser("simulate", help="one transfer over a replayed or generated schedule")
    p.add_argument("--kind", choices=("dense", "chunked", "overlapped"), required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--tau", type=int, default=1)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--schedule-file", type=Path)
    g.add_argument("--generate", metavar="L,N", type=_int_list, help="random schedule of length L, capacity N")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--policy", choices=POLICIES, default="uniform-all")
    return parser


def cmd_sweep(args) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.policy is not None:
        overrides["policy"] = args.policy
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.stop is not None:
        overrides["stop_rule"] = args.stop
    if args.preset:
        configs = preset(args.preset, **({"stop": overrides.pop("stop_rule")} if "stop_rule" in overrides else {}))
    else:
        configs = load_config(args.config)
    configs = [c.with_(**overrides) for c in configs]
    table = run_sweep(configs, progress=True)
    if args.out:
        table.write_csv(args.out)
        meta = args.out.with_name(args.out.name + ".meta.json")
        meta.write_text(json.dumps(table.metadata(), indent=2) + "\n", encoding="utf-8")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(table.to_csv())
    if args.plot:
        from .plotting import emit_plot

        emit_plot(table, args.plot, eps=args.eps)
        log.info("wrote %s", args.plot)
    out = sys.stderr if not args.out else sys.stdout
    print(f"# n at p_hat >= {args.p_star} (overhead = n - k)", file=out)
    for l in table.lengths():
        for code in table.codes(l):
            n = capacity_at(table, code, args.p_star, l)
            o = overhead(table, code, args.p_star, l)
            print(f"l={l} {code:<16} n={n if n is not None else 'not reached':>12} "
                  f"overhead={o if o is not None else '-'}", file=out)
    return 0


def cmd_bounds(args) -> int:
    n = args.n if args.n is not None else args.k
    rows = []
    for l in args.l:
        for q in args.q:
            if args.k % q:
                raise ConfigError(f"q={q} does not divide k={args.k}")
            results = [B.dense_bound(args.k, l, args.eps), B.cc_bound(args.k, l, q, args.eps),
                       B.occ_bound(args.k, l, q, args.eps), B.occ_small_overlap_bound(args.k, l, q, args.eps)]
            if l == 1:
                results += [B.erasure_bounds("dense", args.k, 1, args.eps),
                            B.erasure_bounds("chunked", args.k, q, args.eps)]
            print(f"k={args.k} l={l} q={q} tau={args.tau} eps={args.eps}")
            for r in results:
                terms = "  ".join(f"{name}={value:.3f}" for name, value in r.terms.items())
                print(f"  {r.name:<18} n_min={r.n_min:10.3f}   {terms}")
                rows.append({"bound": r.name, "k": args.k, "l": l, "q": q, "tau": args.tau, "eps": args.eps,
                             "n_min": f"{r.n_min:.6f}", "overhead": f"{r.overhead:.6f}",
                             "terms": ";".join(f"{a}={b:.6f}" for a, b in r.terms.items())})
            alpha = args.tau * (args.k // q)
            print("  conditions (ratio; << 1 means respected):")
            for name, ratio in B.condition_diagnostics(args.k, n, l, q, args.tau, alpha, args.eps):
                print(f"    {name:<36} {ratio:12.4g}")
            print(f"  flow per chunk after losses (C=1, indicative): {B.flow_after_loss(n, l, q, args.eps):.2f}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


def cmd_aperture(args) -> int:
    rng = Stream(args.seed, "aperture")
    print("k,q,tau,alpha,n,trials,failures,failure_rate,bound_2^-(n-k)")
    for n in args.n:
        r = aperture_rank_experiment(args.k, args.q, args.tau, n, args.trials, rng, balanced=args.balanced)
        fails = r.trials - r.full_rank
        print(f"{r.k},{r.q},{r.tau},{args.tau * args.k // args.q},{n},{r.trials},{fails},"
              f"{r.failure_rate:.6g},{B.conjecture_rank_failure_prob(args.k, n):.6g}")
    return 0


def cmd_capacity(args) -> int:
    s = read_schedule(args.schedule_file)
    print(f"l={s.length} transmissions={len(s)} capacity={capacity(s)}")
    if args.oracle:
        print(f"maxflow={capacity_maxflow_oracle(s)}")
    return 0


def cmd_simulate(args) -> int:
    spec = make_code_spec(args.kind, args.k, args.q, args.tau)
    if args.schedule_file:
        s = read_schedule(args.schedule_file)
    else:
        if len(args.generate) != 2:
            raise ConfigError("--generate takes L,N")
        s = generate_schedule(args.generate[0], args.generate[1], Stream(args.seed, "schedule"))
    report = simulate(spec, s, Stream(args.seed, "coding"), policy=args.policy)
    g = decode_global(report)
    c = decode_chunked(report)
    print(f"{spec} l={s.length} capacity={capacity(s)} received={report.n_packets} "
          f"wasted={report.wasted_slots}")
    print(f"global: success={g.success} rank={g.global_rank}")
    print(f"chunked: success={c.success} decoded={c.n_decoded} rounds={c.rounds}")
    return 0


COMMANDS = {"sweep": cmd_sweep, "bounds": cmd_bounds, "aperture": cmd_aperture,
            "capacity": cmd_capacity, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScheduleError, ValueError, OSError) as exc:
        print(f"chunknet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
