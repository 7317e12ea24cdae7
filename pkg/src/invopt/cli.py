"""Command line entry point: ``invopt {run,lowerbound,arc2d-bench,sweep,plot}``.

Exit codes: 0 success, 1 failure during a run (reported with its round index),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from invopt.config import OUTPUT_ENV, ExperimentConfig, load_config
from invopt.errors import ConfigError, ExperimentError, InputError, NumericError, ProtocolError
from invopt.metrics import MIN_TRIALS, first_rounds_regret, monte_carlo_mean, summary_row, write_summary
from invopt.plotting import regret_svg, series_from_trace
from invopt.sim import (
    LowerBoundSegments,
    Segments2D,
    make_instance,
    read_trace,
    run_experiment,
    write_trace,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _outdir(arg: str | None, default: str | Path) -> Path:
    # explicit flag beats the environment, which beats the config file
    return Path(arg or os.environ.get(OUTPUT_ENV) or default)


def trace_name(cfg: ExperimentConfig, seed: int) -> str:
    return f"trace_{cfg.learner}_n{cfg.n}_T{cfg.T}_seed{seed}.csv"


def run_cell(cfg: ExperimentConfig, seed: int, outdir: str) -> tuple[str, dict]:
    """Run one (config, seed) cell and write its trace; picklable for worker processes."""
    spec = cfg.instance(seed)
    trace = run_experiment(spec, cfg.learner, cfg.agent, dict(cfg.learner_params))
    path = write_trace(trace, Path(outdir) / trace_name(cfg, seed))
    return str(path), summary_row(trace)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args.output, cfg.output)
    rows, paths = [], []
    for seed in cfg.seeds:
        path, row = run_cell(cfg, seed, str(out))
        rows.append(row)
        paths.append(path)
        print(f"seed {seed}: R={row['R']:.6g} Rtilde={row['Rtilde']:.6g} Delta={row['Delta']:.6g} -> {path}")
    summary = write_summary(rows, out / "summary.csv")
    print(f"summary -> {summary}")
    if not args.no_plot:
        svg = out / "regret.svg"
        svg.write_text(regret_svg([series_from_trace(read_trace(p)) for p in paths],
                                  title=f"{cfg.learner}, n={cfg.n}"))
        print(f"figure -> {svg}")
    return EXIT_OK


def lowerbound_trials(n: int, B: float, T: int, trials: int, learner: str, seed: int = 0) -> list:
    if trials < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} trials, got {trials}")
    if T < n:
        raise ConfigError(f"lower-bound instance needs T >= n (T={T}, n={n})")
    gen = LowerBoundSegments(n, B)
    return [run_experiment(make_instance(gen, T, seed + i), learner) for i in range(trials)]


def cmd_lowerbound(args) -> int:
    T = args.n if args.T is None else args.T
    traces = lowerbound_trials(args.n, args.B, T, args.trials, args.learner, args.seed)
    mean, se = monte_carlo_mean(traces, first_rounds_regret)
    threshold = args.B * args.n / 4
    ok = mean >= threshold - 3 * se
    print(f"first-{args.n}-round regret over {args.trials} trials ({args.learner}): {mean:.6g} +- {se:.3g}")
    print(f"threshold Bn/4 = {threshold:.6g}; mean >= threshold - 3 stderr: {'yes' if ok else 'no'}")
    out = _outdir(args.output, "out")
    path = write_summary([summary_row(tr) for tr in traces], out / "lowerbound_summary.csv")
    print(f"summary -> {path}")
    return EXIT_OK


def arc2d_trials(T: int, trials: int, polygon_fraction: float, seed: int = 0) -> list:
    if trials < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} trials, got {trials}")
    gen = Segments2D(polygon_fraction=polygon_fraction)
    return [run_experiment(make_instance(gen, T, seed + i), "arc2d") for i in range(trials)]


def cmd_arc2d(args) -> int:
    traces = arc2d_trials(args.T, args.trials, args.polygon_fraction, args.seed)
    mean, se = monte_carlo_mean(traces, lambda tr: tr.final("R"))
    contained = all(bool(np.all(tr.extras["cstar_in_arc"] == 1.0)) for tr in traces)
    removed = max(float(tr.extras["arc_removed"].sum()) for tr in traces)
    print(f"arc2d cumulative regret over {args.trials} trials, T={args.T}: {mean:.6g} +- {se:.3g} "
          f"(2*pi = {2 * math.pi:.6g})")
    print(f"true objective inside the arc every round: {'yes' if contained else 'no'}")
    print(f"largest total removed arc length: {removed:.6g}")
    out = _outdir(args.output, "out")
    path = write_summary([summary_row(tr) for tr in traces], out / "arc2d_summary.csv")
    print(f"summary -> {path}")
    return EXIT_OK


def _parse_list(text: str, conv):
    try:
        return [conv(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad list {text!r}") from exc


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    ns = _parse_list(args.n, int) if args.n else [base.n]
    learners = _parse_list(args.learners, str) if args.learners else [base.learner]
    out = _outdir(args.output, base.output)
    cells = []
    for n in ns:
        for learner in learners:
            cfg = replace(base, n=n, learner=learner, region=base.region if n == base.n else None)
            cfg.instance(cfg.seeds[0])  # validate before launching anything
            cells += [(cfg, seed) for seed in cfg.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_cell, *zip(*[(c, s, str(out)) for c, s in cells])))
    else:
        results = [run_cell(c, s, str(out)) for c, s in cells]
    rows = [r for _, r in results]
    path = write_summary(rows, out / "summary.csv")
    print(f"{len(cells)} runs; summary -> {path}")
    if not args.no_plot:
        for n in ns:
            picked = [p for (c, s), (p, _) in zip(cells, results) if c.n == n and s == base.seeds[0]]
            svg = out / f"regret_n{n}.svg"
            svg.write_text(regret_svg([series_from_trace(read_trace(p)) for p in picked], title=f"n={n}"))
            print(f"figure -> {svg}")
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        traces = [read_trace(p) for p in args.traces]
    except (OSError, ValueError) as exc:
        raise InputError(f"unreadable trace: {exc}") from exc
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(regret_svg([series_from_trace(tr) for tr in traces]))
    print(f"figure -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="invopt", description="Online inverse linear optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every seed of a config, write traces, summary and a figure")
    r.add_argument("config")
    r.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    r.add_argument("--no-plot", action="store_true")
    r.set_defaults(func=cmd_run)

    lb = sub.add_parser("lowerbound", help="Monte Carlo regret over the first n rounds of the hard instance")
    lb.add_argument("--n", type=int, required=True)
    lb.add_argument("--B", type=float, default=1.0)
    lb.add_argument("--T", type=int, default=None, help="horizon (default n)")
    lb.add_argument("--trials", type=int, default=1000)
    lb.add_argument("--learner", default="ons", choices=["ons", "metagrad", "ogd"])
    lb.add_argument("--seed", type=int, default=0, help="first seed; trial i uses seed + i")
    lb.add_argument("--output")
    lb.set_defaults(func=cmd_lowerbound)

    a = sub.add_parser("arc2d-bench", help="expected regret of the planar arc learner")
    a.add_argument("--T", type=int, default=10_000)
    a.add_argument("--trials", type=int, default=200)
    a.add_argument("--polygon-fraction", type=float, default=0.5)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--output")
    a.set_defaults(func=cmd_arc2d)

    s = sub.add_parser("sweep", help="grid over dimensions, learners and seeds, optionally in parallel")
    s.add_argument("config")
    s.add_argument("--n", help="comma list of dimensions (default: the config's n)")
    s.add_argument("--learners", help="comma list of learners (default: the config's learner)")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--output")
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="SVG of R and the surrogate regret against t (log axis)")
    pl.add_argument("traces", nargs="+")
    pl.add_argument("-o", "--output", default="regret.svg")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"runtime error at round {exc.round_index}: {type(exc.cause).__name__}: {exc.cause}",
              file=sys.stderr)
        return EXIT_RUNTIME
    except (NumericError, ProtocolError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
