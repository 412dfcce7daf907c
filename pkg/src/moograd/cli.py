"""Command-line entry point ``moograd``.

Every running verb builds an experiment config from its flags, or loads one
with ``--config`` (the file then takes precedence over the flags), runs it
and exits 0 only if no (cell, seed) run failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .harness.config import ConfigError, from_dict, load_config
from .harness.plots import emit_plot_data
from .harness.runner import columns, read_csv, run_experiment, write_csv
from .metrics import ALL_METRICS, SOLUTION_METRICS, MetricConfig, all_metrics, pareto_filter
from .problems import PROBLEMS, get_problem, pareto_front_samples


def _common(p: argparse.ArgumentParser, seeds: bool = True) -> None:
    p.add_argument("--config", help="TOML experiment file; overrides the flags below")
    p.add_argument("--problem", default="vlmop2", choices=sorted(PROBLEMS))
    p.add_argument("--n", type=int, default=None, help="decision dimension (problem default if omitted)")
    if seeds:
        p.add_argument("--seed", type=int, nargs="+", default=[0], help="one or more seeds")
    p.add_argument("--out", default="runs")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moograd", description="Gradient-based multiobjective optimization toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="run finite-set solvers")
    _common(p)
    p.add_argument("--solver", nargs="+", default=["epo"], help="solver ids, e.g. epo mgda agg-tche")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--optimizer", default="adam", choices=["sgd", "momentum", "adam"])

    p = sub.add_parser("psl", help="train Pareto set models")
    _common(p)
    p.add_argument("--weight-source", nargs="+", default=["tche"])
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-k", type=int, default=32)
    p.add_argument("--jacobian-mode", default="analytic", choices=["analytic", "es"])

    p = sub.add_parser("mobo", help="run Bayesian optimization")
    _common(p)
    p.add_argument("--algo", nargs="+", default=["dirhv_ego"])
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--batch-q", type=int, default=5)
    p.add_argument("--no-baseline", action="store_true", help="skip the random-search baseline")

    p = sub.add_parser("metrics", help="score run CSVs; one row per metric, mean and std over files")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="per-seed CSVs written by solve/psl/mobo")
    p.add_argument("--pf", default="vlmop2", choices=sorted(PROBLEMS), help="problem whose true front is the reference set")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--ref", type=_floats, default=None, help="HV reference point, e.g. 1.2,1.2")
    p.add_argument("--reference-size", type=int, default=1000)
    p.add_argument("--h", type=float, default=10.0, help="smoothing for the smooth minimal distance")
    p.add_argument("--out", default=None, help="CSV to write (stdout if omitted)")

    p = sub.add_parser("table", help="run an experiment file and print the mean (std) table")
    p.add_argument("--config", required=True)

    p = sub.add_parser("plot-data", help="write plot-ready CSV/SVG files for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--no-svg", action="store_true")
    return ap


def _flags_to_config(args) -> dict:
    exp = {"kind": args.verb, "problem": args.problem, "n": args.n, "seeds": args.seed,
           "out": args.out, "workers": args.workers}
    if args.verb == "solve":
        sec = {"solvers": args.solver, "K": args.k, "iters": args.iters, "lr": args.lr,
               "optimizer": args.optimizer}
    elif args.verb == "psl":
        sec = {"weight_sources": args.weight_source, "steps": args.steps, "lr": args.lr,
               "batch_K": args.batch_k, "jacobian_mode": args.jacobian_mode}
    else:
        sec = {"algos": args.algo, "budget": args.budget, "batch_q": args.batch_q,
               "baseline": not args.no_baseline}
    return {"experiment": exp, args.verb: sec}


def _run(cfg) -> int:
    table = run_experiment(cfg)
    print(table.format())
    print(f"wrote {cfg.out}")
    return 1 if table.failed else 0


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def score_run_csv(path, problem, mc: MetricConfig) -> dict[str, float]:
    """All metrics of one run CSV.

    Solver and PSL files carry ``pref_*`` columns and get every metric.  MOBO
    files are scored on the non-dominated subset of their evaluations and
    their per-solution metrics are NaN.
    """
    header, data = read_csv(path)
    L = columns(header, data, "f_")
    if L.shape[1] != problem.m:
        raise ValueError(f"{path}: expected {problem.m} objective columns, found {L.shape[1]}")
    P = columns(header, data, "pref_")
    if P.shape[1] == problem.m:
        return all_metrics(L, P, mc)
    front = pareto_filter(L)
    vals = all_metrics(front, np.full_like(front, 1.0 / problem.m), mc)
    for k in SOLUTION_METRICS:
        vals[k] = float("nan")
    return vals


def _metrics(args) -> int:
    problem = get_problem(args.pf, args.n)
    ref = args.ref if args.ref else (1.2,) * problem.m
    if len(ref) != problem.m:
        raise ValueError(f"reference point needs {problem.m} entries")
    mc = MetricConfig(ref_point=ref, h=args.h,
                      reference_set=pareto_front_samples(problem, args.reference_size))
    runs = [score_run_csv(path, problem, mc) for path in args.inputs]
    rows = []
    for name in ALL_METRICS:
        v = np.array([r[name] for r in runs])
        rows.append([name, float(np.mean(v)), float(np.std(v)), len(v)])
    if args.out:
        write_csv(Path(args.out), ["metric", "mean", "std", "runs"], rows)
        print(f"wrote {args.out}")
    else:
        for name, mu, sd, _ in rows:
            print(f"{name:12s} {mu:.6g} ({sd:.3g})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "metrics":
            return _metrics(args)
        if args.verb == "plot-data":
            for path in emit_plot_data(args.run_dir, svg=not args.no_svg):
                print(path)
            return 0
        if args.verb == "table":
            return _run(load_config(args.config))
        if args.config:
            cfg = load_config(args.config)
            if cfg.kind != args.verb:
                raise ConfigError(f"{args.config} describes a {cfg.kind!r} experiment, not {args.verb!r}")
        else:
            cfg = from_dict(_flags_to_config(args))
        return _run(cfg)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"moograd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
