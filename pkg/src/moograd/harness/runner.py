"""Run every (cell, seed) of an experiment and aggregate metrics over seeds."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import MetricConfig, all_metrics, pareto_filter
from ..mobo import AcquisitionConfig, mobo_run, random_search
from ..problems import get_problem, pareto_front_samples
from ..psl import PslConfig, psl_evaluate, psl_train, save_model
from ..solvers import RunAborted, RunConfig, descend, uniform_preferences
from .config import ExperimentConfig

log = logging.getLogger(__name__)

FLOAT_FMT = "%.9g"


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_csv(path: Path, header: list[str], rows) -> None:
    """Header plus rows; floats as 9-significant-digit text, ints verbatim."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))


def columns(header: list[str], data: np.ndarray, prefix: str) -> np.ndarray:
    idx = [i for i, h in enumerate(header) if h.startswith(prefix) and h[len(prefix):].isdigit()]
    return data[:, idx]


def _solution_rows(prefs, theta, L):
    return [[k, *prefs[k], *theta[k], *L[k]] for k in range(len(L))]


def _solution_header(m: int, n: int) -> list[str]:
    return ["index", *[f"pref_{i + 1}" for i in range(m)], *[f"x_{j + 1}" for j in range(n)],
            *[f"f_{i + 1}" for i in range(m)]]


def _quantize(a: np.ndarray) -> np.ndarray:
    """Round through the CSV text format so metrics match a re-read of the files."""
    return np.vectorize(lambda v: float(fmt(v)))(np.asarray(a, dtype=float))


def cell_dir(out: Path, cell: str) -> Path:
    return out / cell.lower().replace(":", "-").replace("_", "-")


def run_cell(cfg: ExperimentConfig, cell: str, seed: int) -> dict:
    """Run one (cell, seed); returns ``{"metrics": ...}`` or ``{"error": ...}``.

    Files go to ``<out>/<cell>/seed<seed>.csv``.
    """
    problem = get_problem(cfg.problem, cfg.n)
    sec = cfg.section
    d = cell_dir(cfg.out, cell)
    path = d / f"seed{seed}.csv"
    d.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.kind == "solve":
            rc = RunConfig(K=sec["K"], iters=sec["iters"], lr=sec["lr"], seed=seed,
                           optimizer=sec["optimizer"], lr_schedule=sec["lr_schedule"],
                           svgd_repulsion=sec["svgd_repulsion"], svgd_warmup=sec["svgd_warmup"])
            res = descend(problem, cell, cfg=rc)
            prefs, theta, L = res.preferences, res.solutions, res.objectives
            write_csv(path, _solution_header(problem.m, problem.n), _solution_rows(prefs, theta, L))
        elif cfg.kind == "psl":
            pc = PslConfig(steps=sec["steps"], batch_K=sec["batch_K"], lr=sec["lr"], weight_source=cell,
                           jacobian_mode=sec["jacobian_mode"], optimizer=sec["optimizer"],
                           hidden=tuple(sec["hidden"]))
            model = psl_train(problem, pc, seed)
            save_model(model, d / f"seed{seed}.psm")
            res = psl_evaluate(model, problem, uniform_preferences(sec["grid"], problem.m), seed)
            prefs, theta, L = res.preferences, res.solutions, res.objectives
            write_csv(path, _solution_header(problem.m, problem.n), _solution_rows(prefs, theta, L))
        else:
            ac = AcquisitionConfig(batch_q=sec["batch_q"], direction_count=sec["direction_count"],
                                   beta=sec["beta"], restarts=sec["restarts"], psl_steps=sec["psl_steps"],
                                   ref_point=tuple(cfg.metrics["ref_point"]))
            if cell == "random":
                hist = random_search(problem, sec["budget"], seed, ac.ref_point)
            else:
                hist = mobo_run(problem, cell, sec["budget"], ac, seed)
            header = ["eval", *[f"x_{j + 1}" for j in range(problem.n)],
                      *[f"f_{i + 1}" for i in range(problem.m)], "hv"]
            write_csv(path, header, [[i, *hist.X[i], *hist.Y[i], hist.hv[i]] for i in range(len(hist))])
            L = pareto_filter(hist.Y)
            prefs = None
    except (RunAborted, ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("cell %s seed %d failed: %s", cell, seed, exc)
        return {"error": str(exc)}
    mc = MetricConfig(ref_point=tuple(cfg.metrics["ref_point"]), h=cfg.metrics["h"],
                      reference_set=pareto_front_samples(problem, cfg.metrics["reference_size"]))
    Lq = _quantize(L)
    if prefs is None:
        vals = all_metrics(Lq, np.full_like(Lq, 1.0 / problem.m), mc)
        for k in ("pbi", "ip", "cross_angle"):
            vals[k] = float("nan")
    else:
        vals = all_metrics(Lq, _quantize(prefs), mc)
    return {"metrics": vals}


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class ResultTable:
    """Per-(cell, metric) mean and standard deviation over the seeds that completed.

    ``failures`` maps ``(cell, seed)`` to the error message of aborted runs.
    The standard deviation is the population one (``ddof = 0``).
    """

    cells: list[str]
    metrics: list[str]
    seeds: list[int]
    values: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    failures: dict[tuple[str, int], str] = field(default_factory=dict)

    def mean(self, cell: str, metric: str) -> float:
        v = self.values.get((cell, metric), [])
        return float(np.mean(v)) if v else float("nan")

    def std(self, cell: str, metric: str) -> float:
        v = self.values.get((cell, metric), [])
        return float(np.std(v)) if v else float("nan")

    def cell_text(self, cell: str, metric: str) -> str:
        mu, sd = self.mean(cell, metric), self.std(cell, metric)
        if math.isnan(mu):
            return "missing" if not self.values.get((cell, metric)) else "nan"
        return f"{mu:.3f} ({sd:.3f})"

    @property
    def failed(self) -> bool:
        return bool(self.failures)

    def rows(self) -> list[list[str]]:
        return [[c, *[self.cell_text(c, m) for m in self.metrics]] for c in self.cells]

    def format(self) -> str:
        header = ["method", *self.metrics]
        body = self.rows()
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [header, *body]]
        if self.failures:
            lines.append("failed cells: " + ", ".join(f"{c} seed {s}" for c, s in sorted(self.failures)))
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "seeds": self.seeds,
            "metrics": self.metrics,
            "cells": {
                c: {m: {"mean": _json_float(self.mean(c, m)), "std": _json_float(self.std(c, m)),
                        "n": len(self.values.get((c, m), []))} for m in self.metrics}
                for c in self.cells
            },
            "failures": [{"cell": c, "seed": s, "error": e} for (c, s), e in sorted(self.failures.items())],
        }

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "table.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", *self.metrics])
            w.writerows(self.rows())
        (out / "table.json").write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _json_float(x: float):
    return None if math.isnan(x) else float(fmt(x))


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run all cells over all seeds, then write per-run CSVs, the table and a manifest.

    Cells run in a process pool when ``cfg.workers > 1``; every cell is seeded
    on its own, so results do not depend on scheduling.  A failing cell is
    recorded in ``ResultTable.failures`` and does not stop the others.
    """
    cells = cfg.cells
    if cfg.kind == "mobo" and cfg.section.get("baseline") and "random" not in cells:
        cells = [*cells, "random"]
    jobs = [(cfg, c, s) for c in cells for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [_run_cell_args(j) for j in jobs]
    metrics = list(cfg.metrics["table"])
    table = ResultTable(cells, metrics, list(cfg.seeds))
    for (_, cell, seed), res in zip(jobs, results):
        if "error" in res:
            table.failures[(cell, seed)] = res["error"]
            continue
        for m in metrics:
            table.values.setdefault((cell, m), []).append(res["metrics"][m])
    table.write(cfg.out)
    manifest = {
        "kind": cfg.kind,
        "problem": cfg.problem,
        "n": cfg.n,
        "seeds": cfg.seeds,
        "cells": {c: str(cell_dir(cfg.out, c).relative_to(cfg.out)) for c in cells},
        "ref_point": list(cfg.metrics["ref_point"]),
    }
    (cfg.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return table
