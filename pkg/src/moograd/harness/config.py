"""Experiment configuration files.

A config is a TOML document with an ``[experiment]`` table, one table for the
experiment kind (``[solve]``, ``[psl]`` or ``[mobo]``) and an optional
``[metrics]`` table.  Unknown tables or keys are rejected.  The full schema
with defaults is ``SCHEMA``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..aggregation import KINDS
from ..metrics import ALL_METRICS
from ..mobo import ALGOS
from ..problems import PROBLEMS
from ..psl import SOLVER_SOURCES
from ..solvers import parse_solver

TABLE_METRICS = ("lmin", "slmin", "spacing", "span", "hv", "ip", "cross_angle", "pbi")

SCHEMA: dict[str, dict[str, Any]] = {
    "experiment": {
        "kind": "solve",
        "problem": "vlmop2",
        "n": None,
        "seeds": [0],
        "out": "runs",
        "workers": 1,
    },
    "solve": {
        "solvers": ["epo"],
        "K": 10,
        "iters": 1000,
        "lr": 1e-2,
        "optimizer": "adam",
        "lr_schedule": "cosine",
        "svgd_repulsion": 0.01,
        "svgd_warmup": 0.5,
    },
    "psl": {
        "weight_sources": ["tche"],
        "steps": 3000,
        "batch_K": 32,
        "lr": 1e-3,
        "jacobian_mode": "analytic",
        "optimizer": "adam",
        "hidden": [64, 64],
        "grid": 100,
    },
    "mobo": {
        "algos": ["dirhv_ego"],
        "budget": 200,
        "batch_q": 5,
        "direction_count": 20,
        "beta": 2.0,
        "restarts": 512,
        "psl_steps": 1000,
        "baseline": True,
    },
    "metrics": {
        "ref_point": [1.2, 1.2],
        "reference_size": 1000,
        "h": 10.0,
        "table": list(TABLE_METRICS),
    },
}


class ConfigError(ValueError):
    """The configuration file is malformed or references unknown ids."""


@dataclass
class ExperimentConfig:
    """Validated experiment settings; ``section`` holds the kind's own table."""

    kind: str
    problem: str
    n: int | None
    seeds: list[int]
    out: Path
    workers: int
    section: dict[str, Any]
    metrics: dict[str, Any] = field(default_factory=lambda: dict(SCHEMA["metrics"]))

    @property
    def cells(self) -> list[str]:
        key = {"solve": "solvers", "psl": "weight_sources", "mobo": "algos"}[self.kind]
        return list(self.section[key])


def _merge(name: str, given: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = set(given) - set(SCHEMA[name])
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}")
    out = {k: (list(v) if isinstance(v, list) else v) for k, v in SCHEMA[name].items()}
    out.update(given)
    return out


def from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed document against ``SCHEMA``."""
    unknown = set(data) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown table(s): {', '.join(sorted(unknown))}")
    exp = _merge("experiment", data.get("experiment", {}))
    kind = exp["kind"]
    if kind not in ("solve", "psl", "mobo"):
        raise ConfigError(f"experiment kind must be solve, psl or mobo, not {kind!r}")
    for other in ("solve", "psl", "mobo"):
        if other != kind and other in data:
            raise ConfigError(f"[{other}] given for a {kind!r} experiment")
    section = _merge(kind, data.get(kind, {}))
    metrics = _merge("metrics", data.get("metrics", {}))

    if exp["problem"] not in PROBLEMS:
        raise ConfigError(f"unknown problem {exp['problem']!r}; choose from {sorted(PROBLEMS)}")
    seeds = exp["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers")
    if int(exp["workers"]) < 1:
        raise ConfigError("workers must be >= 1")
    if kind == "solve":
        for sid in section["solvers"]:
            try:
                parse_solver(sid)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    elif kind == "psl":
        for src in section["weight_sources"]:
            s = src.lower().removeprefix("agg-")
            if s not in KINDS and s not in SOLVER_SOURCES:
                raise ConfigError(f"unknown PSL weight source {src!r}")
    else:
        for algo in section["algos"]:
            if algo not in ALGOS:
                raise ConfigError(f"unknown MOBO algorithm {algo!r}; choose from {ALGOS}")
    bad = [m for m in metrics["table"] if m not in ALL_METRICS]
    if bad:
        raise ConfigError(f"unknown metric(s): {', '.join(bad)}")
    return ExperimentConfig(kind, exp["problem"], exp["n"], list(seeds), Path(exp["out"]),
                            int(exp["workers"]), section, metrics)


def load_config(path) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)
