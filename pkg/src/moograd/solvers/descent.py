"""The shared descent loop that drives every finite-set solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Callable

import numpy as np

from ..aggregation import AggregationSpec, aggregate_grad
from ..problems import Problem
from .hvgrad import hv_gradient
from .svgd import svgd_step
from .weights import (
    GradientBundle,
    epo_weights,
    min_norm_weights,
    pmgda_weights,
    pmtl_weights,
    random_weights,
)

log = logging.getLogger(__name__)

SOLVERS = ("epo", "pmgda", "mgda", "pmtl", "moosvgd", "hvgrad", "random", "agg")
PREFERENCE_BASED = {"epo", "pmgda", "agg"}


class RunAborted(RuntimeError):
    """A descent run produced non-finite objectives."""


def uniform_preferences(K: int, m: int = 2) -> np.ndarray:
    """K strictly positive preferences spread evenly over the simplex.

    For two objectives this is the midpoint grid ``lam_1 = (k + 1/2) / K``.
    For more objectives K must be a simplex-lattice size ``C(H + m - 1, m - 1)``;
    the lattice is shrunk slightly toward the centroid to stay interior.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if m == 2:
        t = (np.arange(K) + 0.5) / K
        return np.stack([t, 1.0 - t], axis=1)
    H = 0
    while comb(H + m - 1, m - 1) < K:
        H += 1
    if comb(H + m - 1, m - 1) != K:
        raise ValueError(f"K={K} is not a simplex-lattice size for m={m}")
    pts = []
    for c in combinations_with_replacement(range(m), H):
        pts.append(np.bincount(c, minlength=m) / max(H, 1))
    lattice = np.array(pts) if H else np.full((1, m), 1.0 / m)
    return 0.99 * lattice + 0.01 / m


@dataclass
class RunConfig:
    """Settings for one descent run of K subproblems.

    ``optimizer`` is ``"sgd"`` (plain gradient descent), ``"momentum"`` or
    ``"adam"``; the solver direction is handed to it unchanged.
    """

    K: int = 10
    iters: int = 1000
    lr: float = 1e-2
    seed: int = 0
    preferences: np.ndarray | None = None
    optimizer: str = "adam"
    momentum: float = 0.9
    lr_schedule: str = "cosine"
    hv_ref: tuple[float, ...] | None = None
    svgd_bandwidth: float | None = None
    svgd_repulsion: float = 0.01
    svgd_warmup: float = 0.5
    epo_eps: float = 1e-5
    pmgda_tolerance: float = 1e-5
    pmgda_sigma: float = 0.5
    pmtl_restrict_frac: float = 0.4

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")

    def lr_at(self, it: int) -> float:
        if self.lr_schedule == "constant" or self.iters <= 1:
            return self.lr
        return 0.5 * self.lr * (1.0 + np.cos(np.pi * it / (self.iters - 1)))

    def preference_set(self, m: int) -> np.ndarray:
        if self.preferences is None:
            return uniform_preferences(self.K, m)
        prefs = np.asarray(self.preferences, dtype=float)
        if prefs.shape != (self.K, m):
            raise ValueError(f"preference set must have shape ({self.K}, {m})")
        if np.any(prefs < 0) or not np.allclose(prefs.sum(axis=1), 1.0):
            raise ValueError("preferences must lie on the simplex")
        return prefs


@dataclass
class SolutionSet:
    """Final decision vectors and objectives with their provenance."""

    solutions: np.ndarray
    objectives: np.ndarray
    preferences: np.ndarray
    solver: str
    seed: int

    def __post_init__(self):
        if not (len(self.solutions) == len(self.objectives) == len(self.preferences)):
            raise ValueError("solutions, objectives and preferences must be parallel")

    def __len__(self):
        return len(self.solutions)


class Optimizer:
    def __init__(self, kind: str, shape, momentum: float = 0.9):
        self.kind = kind
        self.beta = momentum
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, d: np.ndarray, lr: float) -> np.ndarray:
        if self.kind == "sgd":
            return lr * d
        if self.kind == "momentum":
            self.m = self.beta * self.m + d
            return lr * self.m
        self.t += 1
        b1, b2 = 0.9, 0.999
        self.m = b1 * self.m + (1 - b1) * d
        self.v = b2 * self.v + (1 - b2) * d * d
        mhat = self.m / (1 - b1**self.t)
        vhat = self.v / (1 - b2**self.t)
        return lr * mhat / (np.sqrt(vhat) + 1e-8)


def parse_solver(solver_id: str, spec: AggregationSpec | None = None):
    """Split ids like ``"agg-tche"`` into ``("agg", AggregationSpec("tche"))``."""
    sid = solver_id.lower()
    for sep in ("-", "_", ":"):
        head, _, tail = sid.partition(sep)
        if head == "agg" and tail:
            return "agg", AggregationSpec(tail) if spec is None else spec
    if sid not in SOLVERS:
        raise ValueError(f"unknown solver {solver_id!r}; choose from {SOLVERS}")
    if sid == "agg" and spec is None:
        raise ValueError("solver 'agg' needs an aggregation spec")
    return sid, spec


def _directions(solver, spec, theta, L, J, prefs, cfg, state, it):
    K, m, _ = J.shape
    bundles = [GradientBundle(J[k], L[k], prefs[k]) for k in range(K)]
    if solver == "moosvgd":
        # repulsion waits until particles leave flat regions, where it
        # would otherwise swamp the vanishing gradients
        rep = cfg.svgd_repulsion if it >= cfg.svgd_warmup * cfg.iters else 0.0
        D = svgd_step(theta, bundles, cfg.svgd_bandwidth, rep)
        return None, D
    W = np.empty((K, m))
    if solver == "agg":
        for k in range(K):
            W[k] = aggregate_grad(spec, L[k], prefs[k])
    elif solver == "mgda":
        for k, b in enumerate(bundles):
            W[k] = min_norm_weights(b.jac).alpha
    elif solver == "epo":
        for k, b in enumerate(bundles):
            W[k] = epo_weights(b, cfg.epo_eps).alpha
    elif solver == "pmgda":
        for k, b in enumerate(bundles):
            W[k] = pmgda_weights(b, cfg.pmgda_tolerance, cfg.pmgda_sigma).alpha
    elif solver == "random":
        for k in range(K):
            W[k] = random_weights(m, state["rng"])
    elif solver == "pmtl":
        # before the stage switch a subproblem that drifts out of its sector
        # (adaptive steps void the first-order guarantee) restricts again
        stage = "restrict" if it < cfg.pmtl_restrict_frac * cfg.iters else "descend"
        for k, r in enumerate(pmtl_weights(bundles, prefs, stage)):
            W[k] = r.alpha
    elif solver == "hvgrad":
        ref = np.asarray(cfg.hv_ref if cfg.hv_ref is not None else (1.2,) * m, dtype=float)
        G = -hv_gradient(L, ref)
        for k, b in enumerate(bundles):
            s = G[k].sum()
            W[k] = G[k] / s if s > 0 else min_norm_weights(b.jac).alpha
    D = np.einsum("km,kmn->kn", W, J)
    return W, D


def descend(
    problem: Problem,
    solver_id: str,
    spec: AggregationSpec | None = None,
    cfg: RunConfig | None = None,
    callback: Callable | None = None,
) -> SolutionSet:
    """Run ``cfg.iters`` descent updates for each of the K subproblems.

    Initial iterates are uniform in the problem box, drawn from ``cfg.seed``,
    so every solver starts from the same points for a given seed.  After
    each update the iterates are clipped back into the box.

    ``callback(it, theta, L, weights, directions)`` is invoked before every
    update; ``weights`` is ``None`` for MOO-SVGD, whose direction is not a
    combination of a single particle's gradients.
    """
    cfg = cfg or RunConfig()
    solver, spec = parse_solver(solver_id, spec)
    m, n, K = problem.m, problem.n, cfg.K
    prefs = cfg.preference_set(m)
    rng = np.random.default_rng(cfg.seed)
    theta = rng.uniform(problem.lower, problem.upper, size=(K, n))
    state = {"rng": np.random.default_rng([cfg.seed, 1])}
    opt = Optimizer(cfg.optimizer, theta.shape, cfg.momentum)
    name = solver if spec is None else f"agg-{spec.kind}"
    for it in range(cfg.iters):
        L = problem.evaluate(theta)
        if not np.all(np.isfinite(L)):
            raise RunAborted(f"{name} on {problem.name}: non-finite objectives at iteration {it}")
        J = problem.jacobian(theta)
        W, D = _directions(solver, spec, theta, L, J, prefs, cfg, state, it)
        if callback is not None:
            callback(it, theta, L, W, D)
        theta = problem.clip(theta - opt.step(D, cfg.lr_at(it)))
    L = problem.evaluate(theta)
    if not np.all(np.isfinite(L)):
        raise RunAborted(f"{name} on {problem.name}: non-finite final objectives")
    return SolutionSet(theta, L, prefs, name, cfg.seed)
