"""Batch Bayesian optimization loops: DirHV-EGO, PSL-DirHV-EI and PSL-MOBO."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..metrics import hv, nondominated_mask
from ..problems import Problem
from ..psl import forward, init_model, sample_dirichlet, vjp
from ..solvers.descent import Optimizer, uniform_preferences
from .acquisition import (
    ALGOS,
    AcquisitionConfig,
    acq_dirhv_ei,
    acq_tlcb,
    acq_tlcb_grad,
    compute_xi,
    log_acq_dirhv_ei,
)
from .gp import GPFitError, GPModel, gp_fit, gp_predict
from .lhs import latin_hypercube

log = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-8


def initial_count(n: int) -> int:
    """Size of the initial design, ``11 n - 1``."""
    return 11 * n - 1


@dataclass
class MoboHistory:
    """Every evaluation in order, with the hypervolume of the archive after each."""

    X: np.ndarray
    Y: np.ndarray
    hv: np.ndarray
    algo: str
    seed: int
    n_init: int

    def __len__(self):
        return len(self.X)


def hv_trace(Y, ref) -> np.ndarray:
    """Hypervolume of ``Y[: i + 1]`` for every ``i``."""
    Y = np.asarray(Y, dtype=float)
    return np.array([hv(Y[: i + 1], ref) for i in range(len(Y))])


class _Surrogate:
    def __init__(self, problem: Problem, cfg: AcquisitionConfig, rng: np.random.Generator):
        self.problem = problem
        self.cfg = cfg
        self.rng = rng
        self.models: list[GPModel] = []

    def fit(self, X: np.ndarray, Y: np.ndarray) -> None:
        prev = self.models
        bounds = (self.problem.lower, self.problem.upper)
        self.models = [
            gp_fit(X, Y[:, i], bounds, self.cfg.gp_restarts, self.rng,
                   init=prev[i].log_params if prev else None, min_jitter=self.cfg.gp_jitter)
            for i in range(Y.shape[1])
        ]

    def predict(self, X: np.ndarray):
        out = [gp_predict(g, X) for g in self.models]
        return np.stack([o[0] for o in out], axis=-1), np.stack([o[1] for o in out], axis=-1)

    def predict_grad(self, X: np.ndarray):
        out = [gp_predict(g, X, return_grad=True) for g in self.models]
        mu, sd, dmu, dsd = (np.stack([o[k] for o in out], axis=1) for k in range(4))
        return mu, sd, dmu, dsd  # (B, m), (B, m), (B, m, n), (B, m, n)


def _scaled(problem: Problem, X: np.ndarray) -> np.ndarray:
    return (X - problem.lower) / (problem.upper - problem.lower)


def _is_new(problem: Problem, x: np.ndarray, taken: list[np.ndarray]) -> bool:
    if not taken:
        return True
    T = _scaled(problem, np.asarray(taken))
    return bool(np.min(np.linalg.norm(T - _scaled(problem, x), axis=1)) > DUPLICATE_TOL)


def _fill_random(problem: Problem, chosen: list, taken: list, q: int, rng) -> list:
    while len(chosen) < q:
        x = rng.uniform(problem.lower, problem.upper)
        if _is_new(problem, x, taken + chosen):
            chosen.append(x)
    return chosen


def _maximize_dirhv(sur: _Surrogate, dirs: np.ndarray, xis: np.ndarray, rng) -> np.ndarray:
    """One maximizer of DirHV-EI per direction: best of random starts, then coordinate polish."""
    problem, cfg = sur.problem, sur.cfg
    lo, hi = problem.lower, problem.upper
    n = problem.n
    starts = rng.uniform(lo, hi, size=(cfg.restarts, n))
    mu, sd = sur.predict(starts)
    A = log_acq_dirhv_ei(mu[:, None, :], sd[:, None, :], xis[None, :, :])  # (R, P)
    P = len(dirs)
    x = starts[np.argmax(A, axis=0)]
    val = A[np.argmax(A, axis=0), np.arange(P)]
    step = np.full(P, cfg.polish_step)
    moves = np.concatenate([np.eye(n), -np.eye(n)])  # (2n, n)
    for _ in range(cfg.polish_iters):
        if np.all(step < 1e-6):
            break
        nb = np.clip(x[:, None, :] + step[:, None, None] * moves[None] * (hi - lo), lo, hi)
        mu, sd = sur.predict(nb.reshape(-1, n))
        a = log_acq_dirhv_ei(mu.reshape(P, 2 * n, -1), sd.reshape(P, 2 * n, -1), xis[:, None, :])
        best = np.argmax(a, axis=1)
        gain = a[np.arange(P), best] > val
        x = np.where(gain[:, None], nb[np.arange(P), best], x)
        val = np.where(gain, a[np.arange(P), best], val)
        step = np.where(gain, step, step / 2)
    return x


def _dirhv_ego_batch(sur: _Surrogate, X, Y, q: int, rng) -> list:
    m = Y.shape[1]
    dirs = uniform_preferences(sur.cfg.direction_count, m)
    xis = compute_xi(dirs, Y.min(axis=0) - sur.cfg.utopia_offset, Y)
    C = _maximize_dirhv(sur, dirs, xis, rng)
    mu, sd = sur.predict(C)
    A = acq_dirhv_ei(mu[:, None, :], sd[:, None, :], xis[None, :, :])  # candidate x direction
    # greedy batch: maximize sum over directions of the best improvement covered
    cover = np.zeros(len(dirs))
    chosen: list = []
    taken = list(X)
    avail = np.ones(len(C), dtype=bool)
    while len(chosen) < q and avail.any():
        gain = np.where(avail, np.maximum(A - cover, 0.0).sum(axis=1), -np.inf)
        j = int(np.argmax(gain))
        avail[j] = False
        if not _is_new(sur.problem, C[j], taken + chosen):
            continue
        chosen.append(C[j])
        cover = np.maximum(cover, A[j])
    return _fill_random(sur.problem, chosen, taken, q, rng)


def _acq_score(kind: str, mu, sd, lams, z, Y, beta: float):
    """Acquisition to maximize for each (preference, candidate) pair: ``(P, R)``."""
    if kind == "tlcb":
        return -acq_tlcb(mu[None], sd[None], lams[:, None, :], z, beta)
    xis = compute_xi(np.maximum(lams, 1e-6), z, Y)
    return log_acq_dirhv_ei(mu[None], sd[None], xis[:, None, :])


def _train_acquisition_psl(sur: _Surrogate, X: np.ndarray, Y: np.ndarray, kind: str, rng):
    """Fit a Pareto set model that optimizes the acquisition over preferences.

    The model is first regressed, for each sampled preference, onto the best
    point under the acquisition among random restarts and the archive; the
    gradient-based acquisition ascent then refines that start.
    """
    problem, cfg = sur.problem, sur.cfg
    m = Y.shape[1]
    z = Y.min(axis=0) - cfg.utopia_offset
    pool = np.vstack([rng.uniform(problem.lower, problem.upper, size=(cfg.restarts, problem.n)), X])
    pool_mu, pool_sd = sur.predict(pool)
    model = init_model(problem, rng=rng)
    p = np.ones(m)
    opt = Optimizer("adam", model.phi.shape)
    phi = model.phi.copy()
    for _ in range(cfg.psl_warm_steps):
        lams = sample_dirichlet(p, rng, cfg.psl_batch)
        target = pool[np.argmax(_acq_score(kind, pool_mu, pool_sd, lams, z, Y, cfg.beta), axis=1)]
        u = 2.0 * (forward(model, lams) - target)
        phi = phi - opt.step(vjp(model, lams, u) / len(lams), cfg.psl_warm_lr)
        model = model.with_params(phi)
    opt = Optimizer("adam", model.phi.shape)
    for _ in range(cfg.psl_steps):
        lams = sample_dirichlet(p, rng, cfg.psl_batch)
        theta = forward(model, lams)
        mu, sd, dmu, dsd = sur.predict_grad(theta)
        if kind == "tlcb":
            g_mu, g_sd = acq_tlcb_grad(mu, sd, lams, z, cfg.beta)
        else:
            # ascend log DirHV-EI: same maximizers, no underflow far from xi
            xis = compute_xi(np.maximum(lams, 1e-6), z, Y)
            _, g_mu, g_sd = log_acq_dirhv_ei(mu, sd, xis, with_grad=True)
            g_mu, g_sd = -g_mu, -g_sd
        g_theta = np.einsum("bm,bmn->bn", g_mu, dmu) + np.einsum("bm,bmn->bn", g_sd, dsd)
        phi = phi - opt.step(vjp(model, lams, g_theta) / len(lams), cfg.psl_lr)
        model = model.with_params(phi)
    return model


def _greedy_hvi(front: np.ndarray, cands: np.ndarray, ref: np.ndarray, q: int) -> list[int]:
    chosen: list[int] = []
    cur = front
    base = hv(cur, ref)
    for _ in range(q):
        best, best_gain = -1, 0.0
        for j in range(len(cands)):
            if j in chosen:
                continue
            if np.any(np.all(cur <= cands[j], axis=1)):
                continue  # weakly dominated: no improvement
            g = hv(np.vstack([cur, cands[j]]), ref) - base
            if g > best_gain:
                best, best_gain = j, g
        if best < 0:
            break
        chosen.append(best)
        cur = np.vstack([cur, cands[best]])
        base += best_gain
    return chosen


def _psl_batch(sur: _Surrogate, X, Y, q: int, kind: str, rng) -> list:
    model = _train_acquisition_psl(sur, X, Y, kind, rng)
    lams = sample_dirichlet(np.ones(Y.shape[1]), rng, sur.cfg.psl_candidates)
    C = forward(model, lams)
    mu, sd = sur.predict(C)
    front = Y[nondominated_mask(Y)]
    ref = np.full(Y.shape[1], 1.1)
    chosen: list = []
    taken = list(X)
    for j in _greedy_hvi(front, mu, ref, q):
        if _is_new(sur.problem, C[j], taken + chosen):
            chosen.append(C[j])
    if len(chosen) < q:
        # fall back to the best acquisition values among the model's candidates
        z = Y.min(axis=0) - sur.cfg.utopia_offset
        if kind == "tlcb":
            score = -acq_tlcb(mu, sd, lams, z, sur.cfg.beta)
        else:
            score = acq_dirhv_ei(mu, sd, compute_xi(np.maximum(lams, 1e-6), z, Y))
        for j in np.argsort(-score):
            if len(chosen) >= q:
                break
            if _is_new(sur.problem, C[j], taken + chosen):
                chosen.append(C[j])
    return _fill_random(sur.problem, chosen, taken, q, rng)


def mobo_run(problem: Problem, algo: str = "dirhv_ego", budget: int = 200,
             cfg: AcquisitionConfig | None = None, seed: int = 0,
             callback: Callable | None = None) -> MoboHistory:
    """Run one Bayesian optimization loop until ``budget`` evaluations.

    The loop starts from ``11 n - 1`` Latin hypercube points and then, each
    round, rescales the archive objectives to ``[0, 1]``, refits one GP per
    objective and evaluates a batch of ``batch_q`` new points (fewer in the
    last round if the budget requires).

    ``callback(round, X, Y)`` runs after every round.

    Raises:
        ValueError: unknown ``algo`` or a budget below the initial design.
    """
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    cfg = cfg or AcquisitionConfig()
    kind = cfg.kind_for(algo)
    n0 = initial_count(problem.n)
    if budget < n0:
        raise ValueError(f"budget {budget} is below the initial design size {n0}")
    rng = np.random.default_rng(seed)
    X = latin_hypercube(n0, problem.n, (problem.lower, problem.upper), rng)
    Y = problem.evaluate(X)
    sur = _Surrogate(problem, cfg, rng)
    rnd = 0
    while len(X) < budget:
        q = min(cfg.batch_q, budget - len(X))
        lo, hi = Y.min(axis=0), Y.max(axis=0)
        Yn = (Y - lo) / np.where(hi > lo, hi - lo, 1.0)
        try:
            sur.fit(X, Yn)
        except GPFitError as exc:
            log.warning("round %d: surrogate fit failed (%s); evaluating random points", rnd, exc)
            batch = _fill_random(problem, [], list(X), q, rng)
        else:
            if algo == "dirhv_ego":
                batch = _dirhv_ego_batch(sur, X, Yn, q, rng)
            else:
                batch = _psl_batch(sur, X, Yn, q, kind, rng)
        Xq = np.asarray(batch)
        X = np.vstack([X, Xq])
        Y = np.vstack([Y, problem.evaluate(Xq)])
        if callback is not None:
            callback(rnd, X, Y)
        rnd += 1
    return MoboHistory(X, Y, hv_trace(Y, cfg.ref_point), algo, seed, n0)


def random_search(problem: Problem, budget: int = 200, seed: int = 0,
                  ref_point=(1.2, 1.2)) -> MoboHistory:
    """Baseline: ``budget`` points drawn uniformly from the box."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(problem.lower, problem.upper, size=(budget, problem.n))
    Y = problem.evaluate(X)
    return MoboHistory(X, Y, hv_trace(Y, ref_point), "random", seed, 0)
