"""Dynamic weight solvers.

Every gradient-manipulation method here produces a weight vector ``alpha``
per iteration; the update direction is then ``alpha @ jac``, i.e. plain
gradient descent on ``sum_i alpha_i L_i`` for that iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .simplex import simplex_lp, simplex_qp

STATIONARY_TOL = 1e-10


@dataclass
class GradientBundle:
    """Jacobian ``jac`` (m x n) and objective vector ``L`` at one iterate."""

    jac: np.ndarray
    L: np.ndarray
    lam: np.ndarray | None = None

    def __post_init__(self):
        self.jac = np.atleast_2d(np.asarray(self.jac, dtype=float))
        self.L = np.asarray(self.L, dtype=float)
        if self.lam is not None:
            self.lam = np.asarray(self.lam, dtype=float)
        if self.jac.shape[0] != self.L.size:
            raise ValueError(f"jacobian has {self.jac.shape[0]} rows but L has {self.L.size} entries")
        if not np.all(np.isfinite(self.jac)):
            raise ValueError("non-finite entries in jacobian")

    @property
    def gram(self) -> np.ndarray:
        return self.jac @ self.jac.T


class WeightResult(NamedTuple):
    alpha: np.ndarray
    stationary: bool = False
    mode: str = ""


def _min_norm_gram(C: np.ndarray) -> np.ndarray:
    m = C.shape[0]
    if m == 1:
        return np.ones(1)
    if m == 2:
        denom = C[0, 0] + C[1, 1] - 2.0 * C[0, 1]
        if denom <= 0:
            return np.full(2, 0.5)
        a = np.clip((C[1, 1] - C[0, 1]) / denom, 0.0, 1.0)
        return np.array([a, 1.0 - a])
    return simplex_qp(C)


def _is_stationary(C: np.ndarray, alpha: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.diag(C))))
    return float(alpha @ C @ alpha) <= STATIONARY_TOL**2 * scale


def min_norm_weights(jac) -> WeightResult:
    """Minimum-norm element of the convex hull of the gradient rows (MGDA).

    Uses the closed form for two objectives and Frank-Wolfe otherwise.  A
    zero Jacobian yields uniform weights with ``stationary=True``.
    """
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    m = jac.shape[0]
    if m < 2:
        raise ValueError("min-norm weights need at least two objectives")
    C = jac @ jac.T
    if not np.any(C):
        return WeightResult(np.full(m, 1.0 / m), True, "mgda")
    alpha = _min_norm_gram(C)
    return WeightResult(alpha, _is_stationary(C, alpha), "mgda")


def random_weights(m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the simplex."""
    if m < 2:
        raise ValueError("need m >= 2")
    return rng.dirichlet(np.ones(m))


def _check_pref(bundle: GradientBundle) -> np.ndarray:
    lam = bundle.lam
    if lam is None:
        raise ValueError("this solver needs a preference vector")
    if lam.size != bundle.L.size or np.any(lam <= 0):
        raise ValueError("preference must be strictly positive with one entry per objective")
    return lam


def epo_adjustment(L, lam):
    """Non-uniformity ``mu`` of ``L / lam`` and EPO's adjustment direction.

    Exactness here means ``L`` parallel to ``lam``, so EPO's ray weights are
    ``r = 1 / lam``; ``mu`` is the KL divergence of the normalized ``r * L``
    from uniform and vanishes exactly on the preference ray.
    """
    m = L.size
    r = 1.0 / lam
    rl = r * np.maximum(L, np.finfo(float).tiny)
    l_hat = rl / rl.sum()
    log_term = np.log(l_hat * m)
    mu = float(np.sum(l_hat * log_term))
    return rl, mu, r * (log_term - mu)


def epo_weights(bundle: GradientBundle, eps: float = 1e-5) -> WeightResult:
    """Exact Pareto optimal search weights.

    Away from the preference ray (non-uniformity above ``eps``) an LP picks
    the weights that best realign ``L`` with the ray while never increasing
    the most over-represented objective.  On the ray the weights are the
    min-norm (common descent) weights, restricted so alignment does not
    deteriorate.
    """
    lam = _check_pref(bundle)
    C = bundle.gram
    m = C.shape[0]
    if not np.any(C):
        return WeightResult(np.full(m, 1.0 / m), True, "stationary")
    rl, mu, adj = epo_adjustment(bundle.L, lam)
    Ca = C @ adj
    if mu > eps:
        J = Ca > 0
        if np.any(J):
            rhs = Ca.copy()
            rhs[J] = -np.inf
            rhs[rl == rl.max()] = 0.0
        else:
            rhs = np.zeros(m)
        alpha = simplex_lp(Ca, C, rhs)
        if alpha is None:
            alpha = simplex_lp(Ca)
        return WeightResult(alpha, _is_stationary(C, alpha), "balance")
    alpha = simplex_qp(C, A=Ca[None, :], b=[min(Ca.max(), 0.0)])
    if alpha is None:
        alpha = _min_norm_gram(C)
    return WeightResult(alpha, _is_stationary(C, alpha), "descent")


def exactness_residual(L, lam):
    """``h = 1 - cos(L, lam)`` and its gradient w.r.t. ``L``."""
    L = np.asarray(L, dtype=float)
    u = lam / np.linalg.norm(lam)
    nL = np.linalg.norm(L)
    if nL == 0:
        return 0.0, np.zeros_like(L)
    cos = float(u @ L / nL)
    grad = -(u - cos * L / nL) / nL
    return 1.0 - cos, grad


def pmgda_weights(
    bundle: GradientBundle, constraint_tolerance: float = 1e-5, sigma: float = 0.5
) -> WeightResult:
    """Preference-constrained MGDA weights.

    The exactness demand is the constraint ``h(L) = 1 - cos(L, lam) = 0``.
    Weights minimize the norm of the combined gradient subject to the
    first-order decrease of ``h`` being at least ``sigma * h`` whenever ``h``
    exceeds ``constraint_tolerance`` (and non-negative otherwise).  If no
    simplex point achieves that rate, the weights that decrease ``h`` fastest
    are returned instead.
    """
    lam = _check_pref(bundle)
    C = bundle.gram
    m = C.shape[0]
    if not np.any(C):
        return WeightResult(np.full(m, 1.0 / m), True, "stationary")
    h, dh = exactness_residual(bundle.L, lam)
    rate = C @ dh
    target = sigma * h if h > constraint_tolerance else 0.0
    alpha = simplex_qp(C, A=rate[None, :], b=[target])
    mode = "constrained" if h > constraint_tolerance else "descent"
    if alpha is None:
        alpha = simplex_lp(rate)
        mode = "restore"
    return WeightResult(alpha, _is_stationary(C, alpha), mode)


def sector_constraints(L, prefs, k: int) -> np.ndarray:
    """Values ``(u_j - u_k) . L`` for all j; positive means outside sector k."""
    U = np.asarray(prefs, dtype=float)
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    return (U - U[k]) @ L


def pmtl_weights(
    bundles: Sequence[GradientBundle],
    preference_set,
    phase: str | Sequence[str],
    active_eps: float = 1e-2,
    margin: float = 1e-4,
) -> list[WeightResult]:
    """Pareto multi-task learning weights for K subproblems.

    Subproblem k lives in the sector of ``u_k`` (its preference scaled to unit
    length).  In the ``restrict`` phase the weights reduce the violated
    sector constraints; once none is violated the subproblem switches to
    ``descend``, where the weights are the min-norm combination of the
    objective gradients and the near-active constraint gradients.  Since each
    constraint gradient is ``(u_j - u_k) @ jac``, the result is still one
    m-vector of coefficients on the Jacobian rows, but it may leave the
    simplex.  A constraint counts as violated in the ``restrict`` phase unless
    it holds with ``margin`` to spare, so an iterate sitting on a sector
    boundary (for instance in a flat region where all objectives saturate)
    keeps restricting.
    """
    prefs = np.asarray(preference_set, dtype=float)
    K, m = prefs.shape
    if len(bundles) != K:
        raise ValueError(f"got {len(bundles)} bundles for {K} preferences")
    phases = [phase] * K if isinstance(phase, str) else list(phase)
    U = prefs / np.linalg.norm(prefs, axis=1, keepdims=True)
    out = []
    for k, bundle in enumerate(bundles):
        g = sector_constraints(bundle.L, prefs, k)
        others = np.arange(K) != k
        C = bundle.gram
        violated = others & (g > -margin)
        if phases[k] == "restrict" and np.any(violated):
            coef = U[violated] - U[k]
            beta = _min_norm_gram(coef @ C @ coef.T)
            alpha = beta @ coef
            out.append(WeightResult(alpha, _is_stationary(C, alpha), "restrict"))
            continue
        active = others & (g >= -active_eps)
        coef = np.vstack([np.eye(m), U[active] - U[k]])
        beta = _min_norm_gram(coef @ C @ coef.T)
        alpha = beta @ coef
        out.append(WeightResult(alpha, _is_stationary(C, alpha), "descend"))
    return out
