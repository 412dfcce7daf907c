"""Noise-free Gaussian process regression with an ARD squared-exponential kernel.

Inputs are scaled to the unit cube of the given bounds and targets are
standardized before fitting; predictions are returned in original units.
Hyperparameters (per-dimension lengthscales and the signal variance) maximize
the log marginal likelihood from several starting points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

log = logging.getLogger(__name__)

JITTERS = (1e-10, 1e-8, 1e-6, 1e-5, 1e-4)
LOG_LS_BOUNDS = (np.log(1e-2), np.log(1e2))
LOG_SF2_BOUNDS = (np.log(1e-2), np.log(1e2))


class GPFitError(RuntimeError):
    """The kernel matrix stayed indefinite at the largest jitter."""


@dataclass(eq=False)
class GPModel:
    """A fitted GP; construct with :func:`gp_fit`."""

    X: np.ndarray  # scaled training inputs
    lower: np.ndarray
    upper: np.ndarray
    y_mean: float
    y_std: float
    lengthscales: np.ndarray
    signal_var: float
    jitter: float
    chol: np.ndarray
    alpha: np.ndarray

    def scale(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    @property
    def log_params(self) -> np.ndarray:
        return np.append(np.log(self.lengthscales), np.log(self.signal_var))


def _kernel(A: np.ndarray, B: np.ndarray, ls: np.ndarray, sf2: float) -> np.ndarray:
    d = (A[:, None, :] - B[None, :, :]) / ls
    return sf2 * np.exp(-0.5 * np.sum(d * d, axis=-1))


def _cholesky(K: np.ndarray, min_jitter: float = JITTERS[0]):
    n = len(K)
    for jit in (j for j in JITTERS if j >= min_jitter):
        try:
            return cholesky(K + jit * np.eye(n), lower=True), jit
        except np.linalg.LinAlgError:
            continue
    raise GPFitError(f"Cholesky failed with jitter up to {JITTERS[-1]}")


def neg_log_marginal_likelihood(log_params, X, y, min_jitter: float = JITTERS[0]) -> tuple[float, np.ndarray]:
    """Negative log marginal likelihood and its gradient in log-parameter space."""
    n, d = X.shape
    ls = np.exp(log_params[:d])
    sf2 = float(np.exp(log_params[d]))
    K = _kernel(X, X, ls, sf2)
    try:
        Lc, jit = _cholesky(K, min_jitter)
    except GPFitError:
        return 1e25, np.zeros_like(log_params)
    a = cho_solve((Lc, True), y)
    nll = 0.5 * y @ a + np.sum(np.log(np.diag(Lc))) + 0.5 * n * np.log(2 * np.pi)
    W = np.outer(a, a) - cho_solve((Lc, True), np.eye(n))
    Kj = K + jit * np.eye(n)
    grad = np.empty(d + 1)
    for k in range(d):
        D2 = (X[:, None, k] - X[None, :, k]) ** 2 / ls[k] ** 2
        grad[k] = -0.5 * np.sum(W * K * D2)
    grad[d] = -0.5 * np.sum(W * Kj)
    return float(nll), grad


def gp_fit(X, y, bounds=None, restarts: int = 3, rng=None, init=None,
           min_jitter: float = JITTERS[0]) -> GPModel:
    """Fit a GP to ``y = f(X)`` by multi-start L-BFGS on the marginal likelihood.

    Args:
        X: ``(N, d)`` inputs, ``N >= 2``.
        y: ``(N,)`` targets.
        bounds: ``(lower, upper)`` of the input box; defaults to the data range.
        restarts: random starting points in addition to the default and ``init``.
        rng: seed or generator for the random starts.
        init: optional log-parameters to warm start from, e.g. the previous
            round's ``model.log_params``.
        min_jitter: smallest diagonal jitter tried.  The tiny default keeps
            the posterior mean interpolating; a larger floor regularizes the
            likelihood when the fit drives the next design choice.

    Raises:
        GPFitError: if no jitter up to 1e-4 makes the kernel matrix positive
            definite at the selected hyperparameters.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) < 2 or len(X) != len(y):
        raise ValueError("need at least two matching inputs and targets")
    d = X.shape[1]
    if bounds is None:
        lower, upper = X.min(axis=0), X.max(axis=0)
        upper = np.where(upper > lower, upper, lower + 1.0)
    else:
        lower = np.broadcast_to(np.asarray(bounds[0], dtype=float), (d,)).copy()
        upper = np.broadcast_to(np.asarray(bounds[1], dtype=float), (d,)).copy()
    Xs = (X - lower) / (upper - lower)
    y_mean = float(y.mean())
    y_std = float(y.std())
    if y_std < 1e-12:
        y_std = 1.0
    ys = (y - y_mean) / y_std

    rng = np.random.default_rng(rng)
    box = [LOG_LS_BOUNDS] * d + [LOG_SF2_BOUNDS]
    starts = [np.append(np.full(d, np.log(0.5)), 0.0)]
    if init is not None:
        starts.append(np.clip(np.asarray(init, dtype=float), *np.array(box).T))
    for _ in range(restarts):
        starts.append(np.append(rng.uniform(np.log(0.05), np.log(5.0), d), rng.uniform(-1.0, 1.0)))
    best = None
    for x0 in starts:
        res = minimize(neg_log_marginal_likelihood, x0, args=(Xs, ys, min_jitter), jac=True,
                       method="L-BFGS-B", bounds=box)
        if best is None or res.fun < best.fun:
            best = res
    ls = np.exp(best.x[:d])
    sf2 = float(np.exp(best.x[d]))
    Lc, jit = _cholesky(_kernel(Xs, Xs, ls, sf2), min_jitter)
    if jit > min_jitter:
        log.debug("GP fit needed jitter %g", jit)
    alpha = cho_solve((Lc, True), ys)
    return GPModel(Xs, lower, upper, y_mean, y_std, ls, sf2, jit, Lc, alpha)


def gp_predict(model: GPModel, x, return_grad: bool = False):
    """Predictive mean and standard deviation at ``x`` (``(d,)`` or ``(B, d)``).

    With ``return_grad`` also returns ``dmean/dx`` and ``dstd/dx`` of shape
    ``(B, d)`` (or ``(d,)`` for a single input).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    u = np.atleast_2d(model.scale(x))
    ks = _kernel(u, model.X, model.lengthscales, model.signal_var)  # (B, N)
    mean = ks @ model.alpha
    v = solve_triangular(model.chol, ks.T, lower=True)  # (N, B)
    var = np.maximum(model.signal_var - np.sum(v * v, axis=0), 0.0)
    std = np.sqrt(var)
    mu = model.y_mean + model.y_std * mean
    sd = model.y_std * std
    if not return_grad:
        return (mu[0], sd[0]) if single else (mu, sd)
    # d k(u, X_j) / du = -k (u - X_j) / ls^2
    diff = (u[:, None, :] - model.X[None, :, :]) / model.lengthscales**2  # (B, N, d)
    dk = -ks[:, :, None] * diff
    dmean = np.einsum("bnd,n->bd", dk, model.alpha)
    Kinv_k = solve_triangular(model.chol.T, v, lower=False)  # (N, B)
    dvar = -2.0 * np.einsum("bnd,nb->bd", dk, Kinv_k)
    dstd = np.divide(dvar, 2.0 * std[:, None], out=np.zeros_like(dvar), where=std[:, None] > 1e-12)
    scale = model.y_std / (model.upper - model.lower)
    dmu, dsd = dmean * scale, dstd * scale
    if single:
        return mu[0], sd[0], dmu[0], dsd[0]
    return mu, sd, dmu, dsd
