"""Preference-conditional acquisition functions.

All functions vectorize over leading batch dimensions: ``mu`` and ``sigma``
may be ``(m,)`` or ``(B, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx
from scipy.stats import norm

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

ALGOS = ("dirhv_ego", "psl_dirhv_ei", "psl_mobo")


@dataclass
class AcquisitionConfig:
    """Settings of the Bayesian optimization loop.

    ``kind`` defaults to ``"tlcb"`` for ``psl_mobo`` and ``"dirhv_ei"``
    otherwise.  ``restarts`` and ``polish_iters`` control the derivative-free
    acquisition maximizer of DirHV-EGO; the ``psl_*`` fields control the
    Pareto set model trained on the acquisition by the PSL variants.
    Acquisitions see objectives rescaled so the archive spans ``[0, 1]``
    and measure from a utopian point ``utopia_offset`` below the ideal point
    of that scale, which keeps ``xi`` off the ideal point when one archive
    member attains it.
    ``gp_jitter`` is the surrogates' smallest diagonal jitter; near-zero
    values let the likelihood pick ill-conditioned, overconfident fits.
    ``ref_point`` is only used for the reported hypervolume trace.
    """

    kind: str | None = None
    beta: float = 2.0
    direction_count: int = 20
    batch_q: int = 5
    restarts: int = 512
    polish_iters: int = 60
    polish_step: float = 0.1
    gp_restarts: int = 2
    gp_jitter: float = 1e-6
    psl_steps: int = 1000
    psl_batch: int = 10
    psl_lr: float = 1e-3
    psl_warm_steps: int = 300
    psl_warm_lr: float = 1e-2
    psl_candidates: int = 1000
    utopia_offset: float = 0.1
    ref_point: tuple[float, ...] = (1.2, 1.2)

    def __post_init__(self):
        if self.kind is not None and self.kind not in ("tlcb", "dirhv_ei"):
            raise ValueError(f"unknown acquisition {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.batch_q < 1:
            raise ValueError("batch_q must be >= 1")
        if self.direction_count < 1:
            raise ValueError("direction_count must be >= 1")

    def kind_for(self, algo: str) -> str:
        if self.kind is not None:
            return self.kind
        return "tlcb" if algo == "psl_mobo" else "dirhv_ei"


def acq_tlcb(mu, sigma, lam, z_star, beta: float = 2.0):
    """``max_i lam_i (mu_i - beta sigma_i - z*_i)``; smaller is better."""
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    lam, z_star = np.asarray(lam, dtype=float), np.asarray(z_star, dtype=float)
    return np.max(lam * (mu - beta * sigma - z_star), axis=-1)


def acq_tlcb_grad(mu, sigma, lam, z_star, beta: float = 2.0):
    """Derivatives of :func:`acq_tlcb` w.r.t. ``mu`` and ``sigma``.

    Ties go to the smallest index.
    """
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), mu.shape)
    u = lam * (mu - beta * sigma - np.asarray(z_star, dtype=float))
    hot = np.zeros_like(u)
    np.put_along_axis(hot, np.argmax(u, axis=-1)[..., None], 1.0, axis=-1)
    return hot * lam, -beta * hot * lam


def _ei_factors(mu, sigma, xi):
    mu, sigma, xi = (np.asarray(a, dtype=float) for a in (mu, sigma, xi))
    gap = xi - mu
    safe = np.where(sigma > 0, sigma, 1.0)
    with np.errstate(over="ignore"):  # pdf of a huge |t| is exactly 0
        t = gap / safe
        cdf, pdf = norm.cdf(t), norm.pdf(t)
    f = np.where(sigma > 0, gap * cdf + sigma * pdf, np.maximum(gap, 0.0))
    d_mu = np.where(sigma > 0, -cdf, -(gap > 0).astype(float))
    d_sigma = np.where(sigma > 0, pdf, 0.0)
    return f, d_mu, d_sigma


def acq_dirhv_ei(mu, sigma, xi):
    """``E[prod_i max(xi_i - y_i, 0)]`` for independent ``y_i ~ N(mu_i, sigma_i^2)``.

    Each factor is ``(xi_i - mu_i) Phi(t_i) + sigma_i phi(t_i)`` with
    ``t_i = (xi_i - mu_i) / sigma_i``, falling back to ``max(xi_i - mu_i, 0)``
    where ``sigma_i = 0``.  Larger is better.
    """
    f, _, _ = _ei_factors(mu, sigma, xi)
    return np.prod(f, axis=-1)


def acq_dirhv_ei_grad(mu, sigma, xi):
    """Value of :func:`acq_dirhv_ei` and its derivatives w.r.t. ``mu`` and ``sigma``."""
    f, d_mu, d_sigma = _ei_factors(mu, sigma, xi)
    m = f.shape[-1]
    others = np.stack([np.prod(np.delete(f, i, axis=-1), axis=-1) for i in range(m)], axis=-1)
    return np.prod(f, axis=-1), others * d_mu, others * d_sigma


def _log_factor(gap, sigma):
    """``log(gap Phi(t) + sigma phi(t))`` with ``t = gap / sigma``, stable for ``t << 0``.

    For ``t < 0``, writing ``Phi(t) = erfcx(-t / sqrt 2) exp(-t^2 / 2) / 2`` gives
    ``f = sigma exp(-t^2 / 2) b(t)`` with ``b = t erfcx(-t / sqrt 2) / 2 + 1 / sqrt(2 pi)``.
    Also returns ``Phi(t) / f`` and ``phi(t) / f``.
    """
    t = gap / sigma
    tn = np.minimum(t, 0.0)
    ex = erfcx(-tn / np.sqrt(2.0))
    b = np.maximum(0.5 * tn * ex + _INV_SQRT_2PI, 1e-300)
    log_neg = np.log(sigma) - 0.5 * tn * tn + np.log(b)
    cdf, pdf = norm.cdf(t), norm.pdf(t)
    f_pos = gap * cdf + sigma * pdf
    neg = t < 0
    logf = np.where(neg, log_neg, np.log(np.where(neg, 1.0, f_pos)))
    cdf_over_f = np.where(neg, 0.5 * ex / (sigma * b), cdf / np.where(neg, 1.0, f_pos))
    pdf_over_f = np.where(neg, _INV_SQRT_2PI / (sigma * b), pdf / np.where(neg, 1.0, f_pos))
    return logf, cdf_over_f, pdf_over_f


def log_acq_dirhv_ei(mu, sigma, xi, with_grad: bool = False):
    """``log`` of :func:`acq_dirhv_ei`, accurate where the value itself underflows.

    With ``with_grad`` also returns the derivatives of the log w.r.t. ``mu``
    and ``sigma``.  Entries with ``sigma = 0`` and ``mu >= xi`` give ``-inf``.
    """
    mu, sigma, xi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mu, sigma, xi)))
    gap = xi - mu
    pos = sigma > 0
    s = np.where(pos, sigma, 1.0)
    logf, cdf_over_f, pdf_over_f = _log_factor(gap, s)
    with np.errstate(divide="ignore"):
        logf = np.where(pos, logf, np.log(np.maximum(gap, 0.0)))
        inv_gap = np.where(gap > 0, 1.0 / np.where(gap > 0, gap, 1.0), 0.0)
    total = np.sum(logf, axis=-1)
    if not with_grad:
        return total
    d_mu = np.where(pos, -cdf_over_f, -inv_gap)
    d_sigma = np.where(pos, pdf_over_f, 0.0)
    return total, d_mu, d_sigma


def compute_xi(lam, z_star, archive_Y):
    """Reference point of the directional hypervolume improvement.

    The direction ``lam`` is rescaled to unit Euclidean length and
    ``xi = z* + t lam`` where ``t = min_y max_i (y_i - z*_i) / lam_i`` over the
    archive, so ``xi`` is where the ray from ``z*`` first leaves the region
    dominated by the archive.  Accepts a single ``lam`` or a ``(P, m)`` batch.
    """
    lam = np.asarray(lam, dtype=float)
    single = lam.ndim == 1
    lam = np.atleast_2d(lam)
    if np.any(lam <= 0):
        raise ValueError("directions must be strictly positive")
    z = np.asarray(z_star, dtype=float)
    Y = np.atleast_2d(np.asarray(archive_Y, dtype=float))
    u = lam / np.linalg.norm(lam, axis=1, keepdims=True)
    t = np.min(np.max((Y[None, :, :] - z) / u[:, None, :], axis=-1), axis=1)
    xi = z + np.maximum(t, 0.0)[:, None] * u
    return xi[0] if single else xi


def dirhv_ei_monte_carlo(mu, sigma, xi, samples: int = 1_000_000, rng=None):
    """Monte-Carlo estimate of the DirHV expectation and its standard error."""
    rng = np.random.default_rng(rng)
    mu, sigma, xi = (np.asarray(a, dtype=float) for a in (mu, sigma, xi))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        c = min(200_000, samples - done)
        y = mu + sigma * rng.standard_normal((c, mu.size))
        v = np.prod(np.maximum(xi - y, 0.0), axis=1)
        total += v.sum()
        total_sq += (v * v).sum()
        done += c
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, np.sqrt(var / samples)
