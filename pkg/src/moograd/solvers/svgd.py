from __future__ import annotations

import numpy as np

from .weights import GradientBundle, min_norm_weights


def median_bandwidth(theta: np.ndarray) -> float:
    """Squared bandwidth from the median pairwise distance, med^2 / log(K + 1)."""
    K = theta.shape[0]
    if K < 2:
        return 1.0
    d2 = np.sum((theta[:, None, :] - theta[None, :, :]) ** 2, axis=-1)
    med2 = np.median(d2[np.triu_indices(K, 1)])
    if med2 <= 0:
        return 1.0
    return float(med2 / np.log(K + 1.0))


def svgd_step(particles, bundles: list[GradientBundle], bandwidth: float | None = None,
              repulsion: float = 1.0) -> np.ndarray:
    """Multiobjective Stein variational descent directions.

    Each particle's driving force is its MGDA direction; particle ``i`` moves
    along ``sum_j k(theta_j, theta_i) g_j - repulsion * grad_{theta_j} k(theta_j, theta_i)``
    with a squared-exponential kernel ``exp(-|a - b|^2 / bandwidth)``.  The
    update is ``theta <- theta - lr * direction``.

    Args:
        particles: (K, n) decision vectors.
        bundles: one gradient bundle per particle.
        bandwidth: squared kernel bandwidth; ``None`` uses the median rule.
        repulsion: weight on the kernel-gradient term.
    """
    theta = np.atleast_2d(np.asarray(particles, dtype=float))
    K = theta.shape[0]
    if len(bundles) != K:
        raise ValueError(f"{len(bundles)} gradient bundles for {K} particles")
    g = np.stack([min_norm_weights(b.jac).alpha @ b.jac for b in bundles])
    bw = median_bandwidth(theta) if bandwidth is None else float(bandwidth)
    diff = theta[:, None, :] - theta[None, :, :]  # diff[j, i] = theta_j - theta_i
    kern = np.exp(-np.sum(diff**2, axis=-1) / bw)
    drive = kern.T @ g
    # -grad_{theta_j} k(theta_j, theta_i) = 2 (theta_j - theta_i) k / bw
    repel = np.einsum("ji,jid->id", kern, diff) * (2.0 / bw)
    return drive + repulsion * repel
