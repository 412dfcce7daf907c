"""Quality indicators for solution sets and for individual solutions.

Set-level indicators take an ``(N, m)`` array of objective vectors.  The
per-solution indicators (PBI, inner product, cross angle) score one
objective vector against its preference.  Distances are Euclidean.

Formulas follow the usual library definitions, with three literal choices
worth knowing about: ``igd`` puts ``1/|Z|`` outside the square root,
``spacing`` is the variance (not the standard deviation) of nearest-neighbour
distances, and ``smooth_min_dist`` normalizes by ``k(k-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

SET_METRICS = ("hv", "igd", "fd", "lmin", "slmin", "spacing", "span")
SOLUTION_METRICS = ("pbi", "ip", "cross_angle")
ALL_METRICS = SET_METRICS + SOLUTION_METRICS


@dataclass
class MetricConfig:
    ref_point: tuple[float, ...] = (1.2, 1.2)
    reference_set: np.ndarray | None = None
    h: float = 10.0
    mu: float = 5.0
    z: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.reference_set is not None and len(self.reference_set) < 1:
            raise ValueError("reference set must not be empty")


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 0)
    return np.atleast_2d(pts)


def strictly_dominates(a, b) -> bool:
    """``a`` is no worse everywhere and better somewhere (minimization)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of points not strictly dominated by any other point."""
    Y = _as_points(points)
    le = np.all(Y[:, None, :] <= Y[None, :, :], axis=-1)
    lt = np.any(Y[:, None, :] < Y[None, :, :], axis=-1)
    dominated_by = le & lt  # [i, j]: i dominates j
    return ~np.any(dominated_by, axis=0)


def pareto_filter(points) -> np.ndarray:
    """Non-dominated subset, in input order."""
    Y = _as_points(points)
    if len(Y) == 0:
        raise ValueError("pareto_filter needs at least one point")
    return Y[nondominated_mask(Y)]


def _hv2d(Y: np.ndarray, ref: np.ndarray) -> float:
    Y = Y[np.lexsort((Y[:, 1], Y[:, 0]))]
    total = 0.0
    best_y2 = ref[1]
    for y1, y2 in Y:
        if y2 < best_y2:
            total += (ref[0] - y1) * (best_y2 - y2)
            best_y2 = y2
    return total


def _hv3d(Y: np.ndarray, ref: np.ndarray) -> float:
    Y = Y[np.argsort(Y[:, 2], kind="stable")]
    total = 0.0
    for i in range(len(Y)):
        top = Y[i + 1, 2] if i + 1 < len(Y) else ref[2]
        if top > Y[i, 2]:
            total += _hv2d(Y[: i + 1, :2], ref[:2]) * (top - Y[i, 2])
    return total


def hv_monte_carlo(points, ref, samples: int = 1_000_000, rng=None) -> tuple[float, float]:
    """Monte-Carlo hypervolume estimate and its standard error."""
    Y = _as_points(points)
    ref = np.asarray(ref, dtype=float)
    Y = Y[np.all(Y < ref, axis=1)] if len(Y) else Y
    if len(Y) == 0:
        return 0.0, 0.0
    rng = np.random.default_rng(rng)
    lo = Y.min(axis=0)
    box = float(np.prod(ref - lo))
    hits = 0
    done = 0
    chunk = 100_000
    while done < samples:
        c = min(chunk, samples - done)
        U = rng.uniform(lo, ref, size=(c, Y.shape[1]))
        dom = np.zeros(c, dtype=bool)
        for y in Y:
            dom |= np.all(U >= y, axis=1)
        hits += int(dom.sum())
        done += c
    p = hits / samples
    return box * p, box * np.sqrt(p * (1 - p) / samples)


def hv(points, ref, mc_samples: int = 1_000_000, rng=None) -> float:
    """Hypervolume dominated by ``points`` and bounded by ``ref``.

    Exact for two and three objectives; a Monte-Carlo estimate otherwise.
    Points that do not strictly dominate ``ref`` contribute nothing.
    """
    Y = _as_points(points)
    ref = np.asarray(ref, dtype=float)
    if len(Y) == 0:
        return 0.0
    Y = Y[np.all(Y < ref, axis=1)]
    if len(Y) == 0:
        return 0.0
    m = Y.shape[1]
    if m == 2:
        return float(_hv2d(Y, ref))
    if m == 3:
        return float(_hv3d(Y, ref))
    return float(hv_monte_carlo(Y, ref, mc_samples, rng)[0])


def igd(points, Z) -> float:
    """``(1/|Z|) * sqrt(sum_z min_y |z - y|^2)``."""
    S = _as_points(points)
    Z = _as_points(Z)
    d = cdist(Z, S).min(axis=1)
    return float(np.sqrt(np.sum(d**2)) / len(Z))


def fill_distance(points, Z) -> float:
    """Covering radius: the largest distance from a reference point to the set."""
    S = _as_points(points)
    Z = _as_points(Z)
    return float(cdist(Z, S).min(axis=1).max())


def min_dist(points) -> float:
    """Smallest pairwise distance; 0 for fewer than two points."""
    Y = _as_points(points)
    if len(Y) < 2:
        return 0.0
    return float(pdist(Y).min())


def smooth_min_dist(points, h: float = 10.0) -> float:
    """``-(1/(h k(k-1))) log sum_{i<j} exp(-h d_ij)``; NaN (undefined) for k < 2."""
    Y = _as_points(points)
    k = len(Y)
    if k < 2:
        return float("nan")
    u = -h * pdist(Y)
    top = u.max()
    lse = top + np.log(np.sum(np.exp(u - top)))
    return float(-lse / (h * k * (k - 1)))


def nearest_neighbour_distances(points) -> np.ndarray:
    Y = _as_points(points)
    D = cdist(Y, Y)
    np.fill_diagonal(D, np.inf)
    return D.min(axis=1)


def spacing(points) -> float:
    """Mean squared deviation of nearest-neighbour distances."""
    Y = _as_points(points)
    if len(Y) < 2:
        return 0.0
    d = nearest_neighbour_distances(Y)
    return float(np.mean((d - d.mean()) ** 2))


def span(points) -> float:
    """Smallest per-objective range of the set."""
    Y = _as_points(points)
    if len(Y) < 2:
        return 0.0
    return float(np.min(Y.max(axis=0) - Y.min(axis=0)))


def pbi_metric(y, lam, z=None, mu: float = 5.0) -> float:
    """``d1 + mu * d2``: distance along the preference ray plus distance off it.

    ``d1 = <y - z, lam> / |lam|`` and ``d2 = |y - (z + d1 lam / |lam|)|``.
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    z = np.zeros_like(y) if z is None else np.asarray(z, dtype=float)
    u = lam / np.linalg.norm(lam)
    d1 = float((y - z) @ u)
    d2 = float(np.linalg.norm(y - (z + d1 * u)))
    return d1 + mu * d2


def inner_product(y, lam) -> float:
    return float(np.dot(y, lam))


def cross_angle(y, lam) -> float:
    """Angle in degrees between a bi-objective vector and its preference."""
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if y.size != 2 or lam.size != 2:
        raise ValueError("cross angle is defined for two objectives only")
    return float(np.degrees(abs(np.arctan2(y[1], y[0]) - np.arctan2(lam[1], lam[0]))))


def set_metrics(points, cfg: MetricConfig) -> dict[str, float]:
    """All set-level indicators; IGD/FD are NaN without a reference set."""
    Y = _as_points(points)
    out = {
        "hv": hv(Y, cfg.ref_point),
        "lmin": min_dist(Y),
        "slmin": smooth_min_dist(Y, cfg.h),
        "spacing": spacing(Y),
        "span": span(Y),
    }
    if cfg.reference_set is not None:
        out["igd"] = igd(Y, cfg.reference_set)
        out["fd"] = fill_distance(Y, cfg.reference_set)
    else:
        out["igd"] = out["fd"] = float("nan")
    return {k: out[k] for k in SET_METRICS}


def solution_metrics(points, prefs, cfg: MetricConfig) -> dict[str, float]:
    """Per-solution indicators averaged over the set (solution i uses preference i)."""
    Y = _as_points(points)
    P = _as_points(prefs)
    pbi = [pbi_metric(y, p, cfg.z, cfg.mu) for y, p in zip(Y, P)]
    ip = [inner_product(y, p) for y, p in zip(Y, P)]
    if Y.shape[1] == 2:
        ang = [cross_angle(y, p) for y, p in zip(Y, P)]
    else:
        ang = [float("nan")]
    return {"pbi": float(np.mean(pbi)), "ip": float(np.mean(ip)), "cross_angle": float(np.mean(ang))}


def all_metrics(points, prefs, cfg: MetricConfig) -> dict[str, float]:
    out = set_metrics(points, cfg)
    out.update(solution_metrics(points, prefs, cfg))
    return out
