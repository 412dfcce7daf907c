"""Scalarization (aggregation) functions and their gradients w.r.t. the loss vector.

Each function maps an objective vector ``L`` and a preference ``lam`` to a
scalar.  ``aggregate_grad`` returns ``d g / d L``, which is the weight vector
that turns the aggregated problem into descent on ``sum_i w_i L_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("ls", "tche", "mtche", "stche", "smtche", "pbi", "cosmos", "pnorm", "aasf")

_DEFAULT_MU = {"pbi": 5.0, "cosmos": 1.0}
COSMOS_EPS = 1e-12


@dataclass(frozen=True)
class AggregationSpec:
    """Aggregation function selector plus its hyperparameters.

    ``z`` defaults to the origin, ``mu`` to 5 for PBI and 1 for COSMOS.
    """

    kind: str
    z: tuple[float, ...] | None = None
    mu: float | None = None
    h: float = 100.0
    p: float = 2.0
    rho: float = 0.1

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ValueError(f"unknown aggregation {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.mu is None:
            object.__setattr__(self, "mu", _DEFAULT_MU.get(kind, 1.0))
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.z is not None:
            object.__setattr__(self, "z", tuple(float(v) for v in self.z))

    def ref(self, m: int) -> np.ndarray:
        return np.zeros(m) if self.z is None else np.asarray(self.z, dtype=float)


def _prep(spec: AggregationSpec, L, lam):
    L = np.asarray(L, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if L.shape != lam.shape or L.ndim != 1:
        raise ValueError(f"L and lam must be equal-length vectors, got {L.shape} and {lam.shape}")
    z = spec.ref(L.size)
    if spec.kind in ("mtche", "smtche", "aasf") and np.any(lam <= 0):
        raise ValueError(f"{spec.kind} divides by the preference; all entries must be > 0")
    return L, lam, z


def _softmax(u):
    e = np.exp(u - u.max())
    return e / e.sum()


def _logsumexp(u):
    top = u.max()
    return top + np.log(np.sum(np.exp(u - top)))


def aggregate(spec: AggregationSpec, L, lam) -> float:
    """Evaluate the aggregation function ``g_lam(L)``."""
    L, lam, z = _prep(spec, L, lam)
    kind = spec.kind
    if kind == "ls":
        return float(lam @ L)
    if kind == "tche":
        return float(np.max(lam * (L - z)))
    if kind == "mtche":
        return float(np.max((L - z) / lam))
    if kind == "stche":
        return float(_logsumexp(spec.h * lam * (L - z)) / spec.h)
    if kind == "smtche":
        return float(_logsumexp(spec.h * (L - z) / lam) / spec.h)
    if kind == "pbi":
        u = lam / np.linalg.norm(lam)
        d1 = u @ L
        d2 = np.linalg.norm(L - d1 * u)
        return float(d1 + spec.mu * d2)
    if kind == "cosmos":
        ip = lam @ L
        denom = np.linalg.norm(lam) * np.linalg.norm(L) + COSMOS_EPS
        return float(ip - spec.mu * ip / denom)
    if kind == "pnorm":
        return float(np.linalg.norm(lam * L - z, ord=spec.p))
    # aasf
    return float(np.max((L - z) / lam) + spec.rho * (lam @ L))


def aggregate_grad(spec: AggregationSpec, L, lam) -> np.ndarray:
    """Gradient of ``aggregate`` w.r.t. ``L``.

    At max-operator kinks (Tche, mTche, AASF) the whole subgradient goes to
    the smallest active index.
    """
    L, lam, z = _prep(spec, L, lam)
    kind = spec.kind
    m = L.size
    if kind == "ls":
        return lam.copy()
    if kind == "tche":
        a = int(np.argmax(lam * (L - z)))
        g = np.zeros(m)
        g[a] = lam[a]
        return g
    if kind in ("mtche", "aasf"):
        a = int(np.argmax((L - z) / lam))
        g = np.zeros(m)
        g[a] = 1.0 / lam[a]
        if kind == "aasf":
            g = g + spec.rho * lam
        return g
    if kind == "stche":
        return _softmax(spec.h * lam * (L - z)) * lam
    if kind == "smtche":
        return _softmax(spec.h * (L - z) / lam) / lam
    if kind == "pbi":
        u = lam / np.linalg.norm(lam)
        perp = L - (u @ L) * u
        d2 = np.linalg.norm(perp)
        g = u.copy()
        if d2 > 0:
            # d||P L|| / dL = P L / ||P L|| with P the projector orthogonal to u
            g += spec.mu * perp / d2
        return g
    if kind == "cosmos":
        ip = lam @ L
        nlam = np.linalg.norm(lam)
        nL = np.linalg.norm(L)
        denom = nlam * nL + COSMOS_EPS
        dnorm = L / nL if nL > 0 else np.zeros(m)
        return lam - spec.mu * (lam / denom - ip * nlam * dnorm / denom**2)
    # pnorm
    v = lam * L - z
    norm = np.linalg.norm(v, ord=spec.p)
    if norm == 0:
        return np.zeros(m)
    return lam * np.sign(v) * np.abs(v) ** (spec.p - 1) / norm ** (spec.p - 1)
