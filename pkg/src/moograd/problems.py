"""Synthetic bi-objective test problems with analytic Jacobians.

Every problem exposes ``evaluate`` and ``jacobian`` for a single decision
vector of shape ``(n,)`` or a batch of shape ``(K, n)``, plus a sampler of
its true Pareto front used as the reference set for IGD / fill distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Problem:
    """Box-bounded multiobjective problem.

    Attributes:
        name: identifier used in configs and on the command line.
        m: number of objectives.
        n: number of decision variables.
        lower, upper: per-dimension box bounds.
    """

    name: str
    m: int
    n: int
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"a multiobjective problem needs m >= 2, got {self.m}")
        if self.n < 1:
            raise ValueError(f"decision dimension must be >= 1, got {self.n}")
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.n,)).copy()
        if np.any(lo >= hi):
            raise ValueError("lower bound must be strictly below upper bound")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def bounds(self) -> np.ndarray:
        return np.stack([self.lower, self.upper], axis=1)

    def clip(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(theta, self.lower, self.upper)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.n or theta.ndim not in (1, 2):
            raise ValueError(
                f"{self.name}: expected theta of shape (n,) or (K, n) with n={self.n}, "
                f"got {theta.shape}"
            )
        return theta

    def evaluate(self, theta) -> np.ndarray:
        """Objective vector(s): ``(m,)`` for one point, ``(K, m)`` for a batch."""
        theta = self._check(theta)
        return self._f(np.atleast_2d(theta)).reshape(theta.shape[:-1] + (self.m,))

    def jacobian(self, theta) -> np.ndarray:
        """Analytic Jacobian ``dL/dtheta``: ``(m, n)`` or ``(K, m, n)``."""
        theta = self._check(theta)
        jac = self._jac(np.atleast_2d(theta))
        return jac.reshape(theta.shape[:-1] + (self.m, self.n))

    def pareto_front(self, count: int) -> np.ndarray:
        """``count`` points on the true front, both endpoints included."""
        if count < 2:
            raise ValueError("need at least 2 Pareto front samples")
        return self._front(count)

    def _f(self, theta):  # pragma: no cover - abstract
        raise NotImplementedError

    def _jac(self, theta):  # pragma: no cover - abstract
        raise NotImplementedError

    def _front(self, count):  # pragma: no cover - abstract
        raise NotImplementedError


class VLMOP1(Problem):
    """Convex front: f1 = mean(theta^2), f2 = mean((theta - 2)^2)."""

    def __init__(self, n: int = 1):
        super().__init__("vlmop1", 2, n, np.full(n, -2.0), np.full(n, 4.0))

    def _f(self, theta):
        return np.stack(
            [np.mean(theta**2, axis=1), np.mean((theta - 2.0) ** 2, axis=1)], axis=1
        )

    def _jac(self, theta):
        return np.stack([2.0 * theta / self.n, 2.0 * (theta - 2.0) / self.n], axis=1)

    def _front(self, count):
        c = np.linspace(0.0, 2.0, count)
        return np.stack([c**2, (c - 2.0) ** 2], axis=1)


class VLMOP2(Problem):
    """Concave front: f_{1,2} = 1 - exp(-sum (theta_i -/+ 1/sqrt(n))^2)."""

    def __init__(self, n: int = 10):
        super().__init__("vlmop2", 2, n, np.full(n, -2.0), np.full(n, 2.0))

    def _f(self, theta):
        c = 1.0 / np.sqrt(self.n)
        s1 = np.sum((theta - c) ** 2, axis=1)
        s2 = np.sum((theta + c) ** 2, axis=1)
        return np.stack([-np.expm1(-s1), -np.expm1(-s2)], axis=1)

    def _jac(self, theta):
        c = 1.0 / np.sqrt(self.n)
        d1, d2 = theta - c, theta + c
        e1 = np.exp(-np.sum(d1**2, axis=1))[:, None]
        e2 = np.exp(-np.sum(d2**2, axis=1))[:, None]
        return np.stack([2.0 * e1 * d1, 2.0 * e2 * d2], axis=1)

    def _front(self, count):
        # Pareto set: theta_i = t / sqrt(n), t in [-1, 1]; t = 1 minimises f1.
        t = np.linspace(1.0, -1.0, count)
        theta = np.repeat(t[:, None], self.n, axis=1) / np.sqrt(self.n)
        return self._f(theta)


class ZDT1(Problem):
    """Classic ZDT1 on the unit box; the front is f2 = 1 - sqrt(f1)."""

    def __init__(self, n: int = 8):
        super().__init__("zdt1", 2, n, np.zeros(n), np.ones(n))

    def _g(self, theta):
        if self.n == 1:
            return np.ones(theta.shape[0])
        return 1.0 + 9.0 * np.sum(theta[:, 1:], axis=1) / (self.n - 1)

    def _f(self, theta):
        f1 = theta[:, 0]
        g = self._g(theta)
        f2 = g * (1.0 - np.sqrt(np.clip(f1, 0.0, None) / g))
        return np.stack([f1, f2], axis=1)

    def _jac(self, theta):
        k = theta.shape[0]
        f1 = np.clip(theta[:, 0], 1e-12, None)
        g = self._g(theta)
        jac = np.zeros((k, 2, self.n))
        jac[:, 0, 0] = 1.0
        # d/dtheta_1 of g - sqrt(f1 g) blows up at f1 = 0; the clip keeps it finite.
        jac[:, 1, 0] = -0.5 * np.sqrt(g / f1)
        if self.n > 1:
            dg = 9.0 / (self.n - 1)
            jac[:, 1, 1:] = (dg * (1.0 - 0.5 * np.sqrt(f1 / g)))[:, None]
        return jac

    def _front(self, count):
        t = np.linspace(0.0, 1.0, count)
        return np.stack([t**2, 1.0 - t], axis=1)


PROBLEMS = {"vlmop1": VLMOP1, "vlmop2": VLMOP2, "zdt1": ZDT1}


def get_problem(name: str, n: int | None = None) -> Problem:
    """Instantiate a problem by identifier, optionally overriding ``n``."""
    try:
        cls = PROBLEMS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return cls() if n is None else cls(n)


def evaluate(problem: Problem, theta) -> np.ndarray:
    return problem.evaluate(theta)


def jacobian(problem: Problem, theta) -> np.ndarray:
    return problem.jacobian(theta)


def pareto_front_samples(problem: Problem | str, count: int) -> np.ndarray:
    if isinstance(problem, str):
        problem = get_problem(problem)
    return problem.pareto_front(count)
