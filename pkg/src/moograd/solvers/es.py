from __future__ import annotations

from typing import Callable

import numpy as np


def es_gradient(f: Callable[[np.ndarray], np.ndarray], theta, sigma: float, pop: int,
                rng: np.random.Generator) -> np.ndarray:
    """Antithetic evolution-strategy estimate of ``df/dtheta``.

    Draws ``pop`` Gaussian directions ``e_i`` and evaluates each mirrored
    pair, so ``f`` is called once on a ``(2 pop, n)`` batch.  ``f`` may return
    a scalar per row (result shape ``(n,)``) or an m-vector per row (result
    ``(m, n)``, an estimated Jacobian).  The estimate is
    ``(1 / (pop s)) sum_i (f(theta + s e_i) - f(theta - s e_i)) / 2 * e_i``,
    which is exact in expectation for linear ``f``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if pop < 2 or pop % 2:
        raise ValueError("pop must be a positive even number")
    theta = np.asarray(theta, dtype=float)
    pairs = pop
    eps = rng.standard_normal((pairs, theta.size))
    batch = np.concatenate([theta + sigma * eps, theta - sigma * eps])
    vals = np.asarray(f(batch), dtype=float)
    diff = vals[:pairs] - vals[pairs:]
    return np.tensordot(diff, eps, axes=(0, 0)) / (2.0 * sigma * pairs)
