from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def latin_hypercube(count: int, dims: int, bounds=None, rng=None) -> np.ndarray:
    """``count`` points in ``dims`` dimensions, one per stratum along every axis.

    Args:
        count: number of samples, at least 1.
        dims: dimensionality.
        bounds: ``(lower, upper)`` arrays or scalars; defaults to the unit cube.
        rng: seed or generator.

    Returns:
        ``(count, dims)`` array.  Along each axis, the equal-width strata of
        the box each hold exactly one sample.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if dims < 1:
        raise ValueError("dims must be >= 1")
    U = qmc.LatinHypercube(d=dims, seed=np.random.default_rng(rng)).random(count)
    if bounds is None:
        return U
    lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (dims,))
    hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (dims,))
    return lo + (hi - lo) * U
