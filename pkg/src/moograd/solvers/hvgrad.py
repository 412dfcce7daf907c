from __future__ import annotations

import numpy as np


def hv_gradient(front, ref) -> np.ndarray:
    """Exact gradient of the 2-D hypervolume w.r.t. every objective vector.

    Args:
        front: (K, 2) objective vectors.
        ref: reference point; a point contributes only if it strictly
            dominates it.

    Returns:
        (K, 2) array ``dHV/dy``.  Entries are non-positive; points that are
        dominated, duplicated (all but the first copy) or outside the
        reference box get zeros.
    """
    Y = np.atleast_2d(np.asarray(front, dtype=float))
    ref = np.asarray(ref, dtype=float)
    K, m = Y.shape
    if m != 2:
        raise NotImplementedError("exact hypervolume gradients are only implemented for m = 2")
    grad = np.zeros((K, 2))
    inside = np.all(Y < ref, axis=1)
    order = np.lexsort((Y[:, 1], Y[:, 0]))
    keep = []
    best_y2 = np.inf
    for i in order:
        if not inside[i]:
            continue
        # sweep by increasing y1: a point survives only if it lowers the best y2
        if Y[i, 1] < best_y2:
            keep.append(i)
            best_y2 = Y[i, 1]
    if not keep:
        return grad
    keep = np.array(keep)
    xs, ys = Y[keep, 0], Y[keep, 1]
    next_x = np.append(xs[1:], ref[0])
    prev_y = np.insert(ys[:-1], 0, ref[1])
    grad[keep, 0] = ys - prev_y
    grad[keep, 1] = -(next_x - xs)
    return grad
