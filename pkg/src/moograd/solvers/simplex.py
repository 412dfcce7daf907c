"""Tiny linear and quadratic programs over the probability simplex.

The weight solvers only ever work with a handful of objectives (m <= 4), so
the feasible polytope ``{a in simplex : A a >= b}`` has few vertices and an
exact LP is a vertex enumeration.  Quadratic programs are solved by
Frank-Wolfe with that enumeration as the linear minimization oracle.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

FEAS_TOL = 1e-10


def polytope_vertices(m: int, A=None, b=None) -> np.ndarray:
    """Vertices of ``{a : sum(a) = 1, a >= 0, A a >= b}``.

    Rows of ``A`` whose bound is ``-inf`` are ignored.  Returns an array of
    shape ``(V, m)``; ``V == 0`` means the polytope is empty.
    """
    G = [np.eye(m)]
    h = [np.zeros(m)]
    if A is not None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.broadcast_to(np.asarray(b, dtype=float), (A.shape[0],))
        keep = np.isfinite(b)
        G.append(A[keep])
        h.append(b[keep])
    G = np.vstack(G)
    h = np.concatenate(h)
    if m == 1:
        return np.ones((1, 1)) if np.all(G @ np.ones(1) >= h - FEAS_TOL) else np.zeros((0, 1))
    scale = 1.0 + np.abs(h)
    verts = []
    for rows in combinations(range(G.shape[0]), m - 1):
        M = np.vstack([np.ones(m), G[list(rows)]])
        rhs = np.concatenate([[1.0], h[list(rows)]])
        if abs(np.linalg.det(M)) < 1e-14:
            continue
        a = np.linalg.solve(M, rhs)
        if np.all(G @ a >= h - FEAS_TOL * scale):
            verts.append(a)
    if not verts:
        return np.zeros((0, m))
    return np.unique(np.round(np.array(verts), 14), axis=0)


def simplex_lp(c, A=None, b=None) -> np.ndarray | None:
    """Maximize ``c @ a`` over the constrained simplex; ``None`` if infeasible.

    When a whole face is optimal the barycentre of its vertices is returned,
    which keeps the answer deterministic and away from needless corners.
    """
    c = np.asarray(c, dtype=float)
    V = polytope_vertices(c.size, A, b)
    if len(V) == 0:
        return None
    vals = V @ c
    best = vals.max()
    ties = V[vals >= best - 1e-12 * max(1.0, abs(best))]
    return ties.mean(axis=0)


def simplex_qp(Q, q=None, A=None, b=None, iters: int = 200, tol: float = 1e-8):
    """Minimize ``0.5 a'Qa + q'a`` over the constrained simplex by Frank-Wolfe.

    Uses the away-step variant, which tracks ``a`` as a convex combination of
    the polytope vertices and may also move away from the worst active
    vertex; unlike plain Frank-Wolfe it converges linearly on polytopes.
    Stops after ``iters`` steps or once the duality gap is below ``tol``.
    Returns ``None`` when the feasible set is empty.  ``Q`` must be positive
    semi-definite.  Exact line search is used on each segment.
    """
    Q = np.asarray(Q, dtype=float)
    m = Q.shape[0]
    q = np.zeros(m) if q is None else np.asarray(q, dtype=float)
    V = polytope_vertices(m, A, b)
    if len(V) == 0:
        return None
    if len(V) == 1:
        return V[0].copy()
    # start from the best vertex; the feasible set is the hull of V
    vals = 0.5 * np.einsum("vi,ij,vj->v", V, Q, V) + V @ q
    w = np.zeros(len(V))
    w[int(np.argmin(vals))] = 1.0
    a = w @ V
    for _ in range(iters):
        grad = Q @ a + q
        scores = V @ grad
        s_idx = int(np.argmin(scores))
        gap = grad @ a - scores[s_idx]
        if gap <= tol:
            break
        active = np.flatnonzero(w > 0)
        v_idx = int(active[np.argmax(scores[active])])
        away_gap = scores[v_idx] - grad @ a
        if gap >= away_gap:
            d, max_step, toward = V[s_idx] - a, 1.0, True
        else:
            wv = w[v_idx]
            d, max_step, toward = a - V[v_idx], wv / (1.0 - wv) if wv < 1 else np.inf, False
        slope = -grad @ d
        curv = d @ Q @ d
        step = max_step if curv <= 0 else min(max_step, slope / curv)
        if toward:
            w *= 1.0 - step
            w[s_idx] += step
        else:
            w *= 1.0 + step
            w[v_idx] -= step
            if step == max_step:
                w[v_idx] = 0.0  # drop step
        w = np.maximum(w, 0.0)
        w /= w.sum()
        a = w @ V
    return a
