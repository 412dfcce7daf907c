from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from moograd.metrics import (
    MetricConfig,
    all_metrics,
    cross_angle,
    fill_distance,
    hv,
    hv_monte_carlo,
    igd,
    inner_product,
    min_dist,
    pareto_filter,
    pbi_metric,
    smooth_min_dist,
    spacing,
    span,
)


def brute_filter(Y):
    keep = []
    for i, a in enumerate(Y):
        if not any(np.all(b <= a) and np.any(b < a) for j, b in enumerate(Y) if j != i):
            keep.append(a)
    return np.array(keep)


def fronts(min_size=1, max_size=30):
    return arrays(np.float64, st.tuples(st.integers(min_size, max_size), st.just(2)),
                  elements=st.floats(0.0, 1.0, allow_nan=False))


def test_pareto_filter_examples():
    np.testing.assert_array_equal(pareto_filter([[0, 1], [1, 0], [1, 1]]), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(pareto_filter([[0.3, 0.2]]), [[0.3, 0.2]])
    with pytest.raises(ValueError):
        pareto_filter(np.empty((0, 2)))


@pytest.mark.parametrize("m", [2, 3])
def test_pareto_filter_matches_bruteforce(m):
    rng = np.random.default_rng(m)
    for _ in range(20):
        Y = rng.random((50, m))
        np.testing.assert_array_equal(pareto_filter(Y), brute_filter(Y))


def test_pareto_filter_keeps_duplicates_and_order():
    Y = np.array([[0.5, 0.5], [0.2, 0.9], [0.5, 0.5]])
    np.testing.assert_array_equal(pareto_filter(Y), Y)


def test_hv_examples():
    assert hv([[0.5, 0.5]], [1, 1]) == pytest.approx(0.25)
    assert hv([[0.25, 0.75], [0.75, 0.25]], [1, 1]) == pytest.approx(0.3125)
    assert hv(np.empty((0, 2)), [1, 1]) == 0.0
    assert hv([[1.5, 0.1]], [1, 1]) == 0.0


def test_hv3d_and_fallback_against_monte_carlo():
    rng = np.random.default_rng(0)
    Y = rng.random((8, 3))
    est, se = hv_monte_carlo(Y, np.ones(3), 400_000, rng)
    assert abs(hv(Y, np.ones(3)) - est) <= 3 * se
    assert hv([[0.5, 0.5, 0.5, 0.5]], np.ones(4), mc_samples=10_000, rng=1) == pytest.approx(0.0625)


def test_hv2d_matches_inclusion_exclusion():
    rng = np.random.default_rng(9)
    for _ in range(20):
        Y = rng.random((4, 2))
        ref = np.ones(2)
        total = 0.0
        for r in range(1, 5):
            for idx in itertools.combinations(range(4), r):
                corner = Y[list(idx)].max(axis=0)
                total += (-1) ** (r + 1) * np.prod(np.maximum(ref - corner, 0))
        assert hv(Y, ref) == pytest.approx(total, abs=1e-12)


@given(fronts(), arrays(np.float64, 2, elements=st.floats(0.0, 1.0)))
def test_hv_monotone_under_addition(Y, y):
    assert hv(np.vstack([Y, y]), [1.2, 1.2]) >= hv(Y, [1.2, 1.2]) - 1e-12


@given(fronts(2))
def test_hv_invariant_to_dominated_points_and_order(Y):
    ref = [1.2, 1.2]
    base = hv(Y, ref)
    assert hv(pareto_filter(Y), ref) == pytest.approx(base, abs=1e-12)
    assert hv(Y[::-1], ref) == pytest.approx(base, abs=1e-12)


def test_igd_examples():
    Z = np.array([[0, 1], [1, 0]])
    assert igd([[0, 1]], Z) == pytest.approx(np.sqrt(2) / 2)
    assert igd(np.vstack([Z, [[0.5, 0.5]]]), Z) == 0.0
    assert igd([[3, 4]], [[0, 0]]) == pytest.approx(5.0)


def test_fill_distance_examples():
    Z = np.array([[0, 0], [2, 0]])
    assert fill_distance(Z, Z) == 0.0
    assert fill_distance([[0, 0]], Z) == 2.0


def bf_igd(S, Z):
    total = sum(min(np.sum((z - y) ** 2) for y in S) for z in Z)
    return np.sqrt(total) / len(Z)


def bf_fd(S, Z):
    return max(min(np.linalg.norm(z - y) for y in S) for z in Z)


def bf_nn(S):
    return np.array([min(np.linalg.norm(a - b) for j, b in enumerate(S) if j != i) for i, a in enumerate(S)])


def bf_spacing(S):
    d = bf_nn(S)
    return sum((x - d.mean()) ** 2 for x in d) / len(d)


def bf_span(S):
    return min(max(abs(a[k] - b[k]) for a in S for b in S) for k in range(S.shape[1]))


def test_set_metrics_match_bruteforce():
    rng = np.random.default_rng(4)
    for _ in range(20):
        S, Z = rng.random((15, 2)), rng.random((40, 2))
        assert igd(S, Z) == pytest.approx(bf_igd(S, Z), rel=1e-12)
        assert fill_distance(S, Z) == pytest.approx(bf_fd(S, Z), rel=1e-12)
        assert spacing(S) == pytest.approx(bf_spacing(S), rel=1e-9, abs=1e-15)
        assert span(S) == pytest.approx(bf_span(S), rel=1e-12)


def test_igd_zero_iff_subset():
    Z = np.random.default_rng(0).random((10, 2))
    assert igd(np.vstack([Z, [[5.0, 5.0]]]), Z) <= 1e-12
    assert igd(Z[:-1], Z) > 1e-12


@given(fronts(1, 10), fronts(1, 10), arrays(np.float64, 2, elements=st.floats(0.0, 1.0)))
def test_fill_distance_shrinks_when_adding(S, Z, z):
    f = fill_distance(S, Z)
    assert f >= 0
    assert fill_distance(np.vstack([S, z]), Z) <= f + 1e-15


def test_distance_examples():
    assert min_dist([[0, 0], [1, 0]]) == 1.0
    assert min_dist([[0.3, 0.3], [0.3, 0.3], [1, 1]]) == 0.0
    assert min_dist([[0, 0]]) == 0.0
    assert np.isnan(smooth_min_dist([[0, 0]]))
    pts = np.stack([np.linspace(0, 1, 6), np.zeros(6)], axis=1)
    assert spacing(pts) == pytest.approx(0.0, abs=1e-15)
    assert span([[0, 1], [1, 0]]) == 1.0
    assert spacing([[0, 0]]) == 0.0 and span([[0, 0]]) == 0.0


def test_smooth_min_dist_formula():
    P = np.array([[0, 0], [1, 0], [0, 2]])
    d = np.array([1.0, 2.0, np.sqrt(5)])
    h = 10.0
    assert smooth_min_dist(P, h) == pytest.approx(-np.log(np.sum(np.exp(-h * d))) / (h * 6))


@given(fronts(2, 20))
def test_smooth_min_dist_below_min_dist(S):
    assert smooth_min_dist(S, 10.0) <= min_dist(S) + 1e-12


@given(fronts(2, 15), st.randoms(use_true_random=False))
def test_set_metrics_permutation_invariant(S, rnd):
    idx = list(range(len(S)))
    rnd.shuffle(idx)
    P = S[idx]
    Z = np.linspace([0, 1], [1, 0], 7)
    for f in (min_dist, spacing, span, lambda a: hv(a, [1.2, 1.2]), lambda a: igd(a, Z),
              lambda a: fill_distance(a, Z), lambda a: smooth_min_dist(a, 10.0)):
        assert f(P) == pytest.approx(f(S), abs=1e-12)


def test_solution_metric_examples():
    assert cross_angle([1, 1], [0.5, 0.5]) == pytest.approx(0.0)
    assert cross_angle([1, 0], [0.5, 0.5]) == pytest.approx(45.0)
    assert inner_product([0.2, 0.4], [0.5, 0.5]) == pytest.approx(0.3)
    assert pbi_metric([0.3, 0.4], [1, 0], mu=5) == pytest.approx(2.3)
    with pytest.raises(ValueError):
        cross_angle([1, 1, 1], [0.3, 0.3, 0.4])


@given(st.floats(1e-3, 1e3), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.05, 0.95))
def test_cross_angle_scale_invariant(c, y1, y2, w):
    lam = [w, 1 - w]
    assert cross_angle([c * y1, c * y2], lam) == pytest.approx(cross_angle([y1, y2], lam), abs=1e-9)


def test_all_metrics_keys_and_nan_without_reference():
    vals = all_metrics([[0.2, 0.8], [0.8, 0.2]], [[0.3, 0.7], [0.7, 0.3]], MetricConfig())
    assert set(vals) == {"hv", "igd", "fd", "lmin", "slmin", "spacing", "span", "pbi", "ip", "cross_angle"}
    assert np.isnan(vals["igd"]) and np.isnan(vals["fd"])
    with pytest.raises(ValueError):
        MetricConfig(h=0)
