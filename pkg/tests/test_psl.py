from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moograd.aggregation import AggregationSpec
from moograd.metrics import igd, span
from moograd.problems import VLMOP2, get_problem, pareto_front_samples
from moograd.psl import (
    PslConfig,
    PsModel,
    forward,
    init_model,
    load_model,
    param_count,
    psl_evaluate,
    psl_gradient,
    psl_loss,
    psl_train,
    sample_dirichlet,
    save_model,
    vjp,
)
from moograd.solvers import RunAborted, uniform_preferences

from helpers import rel_err


def random_model(problem, hidden=(16, 16), seed=0, scale=0.5):
    m = init_model(problem, hidden, rng=seed)
    rng = np.random.default_rng(seed + 100)
    return m.with_params(m.phi + scale * rng.standard_normal(m.phi.size))


def test_param_count():
    assert param_count((2, 64, 64, 10)) == 2 * 64 + 64 + 64 * 64 + 64 + 64 * 10 + 10


def test_untrained_model_outputs_box_midpoint():
    p = VLMOP2(10)
    model = init_model(p, rng=0)
    out = forward(model, sample_dirichlet([1, 1], np.random.default_rng(0), 20))
    np.testing.assert_allclose(out, np.zeros((20, 10)), atol=1e-15)
    res = psl_evaluate(model, p, uniform_preferences(7))
    assert np.ptp(res.solutions, axis=0).max() == 0.0


def test_forward_is_pure_and_bounded():
    p = get_problem("zdt1", 5)
    model = random_model(p, scale=3.0)
    lam = np.array([0.3, 0.7])
    a, b = forward(model, lam), forward(model, lam)
    assert np.array_equal(a, b)
    out = forward(model, sample_dirichlet([1, 1], np.random.default_rng(1), 100))
    assert np.all(out >= p.lower) and np.all(out <= p.upper)


def test_forward_is_continuous_in_parameters():
    model = random_model(VLMOP2(4))
    lam = np.array([0.4, 0.6])
    base = forward(model, lam)
    for eps in (1e-3, 1e-4, 1e-5):
        phi = model.phi.copy()
        phi[3] += eps  # a first-layer weight
        assert np.max(np.abs(forward(model, lam, phi) - base)) <= 50 * eps


def test_forward_rejects_wrong_preference_size():
    model = init_model(VLMOP2(3), rng=0)
    with pytest.raises(ValueError):
        forward(model, [0.2, 0.3, 0.5])


def test_vjp_zero_cotangent():
    model = random_model(VLMOP2(3))
    assert not np.any(vjp(model, [0.5, 0.5], np.zeros(3)))


def test_vjp_single_affine_layer_matches_outer_product():
    p = VLMOP2(3)
    rng = np.random.default_rng(0)
    model = PsModel(rng.standard_normal(param_count((2, 3))), (2, 3), p.lower, p.upper)
    lam, u = np.array([0.3, 0.7]), rng.standard_normal(3)
    W, b = model.layers()[0]
    s = 1 / (1 + np.exp(-(W @ lam + b)))
    delta = u * (p.upper - p.lower) * s * (1 - s)
    np.testing.assert_allclose(vjp(model, lam, u), np.concatenate([np.outer(delta, lam).ravel(), delta]), rtol=1e-12)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid", "softplus"])
def test_vjp_matches_finite_differences(activation):
    p = VLMOP2(4)
    base = init_model(p, (8, 8), activation, rng=1)
    rng = np.random.default_rng(2)
    model = base.with_params(base.phi + 0.5 * rng.standard_normal(base.phi.size))
    lam = sample_dirichlet([1, 1], rng, 3)
    u = rng.standard_normal((3, 4))
    h = 1e-6
    fd = np.empty(model.phi.size)
    for j in range(model.phi.size):
        e = np.zeros(model.phi.size)
        e[j] = h
        fd[j] = (np.sum(u * forward(model, lam, model.phi + e)) - np.sum(u * forward(model, lam, model.phi - e))) / (2 * h)
    assert rel_err(vjp(model, lam, u), fd) < 1e-5


def test_dirichlet_examples():
    rng = np.random.default_rng(0)
    S = sample_dirichlet([1, 1], rng, 100_000)
    np.testing.assert_allclose(S.mean(axis=0), [0.5, 0.5], atol=0.01)
    np.testing.assert_allclose(S.sum(axis=1), 1.0)
    assert np.all(S >= 0)
    T = sample_dirichlet([1000, 1], rng, 100_000)
    assert T[:, 0].mean() == pytest.approx(1000 / 1001, abs=0.01)
    assert sample_dirichlet([2, 3, 5], rng).shape == (3,)
    with pytest.raises(ValueError):
        sample_dirichlet([1, 0], rng)


@given(st.lists(st.floats(0.1, 20.0), min_size=2, max_size=4), st.integers(0, 2**32 - 1))
def test_dirichlet_marginal_means(p, seed):
    S = sample_dirichlet(p, np.random.default_rng(seed), 100_000)
    np.testing.assert_allclose(S.mean(axis=0), np.array(p) / np.sum(p), atol=0.01)


def test_config_validation():
    assert PslConfig(weight_source="agg-tche").weight_source == "tche"
    assert PslConfig(weight_source="epo").aggregation is None
    for bad in ({"weight_source": "nope"}, {"batch_K": 0}, {"p": (1, -1)}, {"jacobian_mode": "fd"}):
        with pytest.raises(ValueError):
            PslConfig(**bad)


@pytest.mark.parametrize("kind", ["tche", "ls", "stche", "pbi", "cosmos"])
def test_full_psl_gradient_matches_finite_differences(kind):
    p = VLMOP2(4)
    model = random_model(p, (16, 16), seed=3, scale=0.3)
    lams = sample_dirichlet([1, 1], np.random.default_rng(4), 8)
    cfg = PslConfig(weight_source=kind, hidden=(16, 16))
    spec = cfg.aggregation
    g = psl_gradient(model, p, lams, cfg)
    h = 1e-6
    fd = np.empty(model.phi.size)
    for j in range(model.phi.size):
        e = np.zeros(model.phi.size)
        e[j] = h
        fd[j] = (psl_loss(model.with_params(model.phi + e), p, lams, spec)
                 - psl_loss(model.with_params(model.phi - e), p, lams, spec)) / (2 * h)
    assert rel_err(g, fd) < 1e-4


def test_es_gradient_aligns_with_analytic():
    p = VLMOP2(10)
    model = random_model(p, (64, 64), seed=5, scale=0.1)
    lams = sample_dirichlet([1, 1], np.random.default_rng(6), 32)
    g = psl_gradient(model, p, lams, PslConfig())
    ge = psl_gradient(model, p, lams, PslConfig(jacobian_mode="es", es_pop=512, es_sigma=1e-2),
                      np.random.default_rng(7))
    cos = g @ ge / (np.linalg.norm(g) * np.linalg.norm(ge))
    assert cos >= 0.9


def test_zero_lr_leaves_parameters_unchanged():
    p = VLMOP2(4)
    model = psl_train(p, PslConfig(steps=20, lr=0.0, hidden=(8,)), seed=3)
    assert np.array_equal(model.phi, init_model(p, (8,), rng=np.random.default_rng(3)).phi)


def test_training_is_deterministic():
    cfg = PslConfig(steps=30, hidden=(8, 8))
    a = psl_train(VLMOP2(4), cfg, seed=9)
    b = psl_train(VLMOP2(4), cfg, seed=9)
    assert np.array_equal(a.phi, b.phi)


@pytest.mark.parametrize("src", ["epo", "pmgda"])
def test_solver_weight_sources_train(src):
    p = VLMOP2(4)
    grid, pf = uniform_preferences(50), pareto_front_samples(p, 1000)
    before = igd(psl_evaluate(init_model(p, (16,), rng=0), p, grid).objectives, pf)
    model = psl_train(p, PslConfig(steps=300, lr=5e-3, weight_source=src, hidden=(16,)), seed=0)
    assert igd(psl_evaluate(model, p, grid).objectives, pf) < 0.1 * before


class _NanProblem(VLMOP2):
    def _f(self, theta):
        return np.full((len(theta), 2), np.nan)


def test_nan_loss_aborts():
    with pytest.raises(RunAborted):
        psl_train(_NanProblem(3), PslConfig(steps=5, hidden=(4,)))


@pytest.fixture(scope="module")
def tche_run():
    p = VLMOP2(10)
    cfg = PslConfig(weight_source="tche", steps=3000)
    grid = uniform_preferences(100)
    # loss on a fixed preference grid after every update, free of minibatch noise
    fixed = []
    model = psl_train(p, cfg, seed=0,
                      callback=lambda s, m, loss: fixed.append(psl_loss(m, p, grid, cfg.aggregation)))
    return p, model, np.convolve(fixed, np.ones(100) / 100, mode="valid")


def test_tche_psl_covers_front(tche_run):
    p, model, _ = tche_run
    res = psl_evaluate(model, p, uniform_preferences(100))
    assert igd(res.objectives, pareto_front_samples(p, 1000)) <= 0.05
    r = np.abs(res.preferences[:, 0] * res.objectives[:, 0] - res.preferences[:, 1] * res.objectives[:, 1])
    assert np.median(r) <= 5e-2


def test_tche_psl_loss_trend(tche_run):
    _, _, avg = tche_run
    assert avg[-1] < avg[0]
    assert np.max(np.diff(avg)) < 0.01 * (avg[0] - avg[-1])


@pytest.mark.xfail(strict=True, reason="constant-lr Adam keeps oscillating near the optimum; "
                   "the moving average rises by up to ~5e-5 per step")
def test_tche_psl_moving_average_non_increasing(tche_run):
    _, _, avg = tche_run
    assert np.all(np.diff(avg) <= 0)


def test_ls_psl_collapses_to_endpoints():
    p = VLMOP2(10)
    model = psl_train(p, PslConfig(weight_source="ls", steps=3000), seed=0)
    F = psl_evaluate(model, p, uniform_preferences(100)).objectives
    ends = pareto_front_samples(p, 2)
    near = np.min(np.linalg.norm(F[:, None, :] - ends[None], axis=-1), axis=1) <= 5e-2
    assert span(F) >= 0.9
    assert near.mean() >= 0.9


def test_checkpoint_roundtrip(tmp_path):
    model = random_model(get_problem("zdt1", 3), (5, 4), seed=1)
    path = tmp_path / "m.psm"
    save_model(model, path)
    data = path.read_bytes()
    assert data[:4] == b"MGPS"
    back = load_model(path)
    assert np.array_equal(back.phi, model.phi)
    assert back.layer_sizes == model.layer_sizes and back.activation == model.activation
    np.testing.assert_array_equal(back.lower, model.lower)
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError):
        load_model(path)
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        load_model(path)


def test_evaluate_rejects_off_simplex_grid():
    p = VLMOP2(3)
    with pytest.raises(ValueError):
        psl_evaluate(init_model(p, rng=0), p, [[0.7, 0.7]])
    assert len(psl_evaluate(init_model(p, rng=0), p, [[0.5, 0.5]])) == 1
