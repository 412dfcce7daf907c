"""Pareto set learning with a preference-conditioned multilayer perceptron.

The model maps a preference ``lam`` on the simplex to a decision vector
inside the problem box.  Training samples preferences from a Dirichlet
distribution and follows the chain rule ``dg/dphi = (dg/dL) (dL/dtheta)
(dtheta/dphi)``: the first factor comes from an aggregation gradient or a
solver's dynamic weights, the second is the problem Jacobian (analytic or an
evolution-strategy estimate), and the third is applied by a hand-written
reverse pass through the network.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .aggregation import KINDS, AggregationSpec, aggregate, aggregate_grad
from .problems import Problem
from .solvers.descent import Optimizer, RunAborted, SolutionSet
from .solvers.es import es_gradient
from .solvers.weights import GradientBundle, epo_weights, pmgda_weights

log = logging.getLogger(__name__)

SOLVER_SOURCES = ("epo", "pmgda")

_ACTIVATIONS = ("tanh", "sigmoid", "softplus")
_MAGIC = b"MGPS"
_VERSION = 1


def _act(name: str, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(a)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * a))
    return np.logaddexp(0.0, a)


def _act_deriv(name: str, a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation ``a`` (output ``h``)."""
    if name == "tanh":
        return 1.0 - h * h
    if name == "sigmoid":
        return h * (1.0 - h)
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def param_count(layer_sizes) -> int:
    return int(sum(o * i + o for i, o in zip(layer_sizes[:-1], layer_sizes[1:])))


@dataclass(frozen=True, eq=False)
class PsModel:
    """Flat parameters of an MLP ``m -> hidden... -> n`` plus its output box.

    Hidden layers use ``activation``; the output layer is squashed by a
    sigmoid onto ``[lower, upper]``.  Parameters are stored layer by layer as
    ``W`` (row-major, shape ``(out, in)``) followed by ``b``.
    """

    phi: np.ndarray
    layer_sizes: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; choose from {_ACTIVATIONS}")
        phi = np.asarray(self.phi, dtype=float).ravel()
        if phi.size != param_count(sizes):
            raise ValueError(f"expected {param_count(sizes)} parameters, got {phi.size}")
        if not np.all(np.isfinite(phi)):
            raise ValueError("parameters must be finite")
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (sizes[-1],)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (sizes[-1],)).copy()
        if np.any(upper <= lower):
            raise ValueError("upper bounds must exceed lower bounds")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def m(self) -> int:
        return self.layer_sizes[0]

    @property
    def n(self) -> int:
        return self.layer_sizes[-1]

    def layers(self, phi: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views ``(W, b)`` into ``phi`` (defaults to the model's own)."""
        phi = self.phi if phi is None else phi
        out, pos = [], 0
        for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = phi[pos:pos + o * i].reshape(o, i)
            pos += o * i
            out.append((W, phi[pos:pos + o]))
            pos += o
        return out

    def with_params(self, phi: np.ndarray) -> PsModel:
        return PsModel(phi, self.layer_sizes, self.lower, self.upper, self.activation)


def init_model(problem: Problem, hidden=(64, 64), activation: str = "tanh",
               rng: np.random.Generator | int | None = None) -> PsModel:
    """Fresh model for ``problem``.

    Hidden weights are drawn from ``N(0, 1/fan_in)`` and biases are zero.  The
    output layer starts at zero, so an untrained model returns the box
    midpoint for every preference.
    """
    rng = np.random.default_rng(rng)
    sizes = (problem.m, *[int(h) for h in hidden], problem.n)
    chunks = []
    for k, (i, o) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = k == len(sizes) - 2
        W = np.zeros((o, i)) if last else rng.standard_normal((o, i)) / np.sqrt(i)
        chunks += [W.ravel(), np.zeros(o)]
    return PsModel(np.concatenate(chunks), sizes, problem.lower, problem.upper, activation)


def _check_lam(model: PsModel, lam) -> tuple[np.ndarray, bool]:
    lam = np.asarray(lam, dtype=float)
    single = lam.ndim == 1
    lam = np.atleast_2d(lam)
    if lam.ndim != 2 or lam.shape[1] != model.m:
        raise ValueError(f"preferences must have {model.m} entries, got shape {lam.shape}")
    return lam, single


def _forward_cache(model: PsModel, lam: np.ndarray, phi=None):
    acts = [lam]
    pres = []
    layers = model.layers(phi)
    h = lam
    for k, (W, b) in enumerate(layers):
        a = h @ W.T + b
        pres.append(a)
        h = _act(model.activation, a) if k < len(layers) - 1 else _act("sigmoid", a)
        acts.append(h)
    return layers, pres, acts


def forward(model: PsModel, lam, phi: np.ndarray | None = None) -> np.ndarray:
    """Decision vector(s) for preference(s) ``lam`` (shape ``(m,)`` or ``(B, m)``)."""
    lam, single = _check_lam(model, lam)
    s = _forward_cache(model, lam, phi)[2][-1]
    theta = model.lower + (model.upper - model.lower) * s
    return theta[0] if single else theta


def vjp(model: PsModel, lam, u) -> np.ndarray:
    """``sum_b u_b^T d theta(lam_b) / d phi`` by reverse accumulation.

    ``u`` matches the shape of ``forward(model, lam)``.
    """
    lam, single = _check_lam(model, lam)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape != (lam.shape[0], model.n):
        raise ValueError(f"cotangent must have shape {(lam.shape[0], model.n)}, got {u.shape}")
    layers, pres, acts = _forward_cache(model, lam)
    s = acts[-1]
    delta = u * (model.upper - model.lower) * s * (1.0 - s)
    grads = []
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        grads.append((delta.T @ acts[k], delta.sum(axis=0)))
        if k:
            delta = (delta @ W) * _act_deriv(model.activation, pres[k - 1], acts[k])
    out = []
    for gW, gb in reversed(grads):
        out += [gW.ravel(), gb]
    return np.concatenate(out)


def sample_dirichlet(p, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Preference(s) from ``Dir(p)``, built from normalized Gamma variates."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2 or np.any(p <= 0):
        raise ValueError("Dirichlet concentration must be a positive vector of length >= 2")
    return rng.dirichlet(p, size=size)


@dataclass
class PslConfig:
    """Training settings for Pareto set learning.

    ``weight_source`` is an aggregation id (``"tche"``, ``"ls"``, ...,
    optionally prefixed ``"agg-"``) or a solver id from ``SOLVER_SOURCES``.
    With ``jacobian_mode="es"`` the problem Jacobian is replaced by an
    antithetic evolution-strategy estimate using ``es_pop`` evaluations.
    """

    p: tuple[float, ...] | None = None
    batch_K: int = 32
    steps: int = 3000
    lr: float = 1e-3
    weight_source: str = "tche"
    jacobian_mode: str = "analytic"
    optimizer: str = "adam"
    hidden: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    es_sigma: float = 1e-2
    es_pop: int = 128
    aggregation: AggregationSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.batch_K < 1:
            raise ValueError("batch_K must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.p is not None and np.any(np.asarray(self.p, dtype=float) <= 0):
            raise ValueError("Dirichlet concentration must be positive")
        if self.jacobian_mode not in ("analytic", "es"):
            raise ValueError(f"unknown jacobian mode {self.jacobian_mode!r}")
        src = self.weight_source.lower()
        if src.startswith(("agg-", "agg_")):
            src = src[4:]
        if src not in KINDS and src not in SOLVER_SOURCES:
            raise ValueError(f"unknown weight source {self.weight_source!r}")
        self.weight_source = src
        if self.aggregation is None and src in KINDS:
            self.aggregation = AggregationSpec(src)

    def concentration(self, m: int) -> np.ndarray:
        if self.p is None:
            return np.ones(m)
        p = np.asarray(self.p, dtype=float)
        if p.shape != (m,):
            raise ValueError(f"Dirichlet concentration must have {m} entries")
        return p


def _source_weights(cfg: PslConfig, L: np.ndarray, J: np.ndarray, lams: np.ndarray) -> np.ndarray:
    if cfg.weight_source in KINDS:
        return np.stack([aggregate_grad(cfg.aggregation, L[k], lams[k]) for k in range(len(L))])
    solve = epo_weights if cfg.weight_source == "epo" else pmgda_weights
    return np.stack([solve(GradientBundle(J[k], L[k], lams[k])).alpha for k in range(len(L))])


def _jacobians(problem: Problem, theta: np.ndarray, cfg: PslConfig, rng) -> np.ndarray:
    if cfg.jacobian_mode == "analytic":
        return problem.jacobian(theta)
    return np.stack([es_gradient(problem.evaluate, t, cfg.es_sigma, cfg.es_pop, rng) for t in theta])


def psl_loss(model: PsModel, problem: Problem, lams, spec: AggregationSpec) -> float:
    """Mean aggregation value of the model's solutions over a preference batch."""
    lams = np.atleast_2d(lams)
    L = problem.evaluate(forward(model, lams))
    return float(np.mean([aggregate(spec, L[k], lams[k]) for k in range(len(lams))]))


def psl_gradient(model: PsModel, problem: Problem, lams, cfg: PslConfig,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Batch-mean PSL gradient w.r.t. the flat parameters.

    For aggregation sources this is the exact gradient of ``psl_loss`` when
    the Jacobian is analytic.
    """
    lams = np.atleast_2d(np.asarray(lams, dtype=float))
    theta = forward(model, lams)
    L = problem.evaluate(theta)
    if not np.all(np.isfinite(L)):
        raise RunAborted("PSL produced non-finite objectives")
    J = _jacobians(problem, theta, cfg, rng if rng is not None else np.random.default_rng())
    alpha = _source_weights(cfg, L, J, lams)
    v = np.einsum("km,kmn->kn", alpha, J)
    return vjp(model, lams, v) / len(lams)


def psl_train(problem: Problem, cfg: PslConfig | None = None, seed: int = 0,
              callback: Callable | None = None) -> PsModel:
    """Train a Pareto set model; deterministic for a given seed.

    ``callback(step, model, loss)`` runs after every update, where ``loss``
    is the batch-mean aggregation value (or ``sum_i alpha_i L_i`` for solver
    weight sources) before the update.
    """
    cfg = cfg or PslConfig()
    rng = np.random.default_rng(seed)
    model = init_model(problem, cfg.hidden, cfg.activation, rng)
    p = cfg.concentration(problem.m)
    opt = Optimizer(cfg.optimizer, model.phi.shape)
    phi = model.phi.copy()
    for step in range(cfg.steps):
        lams = sample_dirichlet(p, rng, cfg.batch_K)
        theta = forward(model, lams)
        L = problem.evaluate(theta)
        if not np.all(np.isfinite(L)):
            raise RunAborted(f"PSL on {problem.name}: non-finite objectives at step {step}")
        J = _jacobians(problem, theta, cfg, rng)
        alpha = _source_weights(cfg, L, J, lams)
        if cfg.weight_source in KINDS:
            loss = float(np.mean([aggregate(cfg.aggregation, L[k], lams[k]) for k in range(len(L))]))
        else:
            loss = float(np.mean(np.sum(alpha * L, axis=1)))
        if not np.isfinite(loss):
            raise RunAborted(f"PSL on {problem.name}: loss became {loss} at step {step}")
        grad = vjp(model, lams, np.einsum("km,kmn->kn", alpha, J)) / len(lams)
        phi = phi - opt.step(grad, cfg.lr)
        model = model.with_params(phi)
        if callback is not None:
            callback(step, model, loss)
    return model


def psl_evaluate(model: PsModel, problem: Problem, preference_grid, seed: int = 0,
                 name: str = "psl") -> SolutionSet:
    """Solutions and objectives of the model on a grid of preferences."""
    prefs = np.atleast_2d(np.asarray(preference_grid, dtype=float))
    if np.any(prefs < 0) or not np.allclose(prefs.sum(axis=1), 1.0):
        raise ValueError("preference grid must lie on the simplex")
    theta = forward(model, prefs)
    return SolutionSet(theta, problem.evaluate(theta), prefs, name, seed)


def save_model(model: PsModel, path) -> None:
    """Write a little-endian binary checkpoint with a versioned header.

    Layout: magic ``MGPS``, ``uint32`` version, ``uint32`` activation index,
    ``uint32`` layer count followed by the layer sizes, then ``float64``
    lower bounds, upper bounds and the flat parameters.
    """
    sizes = model.layer_sizes
    head = _MAGIC + struct.pack(f"<III{len(sizes)}I", _VERSION, _ACTIVATIONS.index(model.activation),
                                len(sizes), *sizes)
    body = np.concatenate([model.lower, model.upper, model.phi]).astype("<f8").tobytes()
    Path(path).write_bytes(head + body)


def load_model(path) -> PsModel:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path} is not a Pareto set model checkpoint")
    version, act, count = struct.unpack_from("<III", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    sizes = struct.unpack_from(f"<{count}I", data, 16)
    off = 16 + 4 * count
    n = sizes[-1]
    vals = np.frombuffer(data, dtype="<f8", offset=off).astype(float)
    if vals.size != 2 * n + param_count(sizes):
        raise ValueError(f"{path} is truncated or corrupt")
    return PsModel(vals[2 * n:], sizes, vals[:n], vals[n:2 * n], _ACTIVATIONS[act])
