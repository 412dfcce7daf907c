"""Multiobjective Bayesian optimization with preference-conditional acquisitions."""

from .acquisition import (
    ALGOS,
    AcquisitionConfig,
    acq_dirhv_ei,
    acq_dirhv_ei_grad,
    acq_tlcb,
    acq_tlcb_grad,
    compute_xi,
    dirhv_ei_monte_carlo,
    log_acq_dirhv_ei,
)
from .gp import GPFitError, GPModel, gp_fit, gp_predict
from .lhs import latin_hypercube
from .loop import MoboHistory, hv_trace, initial_count, mobo_run, random_search

__all__ = [
    "ALGOS",
    "AcquisitionConfig",
    "GPFitError",
    "GPModel",
    "MoboHistory",
    "acq_dirhv_ei",
    "acq_dirhv_ei_grad",
    "acq_tlcb",
    "acq_tlcb_grad",
    "compute_xi",
    "dirhv_ei_monte_carlo",
    "gp_fit",
    "gp_predict",
    "hv_trace",
    "initial_count",
    "latin_hypercube",
    "log_acq_dirhv_ei",
    "mobo_run",
    "random_search",
]
