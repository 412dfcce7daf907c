"""Finite-set multiobjective gradient solvers."""

from .descent import (
    PREFERENCE_BASED,
    SOLVERS,
    Optimizer,
    RunAborted,
    RunConfig,
    SolutionSet,
    descend,
    parse_solver,
    uniform_preferences,
)
from .es import es_gradient
from .hvgrad import hv_gradient
from .svgd import median_bandwidth, svgd_step
from .weights import (
    GradientBundle,
    WeightResult,
    epo_weights,
    min_norm_weights,
    pmgda_weights,
    pmtl_weights,
    random_weights,
    sector_constraints,
)

__all__ = [
    "PREFERENCE_BASED",
    "SOLVERS",
    "GradientBundle",
    "Optimizer",
    "RunAborted",
    "RunConfig",
    "SolutionSet",
    "WeightResult",
    "descend",
    "epo_weights",
    "es_gradient",
    "hv_gradient",
    "median_bandwidth",
    "min_norm_weights",
    "parse_solver",
    "pmgda_weights",
    "pmtl_weights",
    "random_weights",
    "sector_constraints",
    "svgd_step",
    "uniform_preferences",
]
