"""Pool-model dynamic pricing: revenue, solvers, robust policies, simulation."""

import json as _json

from ._poolprice import (
    Instance,
    InvalidArgument,
    PriceLadder,
    cr_lower_bound,
    debiased_estimates,
    default_exploration,
    expected_revenue,
    fit_loglog_slope,
    per_type_revenues,
    q,
    revenue_gradient,
    robust_continuous,
    robust_finite,
    simulate_revenue,
    solve_dp,
    solve_gradient,
    upper_bound,
    worst_case_ratio,
)
from ._poolprice import run_experiment as _run_experiment


def run_experiment(kind, config=None):
    """Run one experiment and return its rows as a list of dicts."""
    return _run_experiment(kind, _json.dumps(config or {}))


__all__ = [
    "Instance",
    "InvalidArgument",
    "PriceLadder",
    "cr_lower_bound",
    "debiased_estimates",
    "default_exploration",
    "expected_revenue",
    "fit_loglog_slope",
    "per_type_revenues",
    "q",
    "revenue_gradient",
    "robust_continuous",
    "robust_finite",
    "run_experiment",
    "simulate_revenue",
    "solve_dp",
    "solve_gradient",
    "upper_bound",
    "worst_case_ratio",
]
