"""Penalized estimation for noisy linear systems, with LSTD experiments."""

from ._core import (
    Error,
    LinearSystem,
    Penalty,
    RhoSelection,
    SolveResult,
    TailModel,
    calibrate_tails,
    compute_errors,
    conditioning,
    derive_seed,
    exact_system,
    loss,
    oracle_infimum,
    run_experiment,
    select_rho,
    solve_squared,
    solve_unsquared,
)

__all__ = [
    "Error",
    "LinearSystem",
    "Penalty",
    "RhoSelection",
    "SolveResult",
    "TailModel",
    "calibrate_tails",
    "compute_errors",
    "conditioning",
    "derive_seed",
    "exact_system",
    "loss",
    "oracle_infimum",
    "run_experiment",
    "select_rho",
    "solve_squared",
    "solve_unsquared",
]
