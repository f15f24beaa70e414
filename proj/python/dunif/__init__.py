"""Transient distributions, simulation and inference for stochastic SIR and
predator-prey chains."""

from ._dunif import (
    Error,
    NumericalError,
    ValidationError,
    fit_map,
    fit_ode,
    gamma_full,
    hmc,
    log_likelihood,
    read_cases,
    simulate_pp,
    simulate_sir,
    solve_pp,
    solve_sir,
    summarize,
)

__all__ = [
    "Error",
    "NumericalError",
    "ValidationError",
    "fit_map",
    "fit_ode",
    "gamma_full",
    "hmc",
    "log_likelihood",
    "read_cases",
    "simulate_pp",
    "simulate_sir",
    "solve_pp",
    "solve_sir",
    "summarize",
]
