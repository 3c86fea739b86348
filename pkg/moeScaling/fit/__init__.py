"""
The estimation pipeline: r* extraction from ratio sweeps, log-log power-law fits of r* against compute and of the
allocation coefficients against sparsity, and multi-start fits of the loss laws.
"""
from moeScaling.fit.rstar import (
    SweepGroup,
    RStarObservation,
    extract_rstar,
    read_sweep_csv,
    read_rstar_csv,
    rstar_frame,
)
from moeScaling.fit.power_law import (
    PowerLawFit,
    SparsityLawFit,
    fit_power_law,
    fit_sparsity_laws,
    fit_allocation_laws,
)
from moeScaling.fit.loss_law import (
    fit_loss_law,
    grid_starts,
    grid_shape,
    loss_law_objective,
    huber,
    huber_derivative,
)
from moeScaling.fit.report import FitReport, PredictionTable, predict_vs_observed, rmse, r_squared

__all__ = [
    "SweepGroup",
    "RStarObservation",
    "extract_rstar",
    "read_sweep_csv",
    "read_rstar_csv",
    "rstar_frame",
    "PowerLawFit",
    "SparsityLawFit",
    "fit_power_law",
    "fit_sparsity_laws",
    "fit_allocation_laws",
    "fit_loss_law",
    "grid_starts",
    "grid_shape",
    "loss_law_objective",
    "huber",
    "huber_derivative",
    "FitReport",
    "PredictionTable",
    "predict_vs_observed",
    "rmse",
    "r_squared",
]
