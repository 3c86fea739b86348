"""
This module evaluates the extended MoE loss scaling law with stored coefficients, and the two alternative published
laws for comparison. Evaluation is routed to the law module that matches the coefficient variant.
"""
import logging
from dataclasses import dataclass

import numpy as np

from moeScaling.param import defaultActiveExperts
from moeScaling.errors import ConfigError, DomainError
from moeScaling.scaling.laws import get_law, final_law
from moeScaling.scaling.coefficients import LossLawCoefficients, AltLawCoefficients, coefficients_from_dict
from moeScaling.scaling.records import (
    RunRecord,
    read_records_csv,
    write_records_csv,
    records_to_frame,
    record_features,
    observed_losses,
    recordColumns,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossTerms:
    params: float
    data: float
    allocation: float
    efficiency: float
    irreducible: float

    @property
    def total(self):
        return self.params + self.data + self.allocation + self.efficiency + self.irreducible


def _check_coefficients(coef, expected):
    if coef is None:
        raise ConfigError("coefficients are required")
    if not isinstance(coef, expected):
        raise ConfigError(f"expected {expected.__name__}, got {type(coef).__name__}")


def predict_many(coef, records, n_active_experts=defaultActiveExperts):
    """Vectorised prediction for any coefficient set over a list of records."""
    if coef is None:
        raise ConfigError("coefficients are required")
    law = get_law(coef.variant)
    X = record_features(records, param_count=coef.param_count, n_active_experts=n_active_experts)
    r_term_mode = getattr(coef, "r_term_mode", "r")
    return law.evaluate(coef.to_vector(), X, r_term_mode=r_term_mode)


def loss_terms(coef: LossLawCoefficients, rec: RunRecord) -> LossTerms:
    _check_coefficients(coef, LossLawCoefficients)
    X = record_features([rec], param_count=coef.param_count)
    values = final_law.terms(coef.to_vector(), X, r_term_mode=coef.r_term_mode)
    return LossTerms(*(float(v[0]) for v in values))


def predict_loss(coef: LossLawCoefficients, rec: RunRecord) -> float:
    """
    L = a/N^alpha + b/D^beta + c e^R (1-S)^gamma / N^lambda + d r/(r+1) + tau, with R = r unless the coefficients
    say otherwise.
    """
    return loss_terms(coef, rec).total


def predict_loss_alt(coef: AltLawCoefficients, rec: RunRecord, n_active_experts=defaultActiveExperts) -> float:
    _check_coefficients(coef, AltLawCoefficients)
    if n_active_experts <= 0:
        raise DomainError("n_active_experts must be positive")
    return float(predict_many(coef, [rec], n_active_experts=n_active_experts)[0])


def loss_curve(coef: LossLawCoefficients, rec: RunRecord, token_grid):
    """Loss along a token grid with everything else fixed; returns [(D, loss), ...]."""
    _check_coefficients(coef, LossLawCoefficients)
    token_grid = [float(D) for D in token_grid]
    if not token_grid:
        raise ConfigError("token grid is empty")
    if any(D <= 0 for D in token_grid):
        raise ConfigError("token grid values must be positive")
    if any(b <= a for a, b in zip(token_grid, token_grid[1:])):
        raise ConfigError("token grid must be strictly ascending")
    losses = predict_many(coef, [rec.with_tokens(D) for D in token_grid])
    return [(D, float(loss)) for D, loss in zip(token_grid, losses)]


__all__ = [
    "LossTerms",
    "LossLawCoefficients",
    "AltLawCoefficients",
    "coefficients_from_dict",
    "RunRecord",
    "read_records_csv",
    "write_records_csv",
    "records_to_frame",
    "record_features",
    "observed_losses",
    "recordColumns",
    "predict_many",
    "loss_terms",
    "predict_loss",
    "predict_loss_alt",
    "loss_curve",
]
