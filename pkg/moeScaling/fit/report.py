"""
Fit reports and predicted-vs-observed tables.
"""
import io
import json
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from moeScaling.param import SCHEMA_VERSION
from moeScaling.errors import ConfigError
from moeScaling.schemas import FitReportSchema
from moeScaling.scaling import predict_many, observed_losses, coefficients_from_dict


def rmse(predicted, observed):
    diff = np.asarray(predicted, dtype=np.float64) - np.asarray(observed, dtype=np.float64)
    return float(math.sqrt(np.mean(diff * diff))) if diff.size else 0.0


def r_squared(predicted, observed):
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    ss_res = float(np.sum((observed - predicted) ** 2))
    ss_tot = float(np.sum((observed - observed.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class FitReport:
    variant: str
    coefficients: object
    objective: float
    huber_delta: float
    seed: int
    starts_attempted: int
    starts_converged: int
    n_records: int
    residuals: tuple
    in_sample_rmse: float
    holdout_sparsity: float = None
    heldout_rmse: float = None
    n_heldout: int = None

    def to_dict(self):
        output = {
            "schema_version": SCHEMA_VERSION,
            "variant": self.variant,
            "coefficients": self.coefficients.to_dict(),
            "objective": self.objective,
            "huber_delta": self.huber_delta,
            "seed": self.seed,
            "starts_attempted": self.starts_attempted,
            "starts_converged": self.starts_converged,
            "n_records": self.n_records,
            "residuals": list(self.residuals),
            "in_sample_rmse": self.in_sample_rmse,
        }
        if self.holdout_sparsity is not None:
            output["holdout_sparsity"] = self.holdout_sparsity
            output["heldout_rmse"] = self.heldout_rmse
            output["n_heldout"] = self.n_heldout
        return output

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, payload):
        FitReportSchema.validate(payload)
        return cls(
            variant=payload["variant"],
            coefficients=coefficients_from_dict(payload["coefficients"]),
            objective=float(payload["objective"]),
            huber_delta=float(payload["huber_delta"]),
            seed=payload["seed"],
            starts_attempted=payload["starts_attempted"],
            starts_converged=payload["starts_converged"],
            n_records=payload["n_records"],
            residuals=tuple(float(x) for x in payload["residuals"]),
            in_sample_rmse=float(payload["in_sample_rmse"]),
            holdout_sparsity=payload.get("holdout_sparsity"),
            heldout_rmse=payload.get("heldout_rmse"),
            n_heldout=payload.get("n_heldout"),
        )


@dataclass(frozen=True)
class PredictionTable:
    """Plot-ready rows of (observed, predicted, residual) with residual = predicted - observed."""
    observed: tuple
    predicted: tuple
    rmse: float
    r_squared: float

    @property
    def rows(self):
        return [(o, p, p - o) for o, p in zip(self.observed, self.predicted)]

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=["observed", "predicted", "residual"])

    def to_csv(self):
        buffer = io.StringIO()
        self.to_frame().to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()


def predict_vs_observed(coef, records, **kwargs) -> PredictionTable:
    if coef is None:
        raise ConfigError("coefficients are required")
    if not records:
        raise ConfigError("no records to compare against")
    observed = observed_losses(records)
    predicted = predict_many(coef, records, **kwargs)
    return PredictionTable(
        observed=tuple(float(x) for x in observed),
        predicted=tuple(float(x) for x in predicted),
        rmse=rmse(predicted, observed),
        r_squared=r_squared(predicted, observed),
    )
