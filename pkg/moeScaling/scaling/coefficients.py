"""
Coefficient sets of the loss laws. Both classes are immutable and serialize through LawCoefficientsSchema.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from moeScaling.param import (
    publishedLossLawCoefficients,
    rTermModeList,
    paramCountModeList,
    provenanceList,
    altLawVariantList,
)
from moeScaling.errors import ConfigError, SchemaError
from moeScaling.schemas import LawCoefficientsSchema
from moeScaling.scaling.laws import get_law, final_law

_weightNames = ("a", "b", "c", "d")


def _check_values(values):
    for name, value in values.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise ConfigError(f"coefficient {name} must be a finite number, got {value!r}")
        if (name in _weightNames or name == "tau") and value < 0:
            raise ConfigError(f"coefficient {name} must be nonnegative, got {value}")


def _check_modes(r_term_mode, param_count, provenance):
    if r_term_mode not in rTermModeList:
        raise ConfigError(f"r_term_mode must be one of: {rTermModeList}")
    if param_count not in paramCountModeList:
        raise ConfigError(f"param_count must be one of: {paramCountModeList}")
    if provenance not in provenanceList:
        raise ConfigError(f"provenance must be one of: {provenanceList}")


def _require(payload, names, variant):
    missing = [name for name in names if payload.get(name) is None]
    if missing:
        raise SchemaError(f"{variant} law coefficients missing field(s) {missing}")
    extra = [name for name in ("a", "b", "c", "d", "alpha", "beta", "lambda", "gamma", "delta", "tau")
             if payload.get(name) is not None and name not in names]
    if extra:
        raise SchemaError(f"{variant} law coefficients do not use field(s) {extra}")


@dataclass(frozen=True)
class LossLawCoefficients:
    """
    The nine coefficients of the extended scaling law.

    r_term_mode: how R in e^R is read, "r" (default) or "r_over_1plus_r".
    param_count: whether N is total ("total", default) or activated ("active") parameters.
    """
    a: float
    b: float
    c: float
    d: float
    alpha: float
    beta: float
    lambda_: float
    gamma: float
    tau: float
    r_term_mode: str = "r"
    param_count: str = "total"
    provenance: str = "user"

    def __post_init__(self):
        _check_values(self.values())
        _check_modes(self.r_term_mode, self.param_count, self.provenance)

    @property
    def variant(self):
        return "final"

    def values(self):
        return {
            "a": self.a, "b": self.b, "c": self.c, "d": self.d,
            "alpha": self.alpha, "beta": self.beta, "lambda": self.lambda_, "gamma": self.gamma,
            "tau": self.tau,
        }

    def to_vector(self):
        values = self.values()
        return np.array([values[name] for name in final_law.NAMES], dtype=np.float64)

    @classmethod
    def from_vector(cls, theta, **kwargs):
        values = dict(zip(final_law.NAMES, (float(x) for x in theta)))
        values["lambda_"] = values.pop("lambda")
        return cls(**values, **kwargs)

    def to_dict(self):
        output = {"variant": "final"}
        output.update(self.values())
        output["r_term_mode"] = self.r_term_mode
        output["param_count"] = self.param_count
        output["provenance"] = self.provenance
        return output

    @classmethod
    def from_dict(cls, payload):
        LawCoefficientsSchema.validate(payload)
        if payload["variant"] != "final":
            raise SchemaError(f"expected variant 'final', got {payload['variant']!r}")
        _require(payload, final_law.NAMES, "final")
        return cls.from_vector(
            [payload[name] for name in final_law.NAMES],
            r_term_mode=payload.get("r_term_mode") or "r",
            param_count=payload.get("param_count") or "total",
            provenance=payload.get("provenance") or "user",
        )

    @classmethod
    def published(cls, r_term_mode="r"):
        return cls.from_vector(
            [publishedLossLawCoefficients[name] for name in final_law.NAMES],
            r_term_mode=r_term_mode,
            provenance="paper-fit",
        )


@dataclass(frozen=True)
class AltLawCoefficients:
    """
    Coefficients of an alternative published law ("wang" or "abnar"), keyed by the variant's parameter names.
    """
    variant: str
    params: dict = field(default_factory=dict)
    param_count: str = "total"
    provenance: str = "user"

    def __post_init__(self):
        if self.variant not in altLawVariantList:
            raise ConfigError(f"variant must be one of: {altLawVariantList}")
        names = get_law(self.variant).NAMES
        _require(self.params, names, self.variant)
        _check_values(self.params)
        _check_modes("r", self.param_count, self.provenance)

    def to_vector(self):
        return np.array([self.params[name] for name in get_law(self.variant).NAMES], dtype=np.float64)

    @classmethod
    def from_vector(cls, variant, theta, **kwargs):
        return cls(variant=variant, params=dict(zip(get_law(variant).NAMES, (float(x) for x in theta))), **kwargs)

    def to_dict(self):
        output = {"variant": self.variant}
        output.update(self.params)
        output["param_count"] = self.param_count
        output["provenance"] = self.provenance
        return output

    @classmethod
    def from_dict(cls, payload):
        LawCoefficientsSchema.validate(payload)
        variant = payload["variant"]
        if variant not in altLawVariantList:
            raise SchemaError(f"expected one of {altLawVariantList}, got {variant!r}")
        names = get_law(variant).NAMES
        _require(payload, names, variant)
        return cls(
            variant=variant,
            params={name: float(payload[name]) for name in names},
            param_count=payload.get("param_count") or "total",
            provenance=payload.get("provenance") or "user",
        )


def coefficients_from_dict(payload):
    """Dispatch on the variant tag."""
    if not isinstance(payload, dict):
        raise SchemaError("coefficients must be a JSON object")
    if payload.get("variant") == "final":
        return LossLawCoefficients.from_dict(payload)
    return AltLawCoefficients.from_dict(payload)
