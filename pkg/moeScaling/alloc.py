"""
This module is the allocation-law engine: it evaluates the optimal expert/attention FLOPs ratio r*(C, S) = alpha_r(S) C^beta_r(S),
derives (alpha_r, beta_r) from sparsity or from the elasticities of a two-term loss model, and solves that loss model numerically
as an oracle.

Unit convention: C is TOTAL TRAINING FLOPs. Evaluating the sparsity laws at 1e21 FLOPs lands r* inside the swept
range [0.2, 1.5]; per-token FLOPs would give implausibly small ratios. Any consistent unit may be passed.
"""
import logging
import math
from dataclasses import dataclass, asdict
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar, brentq

from moeScaling.param import (
    sparsityLawAlphaCoef,
    sparsityLawAlphaExp,
    sparsityLawBetaCoef,
    sparsityLawBetaExp,
    provenanceList,
    oracleRatioBounds,
    oracleGridPoints,
    oracleRelativeWidth,
    efficiencyFormList,
)
from moeScaling.errors import ConfigError, DomainError, BracketError
from moeScaling.schemas import AllocationLawSchema, ElasticityParamsSchema, SparsityLawSchema

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AllocationLaw:
    alpha_r: float
    beta_r: float
    provenance: str = "user"
    sparsity: float = None

    def __post_init__(self):
        if not (self.alpha_r > 0 and math.isfinite(self.alpha_r)):
            raise ConfigError(f"alpha_r must be positive and finite, got {self.alpha_r}")
        if not math.isfinite(self.beta_r):
            raise ConfigError(f"beta_r must be finite, got {self.beta_r}")
        if self.provenance not in provenanceList:
            raise ConfigError(f"provenance must be one of: {provenanceList}")

    def to_dict(self):
        output = asdict(self)
        if self.sparsity is None:
            output.pop("sparsity")
        return output

    @classmethod
    def from_dict(cls, payload):
        AllocationLawSchema.validate(payload)
        return cls(
            alpha_r=float(payload["alpha_r"]),
            beta_r=float(payload["beta_r"]),
            provenance=payload["provenance"],
            sparsity=payload.get("sparsity"),
        )


@dataclass(frozen=True)
class ElasticityParams:
    """
    L = alpha_A * C_A^(-gamma_A mu_A) + alpha_E * C_E^(-gamma_E mu_E)
    """
    mu_A: float
    mu_E: float
    gamma_A: float
    gamma_E: float
    alpha_A: float
    alpha_E: float

    def __post_init__(self):
        if not (0 < self.mu_A < 1 and 0 < self.mu_E < 1):
            raise ConfigError("mu_A and mu_E must lie in (0, 1)")
        for name in ["gamma_A", "gamma_E", "alpha_A", "alpha_E"]:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def k_A(self):
        return self.gamma_A * self.mu_A

    @property
    def k_E(self):
        return self.gamma_E * self.mu_E

    def swapped(self):
        return ElasticityParams(
            mu_A=self.mu_E, mu_E=self.mu_A,
            gamma_A=self.gamma_E, gamma_E=self.gamma_A,
            alpha_A=self.alpha_E, alpha_E=self.alpha_A,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        ElasticityParamsSchema.validate(payload)
        return cls(**{k: float(v) for k, v in payload.items()})


@dataclass(frozen=True)
class SparsityLaw:
    """
    alpha_r = alpha_coef (1-S)^alpha_exp, beta_r = beta_coef (1-S)^beta_exp
    """
    alpha_coef: float = sparsityLawAlphaCoef
    alpha_exp: float = sparsityLawAlphaExp
    beta_coef: float = sparsityLawBetaCoef
    beta_exp: float = sparsityLawBetaExp
    provenance: str = "paper-fit"

    def __post_init__(self):
        if not (self.alpha_coef > 0 and math.isfinite(self.alpha_coef)):
            raise ConfigError(f"alpha_coef must be positive and finite, got {self.alpha_coef}")
        for name in ["alpha_exp", "beta_coef", "beta_exp"]:
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite, got {getattr(self, name)}")
        if self.provenance not in provenanceList:
            raise ConfigError(f"provenance must be one of: {provenanceList}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        SparsityLawSchema.validate(payload)
        return cls(**payload)


PUBLISHED_SPARSITY_LAW = SparsityLaw()


def _active_fraction(S):
    # SparsityLevel carries (E, e_act) exactly; floats are taken as given
    if hasattr(S, "active_fraction"):
        return float(S.active_fraction), float(S.fraction)
    if isinstance(S, Fraction):
        return float(1 - S), float(S)
    S = float(S)
    return 1.0 - S, S


def sparsity_coefficients(S, law: SparsityLaw = PUBLISHED_SPARSITY_LAW) -> AllocationLaw:
    active, S_value = _active_fraction(S)
    if not 0 <= S_value < 1:
        raise DomainError(f"sparsity must satisfy 0 <= S < 1, got {S_value}")
    alpha_r = law.alpha_coef * active ** law.alpha_exp
    beta_r = law.beta_coef * active ** law.beta_exp
    return AllocationLaw(alpha_r=alpha_r, beta_r=beta_r, provenance="sparsity-law", sparsity=S_value)


def optimal_ratio(law: AllocationLaw, C: float) -> float:
    if not C > 0:
        raise DomainError(f"compute must be positive, got {C}")
    return law.alpha_r * math.exp(law.beta_r * math.log(C))


def elasticity_closed_form(p: ElasticityParams) -> AllocationLaw:
    """
    The published closed form, including the sign of the beta_r numerator. It relies on an approximation of the
    (1+r) factors, so it is not the exact constrained optimum; numeric_optimal_ratio quantifies the gap.
    """
    denom = p.k_A + p.k_E + 1
    alpha_r = ((p.alpha_E * p.k_E) / (p.alpha_A * p.k_A)) ** (1 / denom)
    beta_r = (p.k_E - p.k_A) / denom
    return AllocationLaw(alpha_r=alpha_r, beta_r=beta_r, provenance="elasticity-derived")


def elasticity_loss(p: ElasticityParams, C, r):
    """Two-term loss at total compute C split as C_A = C/(1+r), C_E = Cr/(1+r). Vectorised over r."""
    r = np.asarray(r, dtype=np.float64)
    log_c = math.log(C)
    log_ca = log_c - np.log1p(r)
    log_ce = log_c + np.log(r) - np.log1p(r)
    return p.alpha_A * np.exp(-p.k_A * log_ca) + p.alpha_E * np.exp(-p.k_E * log_ce)


def _log_marginal_gap(p, log_c, u):
    # log of alpha_A k_A / C_A^(k_A+1) minus log of alpha_E k_E / C_E^(k_E+1), increasing in u = log r
    log1p_r = np.logaddexp(0.0, u)
    log_ca = log_c - log1p_r
    log_ce = log_c + u - log1p_r
    lhs = math.log(p.alpha_A * p.k_A) - (p.k_A + 1) * log_ca
    rhs = math.log(p.alpha_E * p.k_E) - (p.k_E + 1) * log_ce
    return float(lhs - rhs)


def marginal_residual(p: ElasticityParams, C: float, r: float) -> float:
    """Relative residual |lhs - rhs| / max(lhs, rhs) of the marginal-equality condition."""
    gap = _log_marginal_gap(p, math.log(C), math.log(r))
    return -math.expm1(-abs(gap))


@dataclass(frozen=True)
class OracleResult:
    r: float
    loss: float
    residual: float


def numeric_optimal_ratio(p: ElasticityParams, C: float) -> OracleResult:
    """
    Minimise the two-term loss over r: log-space grid bracket on [1e-6, 1e6], golden-section refinement of log r,
    then a root polish of the marginal-equality condition inside the bracket.

    Raises:
        BracketError: the grid minimum sits on the search boundary.
    """
    if not C > 0:
        raise DomainError(f"compute must be positive, got {C}")
    log_c = math.log(C)
    lo, hi = oracleRatioBounds
    grid = np.linspace(math.log(lo), math.log(hi), oracleGridPoints)
    values = elasticity_loss(p, C, np.exp(grid))
    i = int(np.argmin(values))
    if i == 0 or i == len(grid) - 1:
        raise BracketError(f"could not bracket a minimum of the loss within r in [{lo}, {hi}] at C={C}")

    def objective(u):
        return float(elasticity_loss(p, C, math.exp(u)))

    try:
        golden = minimize_scalar(
            objective,
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": oracleRelativeWidth},
        )
        u_star = float(golden.x)
    except ValueError:
        # flat objective at grid resolution, scipy refuses the bracket
        u_star = float(grid[i])

    a, b = grid[i - 1], grid[i + 1]
    g_a, g_b = _log_marginal_gap(p, log_c, a), _log_marginal_gap(p, log_c, b)
    if g_a < 0 < g_b:
        u_star = brentq(lambda u: _log_marginal_gap(p, log_c, u), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        logger.debug(f"[alloc][numeric_optimal_ratio] no sign change on bracket ({g_a}, {g_b}), keeping golden-section point")

    r_hat = math.exp(u_star)
    return OracleResult(r=r_hat, loss=float(elasticity_loss(p, C, r_hat)), residual=marginal_residual(p, C, r_hat))


@dataclass(frozen=True)
class ElasticityComparison:
    closed_form: AllocationLaw
    numeric_alpha: float
    numeric_beta: float

    @property
    def beta_gap(self):
        return self.numeric_beta - self.closed_form.beta_r


def compare_elasticity_law(p: ElasticityParams, compute_grid) -> ElasticityComparison:
    """Log-log regression of the oracle's r(C) reported next to the published closed form."""
    compute_grid = [float(c) for c in compute_grid]
    if len(compute_grid) < 2:
        raise DomainError("compute_grid needs at least two values")
    ratios = [numeric_optimal_ratio(p, c).r for c in compute_grid]
    slope, intercept = np.polyfit(np.log(compute_grid), np.log(ratios), 1)
    closed = elasticity_closed_form(p)
    logger.info(f"[alloc][compare_elasticity_law] closed-form beta_r={closed.beta_r:.6g}, numeric slope={slope:.6g}")
    return ElasticityComparison(closed_form=closed, numeric_alpha=float(math.exp(intercept)), numeric_beta=float(slope))


def _check_ratio(r):
    if not math.isfinite(r):
        raise DomainError(f"ratio must be finite, got {r}")
    if r < 0:
        raise DomainError(f"ratio must be nonnegative, got {r}")


def efficiency_term(r: float, form: str = "ratio") -> float:
    """
    Bounded efficiency penalty. "ratio" is r/(r+1), the form used by the extended scaling law; "log1p" (log(1+r)) and
    "expm1" (1 - e^-r) are the alternatives it was compared against.

    In double precision "ratio" and "expm1" round to exactly 1.0 once r exceeds about 2^53 and 37 respectively.
    """
    if form not in efficiencyFormList:
        raise ConfigError(f"form must be one of: {efficiencyFormList}")
    _check_ratio(r)
    if form == "ratio":
        return r / (r + 1)
    if form == "log1p":
        return math.log1p(r)
    return -math.expm1(-r)


def efficiency_term_derivative(r: float) -> float:
    _check_ratio(r)
    return 1.0 / (r + 1) ** 2
