"""
Power-law regression on log-log axes: y = alpha * x^beta fitted by ordinary least squares on (ln x, ln y).
Used for r* against compute at each sparsity, and for the allocation coefficients against the active fraction 1 - S.
"""
import logging
from dataclasses import dataclass

import numpy as np

from moeScaling.alloc import AllocationLaw, SparsityLaw
from moeScaling.errors import FitError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    beta: float
    r_squared: float
    n_points: int

    def predict(self, x):
        return self.alpha * np.asarray(x, dtype=np.float64) ** self.beta


def fit_power_law(xs, ys) -> PowerLawFit:
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.shape != ys.shape:
        raise FitError(f"xs and ys differ in length ({xs.size} vs {ys.size})")
    if xs.size < 2:
        raise FitError("power-law fit needs at least 2 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("power-law fit needs strictly positive xs and ys")

    log_x, log_y = np.log(xs), np.log(ys)
    if np.ptp(log_x) == 0:
        raise FitError("power-law fit needs at least 2 distinct x values")

    A = np.column_stack([np.ones_like(log_x), log_x])
    (intercept, slope), *_ = np.linalg.lstsq(A, log_y, rcond=None)

    residuals = log_y - (intercept + slope * log_x)
    ss_res = float(residuals @ residuals)
    centered = log_y - log_y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot

    return PowerLawFit(alpha=float(np.exp(intercept)), beta=float(slope), r_squared=r_squared, n_points=int(xs.size))


@dataclass(frozen=True)
class SparsityLawFit:
    law: SparsityLaw
    alpha_fit: PowerLawFit
    beta_fit: PowerLawFit


def _sparsity_triples(observations):
    triples = []
    for obs in observations:
        if isinstance(obs, AllocationLaw):
            if obs.sparsity is None:
                raise FitError("allocation laws passed to fit_sparsity_laws need a sparsity")
            triples.append((float(obs.sparsity), obs.alpha_r, obs.beta_r))
        else:
            S, alpha_r, beta_r = obs
            triples.append((float(S), float(alpha_r), float(beta_r)))
    return triples


def fit_sparsity_laws(observations) -> SparsityLawFit:
    """
    Fit alpha_r and beta_r as power laws of the active fraction (1 - S).

    Args:
    observations: (S, alpha_r, beta_r) triples or AllocationLaw objects carrying a sparsity.
    """
    triples = _sparsity_triples(observations)
    if len({S for S, _, _ in triples}) < 2:
        raise FitError("sparsity-law fit needs at least 2 distinct sparsity levels")
    if any(not 0 <= S < 1 for S, _, _ in triples):
        raise DomainError("sparsity must satisfy 0 <= S < 1")

    active = [1.0 - S for S, _, _ in triples]
    alpha_fit = fit_power_law(active, [a for _, a, _ in triples])
    beta_fit = fit_power_law(active, [b for _, _, b in triples])
    law = SparsityLaw(
        alpha_coef=alpha_fit.alpha,
        alpha_exp=alpha_fit.beta,
        beta_coef=beta_fit.alpha,
        beta_exp=beta_fit.beta,
        provenance="user",
    )
    logger.info(f"[fit][fit_sparsity_laws] alpha_r = {law.alpha_coef:.4g}(1-S)^{law.alpha_exp:.4g}, beta_r = {law.beta_coef:.4g}(1-S)^{law.beta_exp:.4g}")
    return SparsityLawFit(law=law, alpha_fit=alpha_fit, beta_fit=beta_fit)


def fit_allocation_laws(observations):
    """
    Fit r* = alpha_r C^beta_r separately for each sparsity level.

    Returns:
    dict: S -> (AllocationLaw, PowerLawFit), levels with fewer than 2 distinct budgets are skipped.
    """
    by_sparsity = {}
    for obs in observations:
        by_sparsity.setdefault(obs.S, []).append(obs)

    output = {}
    for S in sorted(by_sparsity):
        rows = by_sparsity[S]
        if len({o.C for o in rows}) < 2:
            logger.warning(f"[fit][fit_allocation_laws] S={S} has a single compute budget, skipped")
            continue
        fit = fit_power_law([o.C for o in rows], [o.r_star for o in rows])
        output[S] = (AllocationLaw(alpha_r=fit.alpha, beta_r=fit.beta, provenance="user", sparsity=S), fit)
    if not output:
        raise FitError("no sparsity level has at least 2 distinct compute budgets")
    return output
