"""
Loss-law fitting: Huber loss on log(predicted) - log(observed), minimised with L-BFGS-B from a grid of starts.

Weights (a, b, c, d, tau) are optimised through their logarithms, exponents directly with a lower bound of 0. The
start grid takes log-weights in {0, 10, 20}, exponents in {0, 0.25, ..., 1.25} and log(tau) = 1.5; by default a seeded
uniform subsample of it is used.
"""
import logging
import math
import multiprocessing
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from moeScaling.param import (
    initLogWeightGrid,
    initExponentGrid,
    initLogTau,
    defaultHuberDelta,
    defaultStartCount,
    defaultSeed,
    defaultActiveExperts,
    optimizerMaxIter,
    optimizerGradTol,
    minLossLawRecords,
    lossLawVariantList,
)
from moeScaling.errors import ConfigError, FitError
from moeScaling.scaling import (
    LossLawCoefficients,
    AltLawCoefficients,
    record_features,
    observed_losses,
    predict_many,
)
from moeScaling.scaling.laws import get_law
from moeScaling.fit.report import FitReport, rmse

logger = logging.getLogger(__name__)

# log-parameter bounds keep exp() finite during line searches
logParamBounds = (-100.0, 100.0)
exponentBounds = (0.0, None)


def huber(residuals, delta):
    abs_r = np.abs(residuals)
    return np.where(abs_r <= delta, 0.5 * residuals ** 2, delta * (abs_r - 0.5 * delta))


def huber_derivative(residuals, delta):
    return np.clip(residuals, -delta, delta)


def grid_shape(variant):
    law = get_law(variant)
    shape = []
    for name in law.NAMES:
        if name == "tau":
            shape.append(1)
        elif name in law.LOG_PARAMS:
            shape.append(len(initLogWeightGrid))
        else:
            shape.append(len(initExponentGrid))
    return tuple(shape)


def grid_starts(variant, starts=defaultStartCount, full_grid=False, seed=defaultSeed):
    """
    Natural-space start points, one row per start, columns in the law's NAMES order.
    Without full_grid, `starts` grid points are drawn uniformly without replacement under `seed`.
    """
    law = get_law(variant)
    shape = grid_shape(variant)
    total = int(np.prod(shape))
    if full_grid or starts >= total:
        indices = np.arange(total)
    else:
        if starts < 1:
            raise ConfigError("starts must be at least 1")
        rng = np.random.default_rng(seed)
        indices = np.sort(rng.choice(total, size=starts, replace=False))

    coords = np.unravel_index(indices, shape)
    output = np.empty((indices.size, len(law.NAMES)), dtype=np.float64)
    for j, name in enumerate(law.NAMES):
        if name == "tau":
            output[:, j] = math.exp(initLogTau)
        elif name in law.LOG_PARAMS:
            output[:, j] = np.exp(np.asarray(initLogWeightGrid)[coords[j]])
        else:
            output[:, j] = np.asarray(initExponentGrid)[coords[j]]
    return output


@dataclass(frozen=True)
class _Problem:
    variant: str
    X: dict
    log_observed: np.ndarray
    delta: float
    r_term_mode: str
    fixed: dict
    free_index: tuple
    log_mask: tuple


def _build_problem(variant, X, observed, delta, r_term_mode, fixed):
    law = get_law(variant)
    unknown = [name for name in fixed if name not in law.NAMES]
    if unknown:
        raise ConfigError(f"cannot fix {unknown}, {variant} law parameters are {list(law.NAMES)}")
    free_index = tuple(j for j, name in enumerate(law.NAMES) if name not in fixed)
    if not free_index:
        raise ConfigError("every parameter is fixed, nothing to fit")
    log_mask = tuple(law.NAMES[j] in law.LOG_PARAMS for j in free_index)
    return _Problem(
        variant=variant,
        X=X,
        log_observed=np.log(observed),
        delta=delta,
        r_term_mode=r_term_mode,
        fixed={law.NAMES.index(name): float(value) for name, value in fixed.items()},
        free_index=free_index,
        log_mask=log_mask,
    )


def _to_natural(problem, x):
    theta = np.empty(len(get_law(problem.variant).NAMES), dtype=np.float64)
    for j, value in problem.fixed.items():
        theta[j] = value
    for k, j in enumerate(problem.free_index):
        theta[j] = math.exp(x[k]) if problem.log_mask[k] else x[k]
    return theta


def _to_free(problem, theta):
    x = np.empty(len(problem.free_index), dtype=np.float64)
    for k, j in enumerate(problem.free_index):
        x[k] = math.log(max(theta[j], 1e-300)) if problem.log_mask[k] else theta[j]
    return x


def _objective_and_grad(x, problem):
    law = get_law(problem.variant)
    theta = _to_natural(problem, x)
    pred, jac = law.evaluate(theta, problem.X, r_term_mode=problem.r_term_mode, jacobian=True)
    pred = np.maximum(pred, 1e-300)
    residuals = np.log(pred) - problem.log_observed
    value = float(np.sum(huber(residuals, problem.delta)))
    grad_natural = jac.T @ (huber_derivative(residuals, problem.delta) / pred)
    grad = np.empty(len(problem.free_index), dtype=np.float64)
    for k, j in enumerate(problem.free_index):
        # chain rule through w = exp(log w)
        grad[k] = grad_natural[j] * theta[j] if problem.log_mask[k] else grad_natural[j]
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return np.inf, np.zeros_like(grad)
    return value, grad


def loss_law_objective(theta, records, variant="final", huber_delta=defaultHuberDelta, r_term_mode="r",
                       param_count="total", n_active_experts=defaultActiveExperts):
    """Huber objective at natural-space parameters theta (NAMES order)."""
    law = get_law(variant)
    X = record_features(records, param_count=param_count, n_active_experts=n_active_experts)
    pred = np.maximum(law.evaluate(np.asarray(theta, dtype=np.float64), X, r_term_mode=r_term_mode), 1e-300)
    residuals = np.log(pred) - np.log(observed_losses(records))
    return float(np.sum(huber(residuals, huber_delta)))


def _optimize_single_start(item, problem, max_iter, grad_tol):
    """Module-level so it can be pickled for multiprocessing. Returns (index, objective, x, converged) or None."""
    index, start = item
    x0 = _to_free(problem, start)
    bounds = [logParamBounds if is_log else exponentBounds for is_log in problem.log_mask]
    try:
        result = minimize(
            _objective_and_grad,
            x0,
            args=(problem,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "gtol": grad_tol, "ftol": 1e-15},
        )
    except (FloatingPointError, ValueError, OverflowError) as e:
        logger.debug(f"[fit][_optimize_single_start] start {index} failed: {e}")
        return None
    if not np.isfinite(result.fun):
        return None
    # status 1: iteration or evaluation limit reached
    return index, float(result.fun), np.asarray(result.x, dtype=np.float64), result.status != 1


def _check_variation(variant, records):
    law = get_law(variant)
    minimum = minLossLawRecords if variant == "final" else 2
    if len(records) < minimum:
        raise FitError(f"{variant} law fit needs at least {minimum} records, got {len(records)}")
    for axis in law.REQUIRED_AXES:
        if len({getattr(rec, axis) for rec in records}) < 2:
            raise FitError(f"degenerate data: no variation along {axis}")


def _split_holdout(records, holdout_sparsity):
    if holdout_sparsity is None:
        return records, []
    fitted, heldout = [], []
    for rec in records:
        target = heldout if math.isclose(rec.S, holdout_sparsity, rel_tol=1e-9, abs_tol=1e-12) else fitted
        target.append(rec)
    if not heldout:
        raise FitError(f"no records at holdout sparsity {holdout_sparsity}")
    return fitted, heldout


def _make_coefficients(variant, theta, r_term_mode, param_count):
    if variant == "final":
        return LossLawCoefficients.from_vector(theta, r_term_mode=r_term_mode, param_count=param_count, provenance="user")
    return AltLawCoefficients.from_vector(variant, theta, param_count=param_count, provenance="user")


def fit_loss_law(
    records,
    variant: str = "final",
    starts: int = defaultStartCount,
    full_grid: bool = False,
    seed: int = defaultSeed,
    holdout_sparsity: float = None,
    huber_delta: float = defaultHuberDelta,
    r_term_mode: str = "r",
    param_count: str = "total",
    n_active_experts: int = defaultActiveExperts,
    fixed: dict = None,
    workers: int = 1,
    max_iter: int = optimizerMaxIter,
    grad_tol: float = optimizerGradTol,
    progress: bool = False,
) -> FitReport:
    """
    Fit a loss law to observed runs.

    Args:
    records (list of RunRecord): observations, each with a loss.
    variant (str): "final", "wang" or "abnar".
    starts (int): grid points sampled when full_grid is False.
    full_grid (bool): run every grid point.
    seed (int): sampling seed; identical inputs and seed give identical reports for any worker count.
    holdout_sparsity (float): exclude records at this sparsity from fitting and report their RMSE separately.
    huber_delta (float): Huber threshold on log residuals.
    fixed (dict): natural-space parameter values held fixed, e.g. {"a": 0.0}.
    workers (int): processes for the multi-start loop.

    Returns:
    FitReport

    Raises:
    FitError: too few or degenerate records, or no start converged.
    """
    if variant not in lossLawVariantList:
        raise ConfigError(f"variant must be one of: {lossLawVariantList}")
    if not huber_delta > 0:
        raise ConfigError("huber_delta must be positive")
    fixed = dict(fixed or {})

    fitted, heldout = _split_holdout(list(records), holdout_sparsity)
    _check_variation(variant, fitted)
    observed = observed_losses(fitted)
    X = record_features(fitted, param_count=param_count, n_active_experts=n_active_experts)
    problem = _build_problem(variant, X, observed, huber_delta, r_term_mode, fixed)

    start_points = grid_starts(variant, starts=starts, full_grid=full_grid, seed=seed)
    logger.info(f"[fit][fit_loss_law] {variant} law, {len(fitted)} records, {len(start_points)} starts")

    optimize_fn = partial(_optimize_single_start, problem=problem, max_iter=max_iter, grad_tol=grad_tol)
    items = list(enumerate(start_points))
    results = []
    if workers > 1:
        methods = multiprocessing.get_all_start_methods()
        ctx = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
        with ctx.Pool(workers) as pool:
            for res in tqdm(pool.imap_unordered(optimize_fn, items), total=len(items), disable=not progress):
                if res is not None:
                    results.append(res)
    else:
        for item in tqdm(items, disable=not progress):
            res = optimize_fn(item)
            if res is not None:
                results.append(res)

    if not results:
        raise FitError("all optimization starts diverged")

    converged_results = [res for res in results if res[3]]
    converged = len(converged_results)
    if not converged_results:
        raise FitError(f"none of {len(start_points)} optimization starts converged within {max_iter} iterations")

    # lowest objective among converged starts wins, lowest start index breaks ties
    index, _, best_x, _ = min(converged_results, key=lambda res: (res[1], res[0]))
    if converged < len(start_points):
        logger.warning(f"[fit][fit_loss_law] {len(start_points) - converged} of {len(start_points)} starts did not converge")
    logger.info(f"[fit][fit_loss_law] best start {index}")

    theta = _to_natural(problem, best_x)
    coefficients = _make_coefficients(variant, theta, r_term_mode, param_count)
    objective = loss_law_objective(theta, fitted, variant=variant, huber_delta=huber_delta, r_term_mode=r_term_mode,
                                   param_count=param_count, n_active_experts=n_active_experts)
    predicted = predict_many(coefficients, fitted, n_active_experts=n_active_experts)
    residuals = np.log(predicted) - np.log(observed)

    heldout_rmse = None
    if heldout:
        heldout_rmse = rmse(predict_many(coefficients, heldout, n_active_experts=n_active_experts), observed_losses(heldout))

    return FitReport(
        variant=variant,
        coefficients=coefficients,
        objective=objective,
        huber_delta=float(huber_delta),
        seed=int(seed),
        starts_attempted=len(start_points),
        starts_converged=converged,
        n_records=len(fitted),
        residuals=tuple(float(x) for x in residuals),
        in_sample_rmse=rmse(predicted, observed),
        holdout_sparsity=None if holdout_sparsity is None else float(holdout_sparsity),
        heldout_rmse=heldout_rmse,
        n_heldout=len(heldout) if heldout else None,
    )
