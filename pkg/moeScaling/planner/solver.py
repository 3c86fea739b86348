"""
Architecture solver.

Given a training budget C (total training FLOPs), a token count D and a sparsity level, the solver recommends
r* = alpha_r(S) C^beta_r(S) and scans integer (d_hidden, d_expert) pairs on the granularity lattice for a model whose
expert/attention FLOPs ratio is within tolerance of r* and whose forward FLOPs per token is within tolerance of
C / (D * factor). Depth, heads, context and vocabulary are held fixed.

Lattice: d_hidden over multiples of g in [max(g, seed/2), 2 seed], d_expert over multiples of g in
[g, 8 max(d_hidden)]. Feasible points are ranked by (budget error, ratio error, d_hidden, d_expert). With no feasible
point the solver reports the point minimising max(ratio_err / tol_r, budget_err / tol_b), marked infeasible.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from moeScaling.param import (
    SCHEMA_VERSION,
    defaultNCtx,
    defaultNVocab,
    defaultActiveExperts,
    defaultSharedExperts,
    defaultGranularity,
    defaultRatioTolerance,
    defaultBudgetTolerance,
    dHiddenSpan,
    dExpertSpan,
)
from moeScaling.errors import ConfigError, DomainError
from moeScaling.schemas import PlanResultSchema
from moeScaling.flops import (
    ModelConfig,
    SparsityLevel,
    FlopsBreakdown,
    attention_flops,
    logits_flops,
    backward_factor,
    total_flops,
    parameter_count,
)
from moeScaling.alloc import AllocationLaw, sparsity_coefficients, optimal_ratio
from moeScaling.scaling import RunRecord, predict_loss
from moeScaling.planner.law_store import default_law_store

logger = logging.getLogger(__name__)


def _positive_int(name, value, minimum=1):
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


@dataclass(frozen=True)
class PlanRequest:
    """
    Args:
    C_budget (float): total training FLOPs.
    D (float): training tokens.
    d_hidden (int): seed width; the scan covers [seed/2, 2 seed].
    n_layer, n_head (int): held fixed.
    S (float): sparsity. Alternatively give n_experts and the sparsity is (n_experts - e_act) / n_experts.
    n_experts (int): total experts. Derived as round(e_act / (1 - S)) when only S is given.
    e_act (int): experts active per token, shared included.
    n_shared_experts (int): always-active experts; top_k = e_act - n_shared_experts.
    granularity (int): dimension step g.
    allocation_law (AllocationLaw): overrides the sparsity law.
    per_token_target (float): overrides C_budget / (D * factor).
    """
    C_budget: float
    D: float
    d_hidden: int
    n_layer: int
    n_head: int
    S: float = None
    n_experts: int = None
    e_act: int = defaultActiveExperts
    n_shared_experts: int = defaultSharedExperts
    n_ctx: int = defaultNCtx
    n_vocab: int = defaultNVocab
    granularity: int = defaultGranularity
    ratio_tolerance: float = defaultRatioTolerance
    budget_tolerance: float = defaultBudgetTolerance
    allocation_law: AllocationLaw = None
    per_token_target: float = None
    use_gqa: bool = False
    kv_head_ratio: int = 1
    use_peft: bool = False

    def __post_init__(self):
        if not (self.C_budget > 0 and math.isfinite(self.C_budget)):
            raise ConfigError(f"C_budget must be positive and finite, got {self.C_budget}")
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ConfigError(f"D must be positive and finite, got {self.D}")
        for name in ["d_hidden", "n_layer", "n_head", "e_act", "n_ctx", "n_vocab", "granularity", "kv_head_ratio"]:
            _positive_int(name, getattr(self, name))
        _positive_int("n_shared_experts", self.n_shared_experts, minimum=0)
        if self.e_act - self.n_shared_experts < 1:
            raise ConfigError("e_act must exceed n_shared_experts by at least one routed expert")
        if not (self.ratio_tolerance > 0 and self.budget_tolerance > 0):
            raise ConfigError("tolerances must be positive")
        if self.per_token_target is not None and not self.per_token_target > 0:
            raise ConfigError("per_token_target must be positive")
        if self.S is None and self.n_experts is None:
            raise ConfigError("a plan needs a sparsity S or an expert count n_experts")
        if self.S is not None and not 0 <= self.S < 1:
            raise DomainError(f"sparsity must satisfy 0 <= S < 1, got {self.S}")
        if self.n_experts is not None:
            _positive_int("n_experts", self.n_experts)
        if self.resolved_experts < self.e_act:
            raise ConfigError(f"n_experts ({self.resolved_experts}) is smaller than e_act ({self.e_act})")

    @property
    def resolved_experts(self):
        if self.n_experts is not None:
            return self.n_experts
        return int(round(self.e_act / (1.0 - self.S)))

    @property
    def sparsity(self):
        """The S the allocation law is evaluated at: the request's own S when given, else the exact level."""
        if self.S is not None:
            return self.S
        return SparsityLevel.from_experts(self.n_experts, self.e_act)

    @property
    def top_k(self):
        return self.e_act - self.n_shared_experts

    def config(self, d_hidden, d_expert):
        return ModelConfig(
            n_layer=self.n_layer,
            n_head=self.n_head,
            d_hidden=d_hidden,
            d_expert=d_expert,
            n_experts=self.resolved_experts,
            top_k=self.top_k,
            n_shared_experts=self.n_shared_experts,
            kv_head_ratio=self.kv_head_ratio,
            n_ctx=self.n_ctx,
            n_vocab=self.n_vocab,
            use_gqa=self.use_gqa,
            use_peft=self.use_peft,
        )


@dataclass(frozen=True)
class PlanResult:
    feasible: bool
    r_target: float
    r_realized: float
    ratio_error: float
    per_token_target: float
    per_token_flops: float
    budget_error: float
    config: ModelConfig
    flops: FlopsBreakdown
    n_params: int
    n_active_params: int
    allocation_law: AllocationLaw
    predicted_loss: float = None

    def to_dict(self):
        output = {
            "schema_version": SCHEMA_VERSION,
            "feasible": self.feasible,
            "r_target": self.r_target,
            "r_realized": self.r_realized,
            "ratio_error": self.ratio_error,
            "per_token_target": self.per_token_target,
            "per_token_flops": self.per_token_flops,
            "budget_error": self.budget_error,
            "config": self.config.to_dict(),
            "flops": self.flops.to_dict(),
            "n_params": self.n_params,
            "n_active_params": self.n_active_params,
        }
        if self.predicted_loss is not None:
            output["predicted_loss"] = self.predicted_loss
        PlanResultSchema.validate(output)
        return output


def plan_lattice(req: PlanRequest):
    """The (d_hidden, d_expert) axes the solver scans."""
    g = req.granularity
    low = max(g, -(-req.d_hidden // (2 * g)) * g)
    high = (dHiddenSpan * req.d_hidden // g) * g
    if high < low:
        logger.warning(f"[planner][plan_lattice] granularity {g} leaves no d_hidden in [{req.d_hidden / 2:g}, {dHiddenSpan * req.d_hidden}], scanning d_hidden={low} only")
        high = low
    d_hidden_values = list(range(low, high + 1, g))
    d_expert_values = list(range(g, dExpertSpan * d_hidden_values[-1] + 1, g))
    return d_hidden_values, d_expert_values


def per_token_target(req: PlanRequest):
    if req.per_token_target is not None:
        return float(req.per_token_target)
    factor = backward_factor(req.config(req.granularity, req.granularity))
    return req.C_budget / (req.D * factor)


def _errors(req, d_hidden, d_expert_values, r_target, target):
    base = req.config(d_hidden, req.granularity)
    attn = attention_flops(base).attn_total
    logits = logits_flops(base)
    m = req.e_act
    expert = req.n_ctx * (2.0 * d_hidden * base.n_experts + 6.0 * d_hidden * d_expert_values * m)
    per_token = (req.n_layer * (attn + expert) + logits) / req.n_ctx
    ratio_err = np.abs(expert / attn - r_target) / r_target
    budget_err = np.abs(per_token - target) / target
    return ratio_err, budget_err


def _exact_errors(cfg, flops, r_target, target):
    ratio = Fraction(flops.expert, flops.attn_total)
    r_realized = float(ratio)
    ratio_error = abs(r_realized - r_target) / r_target
    budget_error = abs(float(flops.per_token) - target) / target
    return r_realized, ratio_error, budget_error


def plan(req: PlanRequest, law_store=None) -> PlanResult:
    """
    Args:
    req (PlanRequest): the request.
    law_store (LawStore): sparsity law and loss-law coefficients; the built-in store when omitted.

    Returns:
    PlanResult: the best lattice point, feasible or not.
    """
    if law_store is None:
        law_store = default_law_store()

    law = req.allocation_law or sparsity_coefficients(req.sparsity, law=law_store.sparsity_law)
    r_target = optimal_ratio(law, req.C_budget)
    target = per_token_target(req)
    tol_r, tol_b = req.ratio_tolerance, req.budget_tolerance

    d_hidden_values, d_expert_values = plan_lattice(req)
    d_expert_axis = np.array(d_expert_values, dtype=np.float64)
    d_expert_ints = np.array(d_expert_values, dtype=np.int64)

    best_feasible = None
    best_overall = None
    for d_hidden in d_hidden_values:
        ratio_err, budget_err = _errors(req, d_hidden, d_expert_axis, r_target, target)

        mask = (ratio_err <= tol_r) & (budget_err <= tol_b)
        if mask.any():
            idx = np.flatnonzero(mask)
            i = idx[np.lexsort((d_expert_ints[idx], ratio_err[idx], budget_err[idx]))[0]]
            key = (float(budget_err[i]), float(ratio_err[i]), d_hidden, int(d_expert_ints[i]))
            if best_feasible is None or key < best_feasible:
                best_feasible = key

        score = np.maximum(ratio_err / tol_r, budget_err / tol_b)
        i = np.lexsort((d_expert_ints, ratio_err, budget_err, score))[0]
        key = (float(score[i]), float(budget_err[i]), float(ratio_err[i]), d_hidden, int(d_expert_ints[i]))
        if best_overall is None or key < best_overall:
            best_overall = key

    if best_feasible is not None:
        d_hidden, d_expert = best_feasible[2], best_feasible[3]
    else:
        d_hidden, d_expert = best_overall[3], best_overall[4]

    cfg = req.config(d_hidden, d_expert)
    flops = total_flops(cfg)
    r_realized, ratio_error, budget_error = _exact_errors(cfg, flops, r_target, target)
    feasible = ratio_error <= tol_r and budget_error <= tol_b
    if not feasible:
        logger.warning(f"[planner][plan] no lattice point meets both tolerances, best is d_hidden={d_hidden} d_expert={d_expert} (ratio error {ratio_error:.3%}, budget error {budget_error:.3%})")
    else:
        logger.info(f"[planner][plan] r*={r_target:.4g}, d_hidden={d_hidden}, d_expert={d_expert}, r={r_realized:.4g}")

    params = parameter_count(cfg)
    predicted = None
    if law_store.loss_law is not None:
        record = RunRecord(
            label="plan",
            N=float(params.total),
            N_active=float(params.active),
            D=float(req.D),
            S=SparsityLevel.from_config(cfg).S,
            r=r_realized,
        )
        predicted = predict_loss(law_store.loss_law, record)

    return PlanResult(
        feasible=feasible,
        r_target=r_target,
        r_realized=r_realized,
        ratio_error=ratio_error,
        per_token_target=target,
        per_token_flops=float(flops.per_token),
        budget_error=budget_error,
        config=cfg,
        flops=flops,
        n_params=params.total,
        n_active_params=params.active,
        allocation_law=law,
        predicted_loss=predicted,
    )
