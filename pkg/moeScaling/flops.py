"""
This module implements the MoE FLOPs accounting: attention, sparse expert MLP, output logits, decoder layer, forward,
backward and gradient checkpointing, exactly as the published formulas state them (no extra terms, no corrected conventions).

All counts are Python integers, so accumulation never overflows. Per-token compute is an exact Fraction and is only
turned into a float at the API boundary.
"""
import logging
from dataclasses import dataclass, fields, asdict
from fractions import Fraction

from moeScaling.param import (
    defaultNCtx,
    defaultNVocab,
    peftBackwardFactor,
    fullBackwardFactor,
    trainingConventionList,
    defaultTrainingConvention,
    SCHEMA_VERSION,
    sweptExpertCounts,
    defaultActiveExperts,
)
from moeScaling.errors import ConfigError, DomainError
from moeScaling.schemas import ModelConfigSchema

logger = logging.getLogger(__name__)

_countFields = ["n_layer", "n_head", "d_hidden", "d_expert", "n_experts", "top_k", "kv_head_ratio", "n_ctx", "n_vocab"]
_flagFields = ["use_gqa", "use_peft", "use_grad_checkpoint"]

SWEPT_EXPERT_COUNTS = tuple(sweptExpertCounts)


@dataclass(frozen=True)
class ModelConfig:
    """
    Full architectural description of one MoE Transformer.

    Args:
    n_layer (int): decoder layers.
    n_head (int): attention heads.
    d_hidden (int): hidden width.
    d_expert (int): expert FFN intermediate width.
    n_experts (int): total experts per MoE layer (E).
    top_k (int): routed experts activated per token.
    n_shared_experts (int): always-active experts per token, may be 0.
    kv_head_ratio (int): attention heads per KV head, 1 disables GQA.
    n_ctx (int): context length in tokens.
    n_vocab (int): vocabulary size.
    use_gqa, use_peft, use_grad_checkpoint (bool): accounting switches.
    """
    n_layer: int
    n_head: int
    d_hidden: int
    d_expert: int
    n_experts: int
    top_k: int
    n_shared_experts: int
    kv_head_ratio: int = 1
    n_ctx: int = defaultNCtx
    n_vocab: int = defaultNVocab
    use_gqa: bool = False
    use_peft: bool = False
    use_grad_checkpoint: bool = False

    def __post_init__(self):
        for name in _countFields:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if not isinstance(self.n_shared_experts, int) or isinstance(self.n_shared_experts, bool) or self.n_shared_experts < 0:
            raise ConfigError(f"n_shared_experts must be a nonnegative integer, got {self.n_shared_experts!r}")
        for name in _flagFields:
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be a boolean")
        if self.top_k + self.n_shared_experts > self.n_experts:
            raise ConfigError(
                f"top_k + n_shared_experts ({self.top_k + self.n_shared_experts}) exceeds n_experts ({self.n_experts})"
            )
        if self.use_gqa and self.n_head % self.kv_head_ratio != 0:
            raise ConfigError(f"n_head ({self.n_head}) must be divisible by kv_head_ratio ({self.kv_head_ratio}) with GQA")

    @property
    def active_experts(self):
        return self.top_k + self.n_shared_experts

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        ModelConfigSchema.validate(payload)
        payload = {k: v for k, v in payload.items() if k != "schema_version" and v is not None}
        return cls(**payload)


@dataclass(frozen=True)
class SparsityLevel:
    """
    Exact sparsity S = (E - e_act) / E.
    """
    n_experts: int
    e_act: int

    def __post_init__(self):
        if self.n_experts <= 0 or self.e_act <= 0:
            raise ConfigError("n_experts and e_act must be positive")
        if self.e_act > self.n_experts:
            raise ConfigError(f"e_act ({self.e_act}) exceeds n_experts ({self.n_experts})")

    @property
    def fraction(self):
        return Fraction(self.n_experts - self.e_act, self.n_experts)

    @property
    def active_fraction(self):
        return Fraction(self.e_act, self.n_experts)

    @property
    def S(self):
        return float(self.fraction)

    @classmethod
    def from_experts(cls, n_experts, e_act):
        return cls(n_experts=n_experts, e_act=e_act)

    @classmethod
    def from_config(cls, cfg):
        return cls(n_experts=cfg.n_experts, e_act=cfg.active_experts)


@dataclass(frozen=True)
class AttentionFlops:
    q_proj: int
    kv_proj: int
    attn_weight: int
    value: int
    out_proj: int

    @property
    def attn_total(self):
        return self.q_proj + self.kv_proj + self.attn_weight + self.value + self.out_proj


@dataclass(frozen=True)
class FlopsBreakdown:
    """
    Itemized FLOPs of one forward/backward pass over a single n_ctx sequence.
    """
    q_proj: int
    kv_proj: int
    attn_weight: int
    value: int
    out_proj: int
    attn_total: int
    expert: int
    layer_forward: int
    logits: int
    forward_total: int
    backward_total: int
    training_total: int
    per_token: Fraction

    @property
    def per_token_float(self):
        return float(self.per_token)

    def to_dict(self):
        # integers as decimal strings so 64-bit consumers do not truncate
        output = {"schema_version": SCHEMA_VERSION}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "per_token":
                output["per_token"] = float(value)
                output["per_token_exact"] = f"{value.numerator}/{value.denominator}"
            else:
                output[f.name] = str(value)
        return output

    @classmethod
    def csv_header(cls):
        return ",".join(f.name for f in fields(cls))

    def to_csv_row(self):
        values = []
        for f in fields(self):
            value = getattr(self, f.name)
            values.append(repr(float(value)) if f.name == "per_token" else str(value))
        return ",".join(values)


@dataclass(frozen=True)
class FlopsRatio:
    """r = C_E / C_A over one layer, plus model-level forward compute per token."""
    r: Fraction
    c_token: Fraction

    @property
    def r_float(self):
        return float(self.r)

    @property
    def c_token_float(self):
        return float(self.c_token)


def attention_flops(cfg: ModelConfig) -> AttentionFlops:
    n_ctx, d = cfg.n_ctx, cfg.d_hidden
    q_proj = 2 * n_ctx * d * d
    if cfg.use_gqa:
        kv_proj = 4 * n_ctx * d * d // cfg.kv_head_ratio
        if (4 * n_ctx * d * d) % cfg.kv_head_ratio:
            logger.warning(f"[flops][attention_flops] kv projection not an integer for kv_head_ratio={cfg.kv_head_ratio}, truncated")
    else:
        kv_proj = 2 * q_proj
    attn_weight = 2 * n_ctx * n_ctx * d
    value = 2 * n_ctx * d * d
    out_proj = 2 * n_ctx * d * d
    return AttentionFlops(q_proj=q_proj, kv_proj=kv_proj, attn_weight=attn_weight, value=value, out_proj=out_proj)


def expert_flops(cfg: ModelConfig) -> int:
    """Router term 2*d_hidden*E plus the gated FFN term over top-k and shared experts."""
    router = 2 * cfg.d_hidden * cfg.n_experts
    ffn = 3 * 2 * cfg.d_hidden * cfg.d_expert * (cfg.top_k + cfg.n_shared_experts)
    return cfg.n_ctx * (router + ffn)


def logits_flops(cfg: ModelConfig) -> int:
    return 2 * cfg.n_ctx * cfg.d_hidden * cfg.n_vocab


def backward_factor(cfg: ModelConfig) -> int:
    return peftBackwardFactor if cfg.use_peft else fullBackwardFactor


def total_flops(cfg: ModelConfig, training_convention: str = defaultTrainingConvention) -> FlopsBreakdown:
    """
    Populate the full breakdown.

    training_convention:
        "combined": factor is the whole training multiplier, training_total = forward_total * factor.
        "additive": backward_total = forward_total * factor, training_total = forward_total + backward_total.
    """
    if training_convention not in trainingConventionList:
        raise ConfigError(f"training_convention must be one of: {trainingConventionList}")

    attn = attention_flops(cfg)
    expert = expert_flops(cfg)
    logits = logits_flops(cfg)
    layer_forward = attn.attn_total + expert
    factor = backward_factor(cfg)

    plain_forward = cfg.n_layer * layer_forward + logits
    if cfg.use_grad_checkpoint:
        forward_total = cfg.n_layer * layer_forward * (factor + 1) + logits * factor
    else:
        forward_total = plain_forward

    if training_convention == "combined":
        training_total = forward_total * factor
        backward_total = training_total - forward_total
    else:
        backward_total = forward_total * factor
        training_total = forward_total + backward_total

    return FlopsBreakdown(
        q_proj=attn.q_proj,
        kv_proj=attn.kv_proj,
        attn_weight=attn.attn_weight,
        value=attn.value,
        out_proj=attn.out_proj,
        attn_total=attn.attn_total,
        expert=expert,
        layer_forward=layer_forward,
        logits=logits,
        forward_total=forward_total,
        backward_total=backward_total,
        training_total=training_total,
        per_token=Fraction(plain_forward, cfg.n_ctx),
    )


def flops_ratio(cfg: ModelConfig) -> FlopsRatio:
    attn_total = attention_flops(cfg).attn_total
    if attn_total <= 0:
        raise DomainError("attention compute is zero, the FLOPs ratio is undefined")
    return FlopsRatio(r=Fraction(expert_flops(cfg), attn_total), c_token=total_flops(cfg).per_token)


@dataclass(frozen=True)
class ParameterCount:
    total: int
    active: int


def parameter_count(cfg: ModelConfig) -> ParameterCount:
    """
    Weight counts with an untied embedding and output head. The router belongs to the expert block; the active count
    keeps only top-k + shared experts.
    """
    d = cfg.d_hidden
    kv = 2 * d * d // cfg.kv_head_ratio if cfg.use_gqa else 2 * d * d
    attention = 2 * d * d + kv
    router = d * cfg.n_experts
    per_expert = 3 * d * cfg.d_expert
    embeddings = 2 * cfg.n_vocab * d
    total = cfg.n_layer * (attention + router + per_expert * cfg.n_experts) + embeddings
    active = cfg.n_layer * (attention + router + per_expert * cfg.active_experts) + embeddings
    return ParameterCount(total=total, active=active)


def swept_sparsity_levels(e_act=defaultActiveExperts):
    """Exact sparsity levels of the swept expert counts."""
    return [SparsityLevel.from_experts(E, e_act) for E in SWEPT_EXPERT_COUNTS]
