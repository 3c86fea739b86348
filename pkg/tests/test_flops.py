from fractions import Fraction

import numpy as np
import pytest

from moeScaling.errors import ConfigError, DomainError
from moeScaling.flops import (
    ModelConfig,
    SparsityLevel,
    SWEPT_EXPERT_COUNTS,
    attention_flops,
    expert_flops,
    logits_flops,
    total_flops,
    flops_ratio,
    parameter_count,
    swept_sparsity_levels,
)
from conftest import make_config


def matmul(m, n, k):
    return 2 * m * n * k


def matmul_oracle(cfg):
    """Independent count: every projection is enumerated as an (m x k) @ (k x n) product."""
    n_ctx, d = cfg.n_ctx, cfg.d_hidden
    kv_width = d // cfg.kv_head_ratio if cfg.use_gqa else d
    parts = {
        "q_proj": matmul(n_ctx, d, d),
        "kv_proj": matmul(n_ctx, kv_width, d) + matmul(n_ctx, kv_width, d),
        "attn_weight": matmul(n_ctx, n_ctx, d),
        "value": matmul(n_ctx, d, d),
        "out_proj": matmul(n_ctx, d, d),
    }
    router = matmul(n_ctx, cfg.n_experts, d)
    # gate, up and down projections per active expert
    ffn = sum(3 * matmul(n_ctx, cfg.d_expert, d) for _ in range(cfg.top_k + cfg.n_shared_experts))
    parts["expert"] = router + ffn
    parts["logits"] = matmul(n_ctx, cfg.n_vocab, d)
    return parts


def random_config(rng):
    use_gqa = bool(rng.integers(0, 2))
    kv_head_ratio = int(rng.choice([1, 2, 4])) if use_gqa else 1
    n_experts = int(rng.integers(2, 17))
    top_k = int(rng.integers(1, n_experts))
    n_shared = int(rng.integers(0, n_experts - top_k + 1))
    return ModelConfig(
        n_layer=int(rng.integers(1, 5)),
        n_head=4 * int(rng.integers(1, 5)),
        d_hidden=4 * int(rng.integers(1, 33)),
        d_expert=int(rng.integers(1, 129)),
        n_experts=n_experts,
        top_k=top_k,
        n_shared_experts=n_shared,
        kv_head_ratio=kv_head_ratio,
        n_ctx=int(rng.integers(1, 65)),
        n_vocab=int(rng.integers(1, 1001)),
        use_gqa=use_gqa,
        use_peft=bool(rng.integers(0, 2)),
        use_grad_checkpoint=bool(rng.integers(0, 2)),
    )


def test_attention_tiny_config(tiny_config):
    attn = attention_flops(tiny_config)
    assert (attn.q_proj, attn.kv_proj, attn.attn_weight, attn.value, attn.out_proj) == (64, 128, 32, 64, 64)
    assert attn.attn_total == 352


def test_attention_unit_dimensions():
    attn = attention_flops(make_config(n_ctx=1, d_hidden=1))
    assert (attn.q_proj, attn.kv_proj, attn.attn_weight, attn.value, attn.out_proj) == (2, 4, 2, 2, 2)


def test_gqa_kv_projection():
    cfg = make_config(n_ctx=4096, d_hidden=1024, n_head=8, kv_head_ratio=4, use_gqa=True)
    assert attention_flops(cfg).kv_proj == 4_294_967_296


def test_gqa_kv_scaling():
    dense = attention_flops(make_config(n_ctx=16, d_hidden=64, n_head=8))
    ratio_one = attention_flops(make_config(n_ctx=16, d_hidden=64, n_head=8, kv_head_ratio=1, use_gqa=True))
    ratio_two = attention_flops(make_config(n_ctx=16, d_hidden=64, n_head=8, kv_head_ratio=2, use_gqa=True))
    assert ratio_one.kv_proj == dense.kv_proj == 2 * dense.q_proj
    assert ratio_two.kv_proj == dense.q_proj


def test_expert_flops_examples():
    cfg = make_config(n_ctx=4096, d_hidden=1024, n_experts=65, d_expert=704, top_k=2, n_shared_experts=1)
    assert expert_flops(cfg) == 53_695_479_808
    assert expert_flops(make_config(n_ctx=1, d_hidden=1, n_experts=1, d_expert=1, top_k=1)) == 8


def test_expert_flops_linear_in_d_expert():
    base = make_config(n_ctx=8, d_hidden=16, n_experts=8, d_expert=32, top_k=2, n_shared_experts=1)
    doubled = make_config(n_ctx=8, d_hidden=16, n_experts=8, d_expert=64, top_k=2, n_shared_experts=1)
    router = 8 * 2 * 16 * 8
    assert expert_flops(doubled) - router == 2 * (expert_flops(base) - router)


def test_logits_flops_examples():
    assert logits_flops(make_config(n_ctx=2, d_hidden=4, n_vocab=8)) == 128
    assert logits_flops(make_config(n_ctx=4096, d_hidden=1024, n_vocab=128000)) == 1_073_741_824_000


def test_logits_flops_linear():
    base = logits_flops(make_config(n_ctx=3, d_hidden=8, n_vocab=10))
    assert logits_flops(make_config(n_ctx=6, d_hidden=8, n_vocab=10)) == 2 * base
    assert logits_flops(make_config(n_ctx=3, d_hidden=24, n_vocab=10)) == 3 * base
    assert logits_flops(make_config(n_ctx=3, d_hidden=8, n_vocab=50)) == 5 * base


def test_peft_training_is_twice_forward():
    breakdown = total_flops(make_config(use_peft=True))
    assert breakdown.training_total == 2 * breakdown.forward_total
    assert breakdown.backward_total == breakdown.forward_total


def test_additive_convention():
    cfg = make_config()
    breakdown = total_flops(cfg, training_convention="additive")
    assert breakdown.backward_total == 3 * breakdown.forward_total
    assert breakdown.training_total == 4 * breakdown.forward_total
    with pytest.raises(ConfigError):
        total_flops(cfg, training_convention="other")


def test_forward_total_two_layers():
    breakdown = total_flops(make_config(n_layer=2))
    assert breakdown.forward_total == 2 * breakdown.layer_forward + breakdown.logits


def test_grad_checkpoint_forward():
    cfg = make_config(n_layer=3, use_grad_checkpoint=True)
    breakdown = total_flops(cfg)
    assert breakdown.forward_total == 3 * breakdown.layer_forward * 4 + breakdown.logits * 3
    # per-token compute is the plain forward pass either way
    assert breakdown.per_token == total_flops(make_config(n_layer=3)).per_token


def test_per_token_is_exact_fraction():
    cfg = make_config(n_ctx=3)
    breakdown = total_flops(cfg)
    assert isinstance(breakdown.per_token, Fraction)
    assert breakdown.per_token == Fraction(breakdown.layer_forward + breakdown.logits, 3)


def test_large_config_exceeds_64_bits():
    cfg = ModelConfig(n_layer=4096, n_head=64, d_hidden=65536, d_expert=65536, n_experts=1024, top_k=64,
                      n_shared_experts=4, n_ctx=1 << 20, n_vocab=1 << 20)
    breakdown = total_flops(cfg)
    assert breakdown.training_total > 2 ** 64
    assert breakdown.training_total == 3 * breakdown.forward_total


def test_flops_ratio_examples():
    cfg = make_config(n_ctx=4096, d_hidden=1024, n_head=8, kv_head_ratio=4, use_gqa=True, n_experts=65,
                      d_expert=704, top_k=2, n_shared_experts=1)
    ratio = flops_ratio(cfg)
    assert attention_flops(cfg).attn_total == 64_424_509_440
    assert ratio.r == Fraction(53_695_479_808, 64_424_509_440)
    assert ratio.r_float == pytest.approx(0.8335, abs=1e-4)


def test_flops_ratio_depends_on_context():
    kwargs = dict(d_hidden=256, n_head=4, n_experts=17, d_expert=128, top_k=2, n_shared_experts=1)
    assert flops_ratio(make_config(n_ctx=1024, **kwargs)).r != flops_ratio(make_config(n_ctx=4096, **kwargs)).r


def test_flops_ratio_equal_case():
    # d=1, n_ctx=1: attn_total = 12; router 2*E + 6*d_e*(k+s) = 12 with E=3, d_e=1, k=1
    cfg = make_config(n_ctx=1, d_hidden=1, n_experts=3, d_expert=1, top_k=1)
    assert flops_ratio(cfg).r == 1


@pytest.mark.parametrize("overrides", [
    {"d_hidden": 0},
    {"n_layer": -1},
    {"n_ctx": 0},
    {"top_k": 3, "n_shared_experts": 2, "n_experts": 4},
    {"n_head": 6, "kv_head_ratio": 4, "use_gqa": True},
    {"d_expert": 2.5},
    {"use_peft": 1},
])
def test_invalid_configs(overrides):
    with pytest.raises(ConfigError):
        make_config(**overrides)


def test_matmul_oracle_on_random_configs():
    rng = np.random.default_rng(0)
    for _ in range(200):
        cfg = random_config(rng)
        attn = attention_flops(cfg)
        oracle = matmul_oracle(cfg)
        for name in ["q_proj", "kv_proj", "attn_weight", "value", "out_proj"]:
            assert getattr(attn, name) == oracle[name]
        assert attn.attn_total == sum(getattr(attn, name) for name in ["q_proj", "kv_proj", "attn_weight", "value", "out_proj"])
        assert expert_flops(cfg) == oracle["expert"]
        assert logits_flops(cfg) == oracle["logits"]

        breakdown = total_flops(cfg)
        assert breakdown.layer_forward == breakdown.attn_total + breakdown.expert
        for name in ["q_proj", "kv_proj", "attn_weight", "value", "out_proj", "attn_total", "expert",
                     "layer_forward", "logits", "forward_total", "backward_total", "training_total"]:
            value = getattr(breakdown, name)
            assert isinstance(value, int) and value >= 0


def test_monotone_in_dimensions():
    base = dict(n_layer=2, n_head=4, d_hidden=32, d_expert=16, n_experts=8, top_k=2, n_shared_experts=1, n_ctx=16, n_vocab=64)
    reference = total_flops(ModelConfig(**base))
    for name in ["n_layer", "d_hidden", "d_expert", "n_experts", "top_k", "n_ctx", "n_vocab"]:
        grown = dict(base)
        grown[name] += 1 if name != "d_hidden" else 4
        breakdown = total_flops(ModelConfig(**grown))
        for field in ["attn_total", "expert", "layer_forward", "logits", "forward_total", "training_total"]:
            assert getattr(breakdown, field) >= getattr(reference, field)


def test_breakdown_serialization(tiny_config):
    payload = total_flops(tiny_config).to_dict()
    assert payload["attn_total"] == "352"
    assert payload["schema_version"] == 1
    num, den = payload["per_token_exact"].split("/")
    assert Fraction(int(num), int(den)) == total_flops(tiny_config).per_token
    row = total_flops(tiny_config).to_csv_row().split(",")
    assert len(row) == len(total_flops(tiny_config).csv_header().split(","))


def test_config_round_trip(tiny_config):
    assert ModelConfig.from_dict(tiny_config.to_dict()) == tiny_config


def test_sparsity_levels():
    level = SparsityLevel.from_experts(33, 3)
    assert level.fraction == Fraction(30, 33)
    assert level.S == pytest.approx(0.9091, abs=1e-4)
    assert SparsityLevel.from_config(make_config(n_experts=4, top_k=1)).fraction == Fraction(3, 4)
    assert SWEPT_EXPERT_COUNTS == (17, 33, 65, 129)
    assert [round(level.S, 4) for level in swept_sparsity_levels()] == [0.8235, 0.9091, 0.9538, 0.9767]
    with pytest.raises(ConfigError):
        SparsityLevel.from_experts(2, 3)


def test_parameter_count():
    cfg = make_config(n_layer=2, d_hidden=8, d_expert=4, n_experts=4, top_k=1, n_shared_experts=1, n_vocab=10)
    count = parameter_count(cfg)
    per_layer_shared = 4 * 64 + 8 * 4
    assert count.total == 2 * (per_layer_shared + 3 * 8 * 4 * 4) + 2 * 10 * 8
    assert count.active == 2 * (per_layer_shared + 3 * 8 * 4 * 2) + 2 * 10 * 8
    assert count.active <= count.total
