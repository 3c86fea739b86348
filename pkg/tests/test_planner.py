import dataclasses
import math
import os
from fractions import Fraction

import numpy as np
import pytest

from moeScaling.errors import ConfigError, DomainError, SchemaError
from moeScaling.flops import SparsityLevel, backward_factor, total_flops, parameter_count
from moeScaling.alloc import AllocationLaw, SparsityLaw, sparsity_coefficients, optimal_ratio
from moeScaling.scaling import LossLawCoefficients, AltLawCoefficients, predict_many, write_records_csv
from moeScaling.planner import (
    PlanRequest,
    plan,
    plan_lattice,
    per_token_target,
    preset,
    SynthGrid,
    synth,
    LawStore,
    default_law_store,
    load_law_store,
    load_or_default,
    save_law_store,
)
from moeScaling.planner.io import atomic_write_text, read_json, write_json


def reachable_request(C_budget, d_hidden, d_expert, **kwargs):
    """A request whose per-token target is met exactly by (d_hidden, d_expert)."""
    base = PlanRequest(C_budget=C_budget, D=1.0, d_hidden=d_hidden, **kwargs)
    cfg = base.config(d_hidden, d_expert)
    D = C_budget / (backward_factor(cfg) * float(total_flops(cfg).per_token))
    return dataclasses.replace(base, D=D)


def rescan(req, r_target):
    """Exhaustive exact evaluation of the lattice; returns the best feasible key or None."""
    target = per_token_target(req)
    best = None
    d_hidden_values, d_expert_values = plan_lattice(req)
    for d_hidden in d_hidden_values:
        for d_expert in d_expert_values:
            flops = total_flops(req.config(d_hidden, d_expert))
            ratio_err = abs(float(Fraction(flops.expert, flops.attn_total)) - r_target) / r_target
            budget_err = abs(float(flops.per_token) - target) / target
            if ratio_err <= req.ratio_tolerance and budget_err <= req.budget_tolerance:
                key = (budget_err, ratio_err, d_hidden, d_expert)
                best = key if best is None or key < best else best
    return best


# =-=-=-=-=-=-=-=-=-=-=- Presets =-=-=-=-=-=-=-=-=-=-=-=

def test_presets():
    small = preset("30M")
    assert (small.n_layer, small.n_head, small.batch_size, small.learning_rate) == (8, 8, 160, 0.0013)
    large = preset("200M")
    assert (large.n_layer, large.n_head, large.batch_size, large.learning_rate) == (16, 16, 512, 0.0008)
    assert preset("30M") == small
    with pytest.raises(dataclasses.FrozenInstanceError):
        small.n_layer = 4


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("1B")


# =-=-=-=-=-=-=-=-=-=-=- Requests =-=-=-=-=-=-=-=-=-=-=-=

def test_request_validation():
    base = dict(C_budget=1e21, D=1e11, d_hidden=1024, n_layer=8, n_head=8)
    assert PlanRequest(S=0.9091, **base).resolved_experts == 33
    by_count = PlanRequest(n_experts=33, **base)
    assert by_count.sparsity == SparsityLevel.from_experts(33, 3)
    assert by_count.top_k == 2
    with pytest.raises(ConfigError):
        PlanRequest(**base)
    with pytest.raises(DomainError):
        PlanRequest(S=1.0, **base)
    with pytest.raises(ConfigError):
        PlanRequest(S=0.9, **dict(base, C_budget=0.0))
    with pytest.raises(ConfigError):
        PlanRequest(S=0.9, **dict(base, d_hidden=1024.0))
    with pytest.raises(ConfigError):
        PlanRequest(n_experts=2, **base)
    with pytest.raises(ConfigError):
        PlanRequest(S=0.9, e_act=1, **base)


def test_lattice_bounds():
    req = PlanRequest(C_budget=1e21, D=1e11, d_hidden=1000, n_layer=8, n_head=8, S=0.9)
    d_hidden_values, d_expert_values = plan_lattice(req)
    assert d_hidden_values[0] == 512 and d_hidden_values[-1] == 1984
    assert all(v % 64 == 0 for v in d_hidden_values)
    assert d_expert_values[0] == 64 and d_expert_values[-1] == 8 * 1984


def test_per_token_target():
    req = PlanRequest(C_budget=3e20, D=1e10, d_hidden=1024, n_layer=8, n_head=8, S=0.9)
    assert per_token_target(req) == pytest.approx(1e10)
    assert per_token_target(dataclasses.replace(req, use_peft=True)) == pytest.approx(1.5e10)
    assert per_token_target(dataclasses.replace(req, per_token_target=42.0)) == 42.0


# =-=-=-=-=-=-=-=-=-=-=- Solver =-=-=-=-=-=-=-=-=-=-=-=

def test_flat_law_hits_unit_ratio():
    flat = AllocationLaw(alpha_r=1.0, beta_r=0.0)
    req = reachable_request(1e20, 1024, 1024, n_layer=8, n_head=8, S=0.9091, allocation_law=flat)
    result = plan(req)
    assert result.r_target == 1.0
    assert result.feasible
    assert abs(result.r_realized - 1.0) <= 0.05


def test_published_budget_plan():
    req = reachable_request(1e21, 2048, 2304, n_layer=16, n_head=16, S=0.9091)
    result = plan(req)
    assert result.r_target == pytest.approx(1.43, abs=0.01)
    assert result.feasible
    assert result.ratio_error <= 0.05 and result.budget_error <= 0.02
    assert result.config.n_experts == 33
    assert rescan(req, result.r_target) == (result.budget_error, result.ratio_error, result.config.d_hidden,
                                            result.config.d_expert)


def test_random_requests_match_exhaustive_scan():
    rng = np.random.default_rng(17)
    for _ in range(20):
        d_hidden = int(rng.choice([256, 384, 512, 768]))
        req = reachable_request(
            float(10 ** rng.uniform(18, 22)),
            d_hidden,
            int(rng.integers(1, 33)) * 64,
            n_layer=int(rng.integers(2, 9)),
            n_head=int(rng.choice([4, 8])),
            S=float(rng.choice([0.8235, 0.9091, 0.9538, 0.9767])),
            n_ctx=512,
            n_vocab=32000,
        )
        result = plan(req)
        best = rescan(req, result.r_target)
        if result.feasible:
            assert result.ratio_error <= req.ratio_tolerance
            assert result.budget_error <= req.budget_tolerance
            assert best == (result.budget_error, result.ratio_error, result.config.d_hidden, result.config.d_expert)
        else:
            assert best is None


def test_coarse_granularity_is_infeasible():
    req = reachable_request(1e20, 512, 512, n_layer=4, n_head=8, S=0.9091, granularity=4096, n_ctx=512,
                            n_vocab=32000)
    assert plan_lattice(req)[0] == [4096]
    result = plan(req)
    assert not result.feasible
    assert result.to_dict()["feasible"] is False


def test_plan_is_reproducible_and_exact():
    req = reachable_request(1e21, 2048, 2304, n_layer=16, n_head=16, S=0.9091)
    first, second = plan(req), plan(req)
    assert first.to_dict() == second.to_dict()

    flops = total_flops(first.config)
    assert first.per_token_flops == float(flops.per_token)
    assert first.r_realized == float(Fraction(flops.expert, flops.attn_total))
    params = parameter_count(first.config)
    assert (first.n_params, first.n_active_params) == (params.total, params.active)


def test_plan_predicts_loss_only_with_a_loss_law():
    req = reachable_request(1e21, 2048, 2304, n_layer=16, n_head=16, S=0.9091)
    with_law = plan(req)
    assert with_law.predicted_loss is not None and with_law.predicted_loss > 0
    assert "predicted_loss" in with_law.to_dict()
    without = plan(req, law_store=LawStore())
    assert without.predicted_loss is None
    assert "predicted_loss" not in without.to_dict()


def test_plan_uses_the_store_sparsity_law():
    req = reachable_request(1e21, 2048, 2304, n_layer=16, n_head=16, S=0.9091)
    shifted = SparsityLaw(alpha_coef=1.34e-4, provenance="user")
    result = plan(req, law_store=LawStore(sparsity_law=shifted))
    expected = optimal_ratio(sparsity_coefficients(0.9091, law=shifted), 1e21)
    assert result.r_target == pytest.approx(expected)
    assert result.r_target == pytest.approx(2 * plan(req).r_target)


# =-=-=-=-=-=-=-=-=-=-=- Synthetic data =-=-=-=-=-=-=-=-=-=-=-=

def test_synth_without_noise_is_exact(published_coefficients):
    records = synth(published_coefficients)
    assert len(records) == len(SynthGrid()) == 256
    assert [rec.loss for rec in records] == list(predict_many(published_coefficients, records))
    first = records[0]
    assert first.N_active == pytest.approx(first.N * (1 - first.S))
    assert first.C == pytest.approx(6 * first.N_active * first.D)


def test_synth_is_deterministic(published_coefficients):
    text = write_records_csv(synth(published_coefficients, sigma=0.01, seed=7))
    assert write_records_csv(synth(published_coefficients, sigma=0.01, seed=7)) == text
    assert write_records_csv(synth(published_coefficients, sigma=0.01, seed=8)) != text


def test_synth_noise_level(published_coefficients):
    grid = SynthGrid(N=tuple(np.logspace(8, 10, 10)), D=tuple(np.logspace(9, 12, 10)), S=(0.9091,),
                     r=tuple(np.linspace(0.2, 2.0, 10)))
    records = synth(published_coefficients, grid, sigma=0.01, seed=0)
    assert len(records) == 1000
    log_noise = np.log([rec.loss for rec in records]) - np.log(predict_many(published_coefficients, records))
    assert np.std(log_noise) == pytest.approx(0.01, abs=0.002)


def test_synth_rejects_bad_grids(published_coefficients):
    with pytest.raises(ConfigError):
        SynthGrid(N=())
    with pytest.raises(ConfigError):
        SynthGrid(S=(1.0,))
    with pytest.raises(ConfigError):
        SynthGrid(D=(0.0,))
    with pytest.raises(ConfigError):
        synth(published_coefficients, sigma=-0.1)


# =-=-=-=-=-=-=-=-=-=-=- Law store =-=-=-=-=-=-=-=-=-=-=-=

def test_default_store():
    store = default_law_store()
    assert [law.sparsity for law in store.allocation_laws] == [0.8235, 0.9091, 0.9538, 0.9767]
    assert all(law.provenance == "paper-fit" for law in store.allocation_laws)
    assert store.loss_law == LossLawCoefficients.published()
    assert store.allocation_law_for(0.9091).beta_r == pytest.approx(sparsity_coefficients(0.9091).beta_r)
    assert store.allocation_law_for(0.5) is None
    assert load_law_store() == store


def test_store_round_trip(tmp_path):
    path = str(tmp_path / "laws.json")
    assert load_or_default(path) == default_law_store()

    wang = AltLawCoefficients(variant="wang", params=dict(a=1.0, b=2.0, alpha=0.3, beta=0.3, gamma=0.1, tau=1.5))
    store = (default_law_store()
             .with_allocation_laws([AllocationLaw(alpha_r=2e-3, beta_r=0.1, sparsity=0.9091)])
             .with_sparsity_law(SparsityLaw(alpha_coef=1e-4, provenance="user"))
             .with_loss_coefficients(wang))
    save_law_store(store, path)
    loaded = load_law_store(path)
    assert loaded == store
    assert loaded.allocation_law_for(0.9091).alpha_r == 2e-3
    assert loaded.loss_coefficients("wang") == wang
    assert load_or_default(path) == store


def test_store_rejects_other_versions(tmp_path):
    payload = default_law_store().to_dict()
    payload["schema_version"] = 99
    path = str(tmp_path / "laws.json")
    write_json(path, payload)
    with pytest.raises(SchemaError):
        load_law_store(path)


def test_store_rejects_invalid_sparsity_law(tmp_path):
    payload = default_law_store().to_dict()
    payload["sparsity_law"]["alpha_coef"] = -6.7e-5
    path = str(tmp_path / "laws.json")
    write_json(path, payload)
    with pytest.raises(ConfigError):
        load_law_store(path)


def test_atomic_write_replaces_whole_file(tmp_path):
    path = str(tmp_path / "out.json")
    write_json(path, {"a": 1})
    atomic_write_text(path, "{\"b\": 2}\n")
    assert read_json(path) == {"b": 2}
    assert os.listdir(tmp_path) == ["out.json"]
