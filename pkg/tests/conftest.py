import itertools

import pytest

from moeScaling.flops import ModelConfig
from moeScaling.scaling import LossLawCoefficients, RunRecord, predict_many


def make_config(**overrides):
    values = dict(
        n_layer=1, n_head=1, d_hidden=4, d_expert=4, n_experts=4, top_k=1, n_shared_experts=0,
        n_ctx=2, n_vocab=8,
    )
    values.update(overrides)
    return ModelConfig(**values)


def grid_records(coef, N=(1e8, 3e8, 1e9, 5e9), D=(1e9, 1e10, 1e11, 1e12), S=(0.8235, 0.9091, 0.9538, 0.9767),
                 r=(0.2, 0.6, 1.0, 1.5)):
    base = [
        RunRecord(label=f"run{i}", N=n, N_active=n * (1 - s), D=d, S=s, r=ratio)
        for i, (n, d, s, ratio) in enumerate(itertools.product(N, D, S, r))
    ]
    losses = predict_many(coef, base)
    return [
        RunRecord(label=rec.label, N=rec.N, N_active=rec.N_active, D=rec.D, S=rec.S, r=rec.r, loss=float(loss))
        for rec, loss in zip(base, losses)
    ]


@pytest.fixture
def tiny_config():
    return make_config()


@pytest.fixture
def published_coefficients():
    return LossLawCoefficients.published()
