"""
Synthetic RunRecord generator: losses from a loss law times log-normal noise, deterministic under a seed.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from moeScaling.param import synthGridN, synthGridD, synthGridS, synthGridR, defaultSeed
from moeScaling.errors import ConfigError
from moeScaling.scaling import RunRecord, predict_many

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthGrid:
    N: tuple = field(default_factory=lambda: tuple(synthGridN))
    D: tuple = field(default_factory=lambda: tuple(synthGridD))
    S: tuple = field(default_factory=lambda: tuple(synthGridS))
    r: tuple = field(default_factory=lambda: tuple(synthGridR))

    def __post_init__(self):
        for name in ["N", "D", "S", "r"]:
            values = getattr(self, name)
            if not values:
                raise ConfigError(f"invalid grid: {name} is empty")
            if name == "S":
                if any(not 0 <= s < 1 for s in values):
                    raise ConfigError("invalid grid: sparsity values must satisfy 0 <= S < 1")
            elif any(v <= 0 for v in values):
                raise ConfigError(f"invalid grid: {name} values must be positive")

    def __len__(self):
        return len(self.N) * len(self.D) * len(self.S) * len(self.r)


def synth(coef, grid: SynthGrid = None, sigma: float = 0.0, seed: int = defaultSeed):
    """
    One record per grid point in (N, D, S, r) product order with loss = predicted * exp(eps), eps ~ N(0, sigma^2).
    N_active is N (1 - S) and C is 6 N_active D.
    """
    grid = grid or SynthGrid()
    if sigma < 0:
        raise ConfigError("sigma must be nonnegative")

    base = []
    for N, D, S, r in itertools.product(grid.N, grid.D, grid.S, grid.r):
        N_active = float(N) * (1.0 - float(S))
        base.append(RunRecord(
            label=f"N{N:.3g}-D{D:.3g}-S{S:g}-r{r:g}",
            N=float(N),
            N_active=N_active,
            D=float(D),
            S=float(S),
            r=float(r),
            C=6.0 * N_active * float(D),
        ))

    losses = predict_many(coef, base)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        losses = losses * np.exp(rng.normal(0.0, sigma, size=len(base)))

    logger.info(f"[planner][synth] {len(base)} records, sigma={sigma}, seed={seed}")
    return [
        RunRecord(label=rec.label, N=rec.N, N_active=rec.N_active, D=rec.D, S=rec.S, r=rec.r, C=rec.C, loss=float(loss))
        for rec, loss in zip(base, losses)
    ]
