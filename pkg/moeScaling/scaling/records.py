"""
RunRecord: one training run's observation, and the RunRecord CSV format

    label,N,N_active,D,S,r,C,loss

Numbers may be decimal or scientific; lines starting with '#' are comments. C and loss may be left empty on records
that are only used for prediction.
"""
import io
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from moeScaling.param import defaultActiveExperts
from moeScaling.errors import ConfigError, SchemaError, DomainError

logger = logging.getLogger(__name__)

recordColumns = ["label", "N", "N_active", "D", "S", "r", "C", "loss"]


@dataclass(frozen=True)
class RunRecord:
    label: str
    N: float
    N_active: float
    D: float
    S: float
    r: float
    C: float = None
    loss: float = None

    def __post_init__(self):
        if not (self.N >= self.N_active > 0):
            raise ConfigError(f"record {self.label}: need N >= N_active > 0, got N={self.N}, N_active={self.N_active}")
        if not self.D > 0:
            raise ConfigError(f"record {self.label}: D must be positive")
        if not 0 <= self.S < 1:
            raise DomainError(f"record {self.label}: sparsity must satisfy 0 <= S < 1, got {self.S}")
        if not self.r > 0:
            raise ConfigError(f"record {self.label}: r must be positive")
        if self.C is not None and not self.C > 0:
            raise ConfigError(f"record {self.label}: C must be positive")
        if self.loss is not None and not self.loss > 0:
            raise ConfigError(f"record {self.label}: loss must be positive")

    def with_tokens(self, D):
        return RunRecord(label=self.label, N=self.N, N_active=self.N_active, D=D, S=self.S, r=self.r, C=self.C, loss=None)


def _optional(value):
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def read_records_csv(source):
    """
    Read records from a path, a file object, or CSV text (any string containing a newline).

    Raises:
        SchemaError: when the header is not exactly the RunRecord columns.
    """
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    frame = pd.read_csv(source, comment="#", skipinitialspace=True, dtype={"label": str}, keep_default_na=False, na_values=[""])
    columns = [str(c).strip() for c in frame.columns]
    if columns != recordColumns:
        raise SchemaError(f"RunRecord CSV header must be {','.join(recordColumns)}, got {','.join(columns)}")
    frame.columns = columns

    records = []
    for row in frame.itertuples(index=False):
        records.append(RunRecord(
            label=str(row.label),
            N=float(row.N),
            N_active=float(row.N_active),
            D=float(row.D),
            S=float(row.S),
            r=float(row.r),
            C=_optional(row.C),
            loss=_optional(row.loss),
        ))
    logger.debug(f"[records][read_records_csv] {len(records)} records")
    return records


def records_to_frame(records):
    return pd.DataFrame(
        [[rec.label, rec.N, rec.N_active, rec.D, rec.S, rec.r, rec.C, rec.loss] for rec in records],
        columns=recordColumns,
    )


def write_records_csv(records, target=None):
    """Write to a path or file object; with no target, return the CSV text."""
    text = records_to_frame(records).to_csv(index=False, lineterminator="\n", na_rep="")
    if target is None:
        return text
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as handle:
            handle.write(text)
    return text


def record_features(records, param_count="total", n_active_experts=defaultActiveExperts):
    """
    Column arrays used by the vectorised laws: N (total or active), D, S, r, and the total expert count
    E = e_act / (1 - S).
    """
    if not records:
        raise ConfigError("no records")
    N = np.array([rec.N_active if param_count == "active" else rec.N for rec in records], dtype=np.float64)
    S = np.array([rec.S for rec in records], dtype=np.float64)
    return {
        "N": N,
        "D": np.array([rec.D for rec in records], dtype=np.float64),
        "S": S,
        "r": np.array([rec.r for rec in records], dtype=np.float64),
        "E": n_active_experts / (1.0 - S),
    }


def observed_losses(records):
    losses = [rec.loss for rec in records]
    if any(loss is None for loss in losses):
        raise ConfigError("every record needs an observed loss")
    return np.array(losses, dtype=np.float64)
