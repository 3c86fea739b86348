"""
Optimal-ratio extraction from FLOPs-ratio sweeps.

Within a sweep at fixed (C, S) the optimal ratio is the sampled r with the lowest loss. Across training volume r* is
expected not to shrink: when the argmin at a larger C falls below the r* chosen at the previous C of the same
sparsity, the drop is treated as a fluctuation and the smallest r >= previous r* whose loss is within 0.001 of the
minimum is taken instead.

Sweep CSV format: C,S,r,loss
"""
import io
import logging
from dataclasses import dataclass

import pandas as pd

from moeScaling.param import rStarLossTolerance
from moeScaling.errors import SelectionError, SchemaError

logger = logging.getLogger(__name__)

sweepColumns = ["C", "S", "r", "loss"]
rStarColumns = ["C", "S", "r_star", "loss_at_star", "selection_note"]


@dataclass(frozen=True)
class SweepGroup:
    C: float
    S: float
    points: tuple

    def __post_init__(self):
        points = tuple(sorted((float(r), float(loss)) for r, loss in self.points))
        if len(points) < 2:
            raise SelectionError(f"sweep at C={self.C}, S={self.S} needs at least 2 points")
        ratios = [r for r, _ in points]
        if any(r <= 0 for r in ratios):
            raise SelectionError(f"sweep at C={self.C}, S={self.S} has nonpositive r")
        if len(set(ratios)) != len(ratios):
            raise SelectionError(f"sweep at C={self.C}, S={self.S} has duplicate r values")
        object.__setattr__(self, "points", points)


@dataclass(frozen=True)
class RStarObservation:
    C: float
    S: float
    r_star: float
    loss_at_star: float
    selection_note: str


def extract_rstar(groups, tolerance: float = rStarLossTolerance):
    """
    Args:
    groups (list of SweepGroup): within each sparsity level, ordered by ascending C.
    tolerance (float): largest loss gap (exclusive) for accepting a suboptimal point.

    Returns:
    list of RStarObservation, one per group, in input order.
    """
    previous = {}
    last_compute = {}
    output = []

    for group in groups:
        if group.S in last_compute and group.C <= last_compute[group.S]:
            raise SelectionError(f"groups at S={group.S} must be sorted by strictly ascending C")
        last_compute[group.S] = group.C

        # points are sorted by r, so the first minimum is the smallest r on ties
        min_loss = min(loss for _, loss in group.points)
        r_star, loss_at_star = next((r, loss) for r, loss in group.points if loss == min_loss)
        note = "argmin"

        prev_r = previous.get(group.S)
        if prev_r is not None and r_star < prev_r:
            candidates = [(r, loss) for r, loss in group.points if r >= prev_r and loss - min_loss < tolerance]
            if candidates:
                r_star, loss_at_star = candidates[0]
                note = "suboptimal-monotonic"
                logger.info(f"[fit][extract_rstar] S={group.S} C={group.C:g}: argmin r fell below {prev_r}, selecting r={r_star} (gap {loss_at_star - min_loss:.3g})")

        previous[group.S] = r_star
        output.append(RStarObservation(C=group.C, S=group.S, r_star=r_star, loss_at_star=loss_at_star, selection_note=note))

    return output


def read_sweep_csv(source):
    """Group sweep rows by (S, C), ordered by S then ascending C."""
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    frame = pd.read_csv(source, comment="#", skipinitialspace=True)
    columns = [str(c).strip() for c in frame.columns]
    if columns != sweepColumns:
        raise SchemaError(f"sweep CSV header must be {','.join(sweepColumns)}, got {','.join(columns)}")
    frame.columns = columns

    groups = []
    for (S, C), rows in frame.groupby(["S", "C"], sort=True):
        groups.append(SweepGroup(C=float(C), S=float(S), points=tuple(zip(rows["r"], rows["loss"]))))
    return groups


def rstar_frame(observations):
    return pd.DataFrame(
        [[o.C, o.S, o.r_star, o.loss_at_star, o.selection_note] for o in observations],
        columns=rStarColumns,
    )


def read_rstar_csv(source):
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    frame = pd.read_csv(source, comment="#", skipinitialspace=True)
    columns = [str(c).strip() for c in frame.columns]
    if columns != rStarColumns:
        raise SchemaError(f"r* CSV header must be {','.join(rStarColumns)}, got {','.join(columns)}")
    frame.columns = columns
    return [
        RStarObservation(C=float(row.C), S=float(row.S), r_star=float(row.r_star), loss_at_star=float(row.loss_at_star), selection_note=str(row.selection_note))
        for row in frame.itertuples(index=False)
    ]
