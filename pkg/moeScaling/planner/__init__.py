"""
Planning front end: the architecture solver, size presets, the synthetic data generator and law store
persistence. The command line lives in moeScaling.planner.cli.
"""
from moeScaling.planner.solver import PlanRequest, PlanResult, plan, plan_lattice, per_token_target
from moeScaling.planner.presets import SizePreset, preset
from moeScaling.planner.synth import SynthGrid, synth
from moeScaling.planner.law_store import (
    LawStore,
    default_law_store,
    load_law_store,
    load_or_default,
    save_law_store,
)

__all__ = [
    "PlanRequest",
    "PlanResult",
    "plan",
    "plan_lattice",
    "per_token_target",
    "SizePreset",
    "preset",
    "SynthGrid",
    "synth",
    "LawStore",
    "default_law_store",
    "load_law_store",
    "load_or_default",
    "save_law_store",
]
