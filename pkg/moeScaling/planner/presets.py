"""
Per-size training hyperparameters. Labels are activation-parameter labels; the table carries no exact N_active.
"""
from dataclasses import dataclass, asdict

from moeScaling.param import sizePresetTable, validPresetList
from moeScaling.errors import ConfigError


@dataclass(frozen=True)
class SizePreset:
    label: str
    n_layer: int
    n_head: int
    batch_size: int
    learning_rate: float

    def to_dict(self):
        return asdict(self)


def preset(label: str) -> SizePreset:
    if label not in sizePresetTable:
        raise ConfigError(f"Unknown preset {label}, available presets are: {validPresetList}")
    n_layer, n_head, batch_size, learning_rate = sizePresetTable[label]
    return SizePreset(label=label, n_layer=n_layer, n_head=n_head, batch_size=batch_size, learning_rate=learning_rate)
