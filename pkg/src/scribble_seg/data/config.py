"""Dataset constants and augmentation settings."""

from __future__ import annotations

from dataclasses import dataclass

from scribble_seg.common.config import dataclass_from_dict, dataclass_to_dict

# Scribble sentinel for unannotated pixels; cannot collide with a class id
UNLABELED = 255

# Class ids follow the order background, right ventricle, myocardium, left ventricle
CLASS_NAMES = ("BG", "RV", "Myo", "LV")
FOREGROUND = CLASS_NAMES[1:]
NUM_CLASSES = len(CLASS_NAMES)

# File kinds stored per frame
KINDS = ("image", "label", "scribble")

# Default voxel spacing of synthetic scans (slice, row, col), in mm
SYNTH_SPACING_MM = (10.0, 1.5, 1.5)

# Smallest in-plane size that fits the synthetic structures
SYNTH_MIN_SIZE = 32


@dataclass
class AugmentConfig:
    """Random augmentation applied to training slices."""

    rotate_prob: float = 0.5
    flip_prob: float = 0.5
    noise_prob: float = 0.5
    noise_sigma_max: float = 0.05
    # Off by default: 90-degree rotations keep labels an exact pixel permutation
    free_rotation: bool = False
    free_rotation_max_deg: float = 20.0

    def __post_init__(self):
        for name in ("rotate_prob", "flip_prob", "noise_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.noise_sigma_max < 0:
            raise ValueError(f"noise_sigma_max must be >= 0, got {self.noise_sigma_max}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "AugmentConfig":
        return dataclass_from_dict(cls, data, "augment")

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)
