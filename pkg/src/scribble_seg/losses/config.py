"""Loss weights and supervision strategy names."""

from __future__ import annotations

from dataclasses import dataclass

from scribble_seg.common.config import dataclass_from_dict, dataclass_to_dict

# Floor applied to probabilities inside logarithms
PROB_FLOOR = 1e-12

# Supervision strategies understood by total_loss
SUPERVISIONS = ("pls", "cps", "cr", "pce")

# Criteria usable for the pseudo-label term
PLS_CRITERIA = ("dice", "ce")


@dataclass
class LossWeights:
    """Weights and smoothing constants of the joint objective."""

    lambda_pls: float = 0.5
    epsilon_dice: float = 1e-5
    dice_include_background: bool = True
    pls_criterion: str = "dice"

    def __post_init__(self):
        if not self.lambda_pls >= 0:
            raise ValueError(f"lambda_pls must be >= 0, got {self.lambda_pls}")
        if not self.epsilon_dice > 0:
            raise ValueError(f"epsilon_dice must be > 0, got {self.epsilon_dice}")
        if self.pls_criterion not in PLS_CRITERIA:
            raise ValueError(f"pls_criterion must be one of {PLS_CRITERIA}, got {self.pls_criterion!r}")

    @classmethod
    def from_dict(cls, data: dict | None) -> "LossWeights":
        return dataclass_from_dict(cls, data, "losses")

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)
