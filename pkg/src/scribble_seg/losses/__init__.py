"""Scribble, pseudo-label and ablation losses."""

from scribble_seg.losses.config import PLS_CRITERIA, SUPERVISIONS, LossWeights
from scribble_seg.losses.functional import (
    LossDiagnostics,
    cps_loss,
    cr_loss,
    dice_loss,
    mix_pseudo_label,
    partial_cross_entropy,
    pls_loss,
    sample_alpha,
    total_loss,
)

__all__ = [
    "PLS_CRITERIA",
    "SUPERVISIONS",
    "LossWeights",
    "LossDiagnostics",
    "cps_loss",
    "cr_loss",
    "dice_loss",
    "mix_pseudo_label",
    "partial_cross_entropy",
    "pls_loss",
    "sample_alpha",
    "total_loss",
]
