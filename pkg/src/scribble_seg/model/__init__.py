"""Dual-branch segmentation network."""

from scribble_seg.model.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from scribble_seg.model.config import ModelConfig
from scribble_seg.model.network import DualBranchUNet, backward, forward, init_params

__all__ = [
    "ModelConfig",
    "DualBranchUNet",
    "init_params",
    "forward",
    "backward",
    "save_checkpoint",
    "load_checkpoint",
    "read_manifest",
]
