"""Optimization loop, learning-rate schedule and volume inference."""

from scribble_seg.train.config import TrainConfig
from scribble_seg.train.inference import infer_volume
from scribble_seg.train.loop import TrainResult, train
from scribble_seg.train.optim import OptimState, poly_lr, sgd_step

__all__ = [
    "TrainConfig",
    "infer_volume",
    "TrainResult",
    "train",
    "OptimState",
    "poly_lr",
    "sgd_step",
]
