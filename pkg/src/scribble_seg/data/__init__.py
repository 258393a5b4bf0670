"""Dataset representation, preprocessing, fold splitting and synthetic data."""

from scribble_seg.data.config import CLASS_NAMES, FOREGROUND, NUM_CLASSES, UNLABELED, AugmentConfig
from scribble_seg.data.dataset import (
    DenseLabel,
    Frame,
    ImageVolume,
    ScribbleMask,
    SliceSample,
    load_dataset,
    write_frame,
)
from scribble_seg.data.folds import FoldSplit, split_folds
from scribble_seg.data.synthetic import synthesize_dataset, synthesize_scribbles
from scribble_seg.data.transforms import augment, normalize_intensity, resize_sample

__all__ = [
    "CLASS_NAMES",
    "FOREGROUND",
    "NUM_CLASSES",
    "UNLABELED",
    "AugmentConfig",
    "DenseLabel",
    "Frame",
    "ImageVolume",
    "ScribbleMask",
    "SliceSample",
    "load_dataset",
    "write_frame",
    "FoldSplit",
    "split_folds",
    "synthesize_dataset",
    "synthesize_scribbles",
    "augment",
    "normalize_intensity",
    "resize_sample",
]
