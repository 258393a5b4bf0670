"""Evaluation metrics: 3D Dice, HD95, aggregation and paired testing."""

from scribble_seg.metrics.evaluation import (
    COLUMNS,
    AggregateTable,
    CaseMetrics,
    StructureMetrics,
    aggregate,
    evaluate_case,
)
from scribble_seg.metrics.overlap import BinaryVolume, dsc3d, extract_surface, hd95
from scribble_seg.metrics.stats import PairedTestResult, paired_test

__all__ = [
    "COLUMNS",
    "AggregateTable",
    "CaseMetrics",
    "StructureMetrics",
    "aggregate",
    "evaluate_case",
    "BinaryVolume",
    "dsc3d",
    "extract_surface",
    "hd95",
    "PairedTestResult",
    "paired_test",
]
