"""Experiment orchestration: configs, cross-validation, ablations, reports and the CLI."""

from scribble_seg.harness.config import DEFAULT_LAMBDAS, STRATEGIES, ExperimentConfig, load_config
from scribble_seg.harness.experiments import RunRecord, ablate_lambda, ablate_supervision, run_cv
from scribble_seg.harness.report import emit_report

__all__ = [
    "DEFAULT_LAMBDAS",
    "STRATEGIES",
    "ExperimentConfig",
    "load_config",
    "RunRecord",
    "ablate_lambda",
    "ablate_supervision",
    "run_cv",
    "emit_report",
]
