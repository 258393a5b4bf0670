"""CLI entry point for scribble-supervised segmentation experiments."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from scribble_seg import __version__
from scribble_seg.common.errors import ConfigError, ScribbleSegError, ValidationError
from scribble_seg.common.reporter import Reporter
from scribble_seg.data.config import FOREGROUND
from scribble_seg.data.dataset import group_by_patient
from scribble_seg.data.folds import split_folds
from scribble_seg.data.synthetic import scribble_coverage, synthesize_dataset
from scribble_seg.harness.config import (
    DEFAULT_LAMBDAS,
    REPORT_FORMATS,
    STRATEGIES,
    ExperimentConfig,
    load_config,
    read_config_file,
)
from scribble_seg.harness.experiments import (
    CONFIG_FILE,
    METRICS_FILE,
    RUNS_DIR,
    ExperimentResult,
    RunRecord,
    ablate_lambda,
    ablate_supervision,
    collect_records,
    evaluate_frames,
    fold_dir_name,
    prepare_dataset,
    run_cv,
    training_samples,
    write_metrics,
)
from scribble_seg.harness.report import emit_report
from scribble_seg.model.checkpoint import load_checkpoint
from scribble_seg.train.loop import train

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Coverage above this fraction no longer looks like a scribble
SCRIBBLE_COVERAGE_WARN = 0.05


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _parse_list(text: str | None, cast=str) -> list | None:
    if text is None:
        return None
    try:
        return [cast(item.strip()) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse list {text!r}: {e}") from None


def _resolve(parsed: argparse.Namespace) -> ExperimentConfig:
    config = load_config(parsed.config, parsed.set, parsed.seed)
    config = dataclasses.replace(config, output_dir=str(parsed.out))
    if parsed.quiet:
        config = dataclasses.replace(config, train=dataclasses.replace(config.train, progress=False))
    return config


def _report_result(reporter: Reporter, result: ExperimentResult) -> None:
    for record in result.records:
        reporter.add_completed(f"{record.arm}/{fold_dir_name(record.fold)}/{record.decoder}")
        sentinels = sum(record.table.sentinel_counts[c] for c in FOREGROUND)
        if sentinels:
            reporter.add_warning(
                run=f"{record.arm}/{fold_dir_name(record.fold)}/{record.decoder}",
                message=f"{sentinels} structure(s) with exactly one empty mask",
                details="HD95 for these holds the volume diagonal",
            )
    for failure in result.failures:
        reporter.add_error(
            run=f"{failure.arm}/{fold_dir_name(failure.fold)}",
            message="run failed",
            details=failure.error,
            suggestion="Partial results are kept under runs/; rerun after fixing the cause",
        )


def _emit(reporter: Reporter, result: ExperimentResult, config: ExperimentConfig, out: Path) -> None:
    if not result.records:
        reporter.add_error(run=result.experiment, message="no run completed; no report written")
        return
    for path in emit_report(result.records, config.report_formats, out, result.failures):
        reporter.add_artifact(str(path))


def cmd_synth(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    synth = config.synth
    frames = synthesize_dataset(parsed.out, synth.n_patients, synth.shape, synth.seed, synth.noise_sigma)
    for frame in frames:
        run = "_".join(frame.key)
        coverage = scribble_coverage(frame.scribble)
        reporter.add_completed(f"{run} (scribble coverage {coverage:.2%})")
        if coverage >= SCRIBBLE_COVERAGE_WARN:
            reporter.add_warning(run=run, message=f"scribble coverage {coverage:.2%} is not sparse")
    reporter.add_artifact(str(parsed.out))


def cmd_train(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_FILE).write_text(config.to_json())

    frames = prepare_dataset(config, out)
    by_patient = group_by_patient(frames)
    if parsed.fold is None:
        train_ids = sorted(by_patient)
        run = "all"
    else:
        split = split_folds(list(by_patient), config.folds, config.folds_seed)
        if not 0 <= parsed.fold < split.k:
            raise ValidationError(f"--fold must be in [0, {split.k}), got {parsed.fold}")
        train_ids = split.train_patients(parsed.fold)
        run = fold_dir_name(parsed.fold)

    run_dir = out / RUNS_DIR / config.train.supervision / run
    samples = training_samples([f for p in train_ids for f in by_patient[p]], config.data.scribble_source)
    result = train(config.train, samples, model_config=config.model, out_dir=run_dir, config_hash=config.config_hash)
    if result.history:
        last = result.history[-1]
        reporter.add_completed(f"{config.train.supervision}/{run} (final loss {last['loss_total']:.4f})")
    else:
        reporter.add_completed(f"{config.train.supervision}/{run} (no iterations)")
    reporter.add_artifact(str(run_dir))


def cmd_eval(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    out = Path(config.output_dir)
    params, info = load_checkpoint(parsed.checkpoint)
    if info.config_hash != config.config_hash:
        reporter.add_warning(
            run="eval",
            message="checkpoint was trained with a different config",
            details=f"checkpoint {info.config_hash}, config {config.config_hash}",
        )

    frames = prepare_dataset(config, out)
    if parsed.fold is not None:
        split = split_folds(list(group_by_patient(frames)), config.folds, config.folds_seed)
        test = set(split.test_patients(parsed.fold))
        frames = [f for f in frames if f.image.patient_id in test]

    record = RunRecord(
        experiment="eval",
        arm="eval",
        fold=parsed.fold if parsed.fold is not None else 0,
        decoder=parsed.decoder,
        config_hash=info.config_hash,
        comparison_hash=config.comparison_hash,
        folds_digest="",
        scribble_source=config.data.scribble_source,
        cases=evaluate_frames(params, frames, parsed.decoder, config.train.patch_size),
    )
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / METRICS_FILE, [record])
    reporter.add_completed(f"eval/{parsed.decoder} ({len(record.cases)} case(s), mean DSC {record.table.dsc['Mean'].mean:.3f})")
    reporter.add_artifact(str(out / METRICS_FILE))
    for path in emit_report([record], config.report_formats, out):
        reporter.add_artifact(str(path))


def cmd_cv(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    result = run_cv(config)
    _report_result(reporter, result)
    _emit(reporter, result, config, Path(config.output_dir))


def cmd_ablate_lambda(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    result = ablate_lambda(config, _parse_list(parsed.values, float))
    _report_result(reporter, result)
    _emit(reporter, result, config, Path(config.output_dir))


def cmd_ablate_supervision(parsed: argparse.Namespace, reporter: Reporter) -> None:
    config = _resolve(parsed)
    result = ablate_supervision(config, _parse_list(parsed.strategies))
    _report_result(reporter, result)
    _emit(reporter, result, config, Path(config.output_dir))


def cmd_report(parsed: argparse.Namespace, reporter: Reporter) -> None:
    out = Path(parsed.out)
    records = collect_records(out)
    if not records:
        reporter.add_error(run="report", message=f"no {RUNS_DIR}/*/*/{METRICS_FILE} under {out}")
        return
    formats = REPORT_FORMATS
    if (out / CONFIG_FILE).exists():
        formats = tuple(read_config_file(out / CONFIG_FILE).get("report_formats", REPORT_FORMATS))
    for path in emit_report(records, formats, out):
        reporter.add_artifact(str(path))


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "ablate-lambda": cmd_ablate_lambda,
    "ablate-supervision": cmd_ablate_supervision,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribble-seg",
        description="Scribble-supervised segmentation with a dual-branch network and mixed pseudo labels",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s synth --out data --set synth.n_patients=20     # Write a synthetic dataset
  %(prog)s cv --config exp.json --out out                 # Five-fold cross-validation
  %(prog)s cv --out out --set folds=2 --seed 1            # Defaults, two folds, seed 1
  %(prog)s ablate-lambda --config exp.json --out sweep    # Lambda sensitivity sweep
  %(prog)s ablate-supervision --out abl --strategies pce,pls
  %(prog)s report --out out                               # Re-emit reports from runs/
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", default=None, help="JSON or TOML experiment config")
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a config key with dotted-path syntax, e.g. train.lambda_pls=0.3 (repeatable)",
    )
    common.add_argument("--out", "-o", required=True, help="Output directory")
    common.add_argument("--seed", type=int, default=None, help="Seed for data synthesis, folds and training")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    common.add_argument("--quiet", "-q", action="store_true", help="Warnings only, no progress bar")
    common.add_argument(
        "--fail-on-warning",
        "-w",
        action="store_true",
        help="Treat warnings as errors (return non-zero exit code)",
    )

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="Write a synthetic dataset")

    p = sub.add_parser("train", parents=[common], help="Train one model")
    p.add_argument("--fold", type=int, default=None, help="Hold out this fold (default: train on all patients)")

    p = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, help="Checkpoint directory")
    p.add_argument("--decoder", choices=("main", "aux"), default="main", help="Decoder to predict with")
    p.add_argument("--fold", type=int, default=None, help="Evaluate only this fold's test patients")

    sub.add_parser("cv", parents=[common], help="k-fold cross-validation")

    p = sub.add_parser("ablate-lambda", parents=[common], help="Lambda sensitivity sweep")
    p.add_argument(
        "--values",
        default=None,
        help=f"Comma-separated lambda values (default: {','.join(f'{v:g}' for v in DEFAULT_LAMBDAS)})",
    )

    p = sub.add_parser("ablate-supervision", parents=[common], help="Supervision strategy ablation")
    p.add_argument(
        "--strategies",
        default=None,
        help=f"Comma-separated strategies (default: {','.join(STRATEGIES)}; 'fullsup' is also accepted)",
    )

    sub.add_parser("report", parents=[common], help="Re-emit reports from runs/*/*/metrics.json")
    return parser


def main(args: list[str] | None = None) -> int:
    """Main entry point for the scribble-seg CLI.

    Args:
        args: Command line arguments (uses sys.argv if None)

    Returns:
        Exit code (0 for success, 1 for failure)
    """
    parsed = build_parser().parse_args(args)
    setup_logging(parsed.verbose, parsed.quiet)

    reporter = Reporter(title=f"scribble-seg {parsed.command}")
    try:
        COMMANDS[parsed.command](parsed, reporter)
    except ScribbleSegError as e:
        reporter.add_error(run=parsed.command, message=str(e))
    except OSError as e:
        reporter.add_error(run=parsed.command, message=f"I/O error: {e}")

    reporter.print_report()
    reporter.write_summary()
    return reporter.get_exit_code(parsed.fail_on_warning)


if __name__ == "__main__":
    sys.exit(main())
