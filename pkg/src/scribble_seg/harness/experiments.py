"""Cross-validation and ablation orchestration."""

from __future__ import annotations

import dataclasses
import json
import logging
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scribble_seg.common.config import canonical_json
from scribble_seg.common.errors import ValidationError
from scribble_seg.data.dataset import DenseLabel, Frame, ScribbleMask, SliceSample, group_by_patient, load_dataset
from scribble_seg.data.folds import FoldSplit, split_folds
from scribble_seg.data.synthetic import synthesize_dataset
from scribble_seg.data.transforms import normalize_intensity
from scribble_seg.harness.config import (
    DEFAULT_LAMBDAS,
    OPTIONAL_STRATEGIES,
    REFERENCE_STRATEGY,
    STRATEGIES,
    ExperimentConfig,
)
from scribble_seg.metrics.evaluation import AggregateTable, CaseMetrics, aggregate, evaluate_case
from scribble_seg.model.network import DualBranchUNet
from scribble_seg.train.inference import infer_volume
from scribble_seg.train.loop import train

logger = logging.getLogger(__name__)

RUNS_DIR = "runs"
DATA_DIR = "data"
METRICS_FILE = "metrics.json"
CONFIG_FILE = "config.json"

EXPERIMENT_CV = "cv"
EXPERIMENT_LAMBDA = "ablate-lambda"
EXPERIMENT_SUPERVISION = "ablate-supervision"


@dataclass
class RunRecord:
    """Evaluation of one trained fold with one decoder."""

    experiment: str
    arm: str
    fold: int
    decoder: str
    config_hash: str
    comparison_hash: str
    folds_digest: str
    scribble_source: str
    cases: list[CaseMetrics]
    wall_time: float = 0.0
    lambda_pls: float | None = None

    @property
    def table(self) -> AggregateTable:
        return aggregate(self.cases)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "arm": self.arm,
            "fold": self.fold,
            "decoder": self.decoder,
            "config_hash": self.config_hash,
            "comparison_hash": self.comparison_hash,
            "folds_digest": self.folds_digest,
            "scribble_source": self.scribble_source,
            "lambda_pls": self.lambda_pls,
            "wall_time": self.wall_time,
            "cases": [c.to_dict() for c in self.cases],
            "aggregate": self.table.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            experiment=data["experiment"],
            arm=data["arm"],
            fold=int(data["fold"]),
            decoder=data["decoder"],
            config_hash=data["config_hash"],
            comparison_hash=data["comparison_hash"],
            folds_digest=data["folds_digest"],
            scribble_source=data.get("scribble_source", "scribble"),
            cases=[CaseMetrics.from_dict(c) for c in data["cases"]],
            wall_time=float(data.get("wall_time", 0.0)),
            lambda_pls=data.get("lambda_pls"),
        )


@dataclass
class RunFailureRecord:
    arm: str
    fold: int
    error: str


@dataclass
class Arm:
    """One configuration of an experiment, trained on every fold."""

    name: str
    config: ExperimentConfig
    decoders: tuple[str, ...]
    lambda_pls: float | None = None


@dataclass
class ExperimentResult:
    experiment: str
    split: FoldSplit
    records: list[RunRecord] = field(default_factory=list)
    failures: list[RunFailureRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def fold_dir_name(fold: int) -> str:
    return f"fold-{fold}"


def prepare_dataset(config: ExperimentConfig, out_dir: Path | str) -> list[Frame]:
    """Load ``data.root`` or, when it is empty, synthesize a dataset under ``out_dir/data``."""
    if config.data.synthetic:
        synth = config.synth
        return synthesize_dataset(
            Path(out_dir) / DATA_DIR,
            n_patients=synth.n_patients,
            shape=synth.shape,
            seed=synth.seed,
            noise_sigma=synth.noise_sigma,
        )
    frames = load_dataset(config.data.root, num_classes=config.model.num_classes)
    if not frames:
        raise ValidationError(f"no frames found under {config.data.root}")
    return frames


def training_samples(frames: list[Frame], scribble_source: str = "scribble") -> list[SliceSample]:
    """Normalized slices carrying only the annotation training may see.

    With ``scribble_source="dense"`` the dense label stands in for the scribble
    (fully supervised upper bound); otherwise dense labels are stripped.
    """
    samples = []
    for frame in frames:
        image = normalize_intensity(frame.image)
        scribble = frame.scribble
        if scribble_source == "dense":
            if frame.dense is None:
                raise ValidationError(f"frame {frame.key} has no dense label to train on")
            scribble = ScribbleMask(frame.dense.labels, frame.dense.num_classes)
        samples.extend(
            s.without_dense() for s in Frame(image=image, scribble=scribble, dense=None).slices()
        )
    return samples


def _require_dense(frames: list[Frame]) -> None:
    missing = [f.key for f in frames if f.dense is None]
    if missing:
        raise ValidationError(f"evaluation frames without a dense label: {missing}")


def _split_validation(patients: list[str], fraction: float, seed: int, fold: int) -> tuple[list[str], list[str]]:
    if fraction <= 0:
        return patients, []
    n_val = min(max(1, round(fraction * len(patients))), len(patients) - 1)
    if n_val < 1:
        return patients, []
    order = np.random.default_rng([seed, fold]).permutation(len(patients))
    val = sorted(patients[i] for i in order[:n_val])
    return [p for p in patients if p not in val], val


def evaluate_frames(
    params: DualBranchUNet,
    frames: list[Frame],
    decoder: str,
    input_size: tuple[int, int],
) -> list[CaseMetrics]:
    """Infer and score every frame; cases are identified as ``<patient>_<frame>``."""
    _require_dense(frames)
    cases = []
    for frame in sorted(frames, key=lambda f: f.key):
        pred = infer_volume(params, frame.image, decoder=decoder, input_size=input_size)
        case_id = "_".join(frame.key)
        cases.append(evaluate_case(pred, frame.dense.labels, frame.image.spacing, case_id=case_id))
    return cases


def run_fold(
    experiment: str,
    arm: Arm,
    frames: list[Frame],
    split: FoldSplit,
    fold: int,
    out_dir: Path | str,
) -> list[RunRecord]:
    """Train on every fold but ``fold``, then evaluate the held-out patients.

    Writes ``runs/<arm>/fold-<k>/`` with checkpoints, ``history.jsonl`` and
    ``metrics.json``. Returns one record per evaluated decoder.
    """
    config = arm.config
    start = time.perf_counter()
    run_dir = Path(out_dir) / RUNS_DIR / arm.name / fold_dir_name(fold)
    run_dir.mkdir(parents=True, exist_ok=True)

    by_patient = group_by_patient(frames)
    train_ids, val_ids = _split_validation(
        split.train_patients(fold), config.val_fraction, config.folds_seed, fold
    )
    test_frames = [f for p in split.test_patients(fold) for f in by_patient[p]]
    val_frames = [f for p in val_ids for f in by_patient[p]]
    _require_dense(test_frames + val_frames)

    samples = training_samples([f for p in train_ids for f in by_patient[p]], config.data.scribble_source)
    val_volumes = [(normalize_intensity(f.image), DenseLabel(f.dense.labels, f.dense.num_classes)) for f in val_frames]

    logger.info(
        "%s fold %d: %d training slice(s) from %d patient(s), %d validation and %d test volume(s)",
        arm.name,
        fold,
        len(samples),
        len(train_ids),
        len(val_frames),
        len(test_frames),
    )
    train_config = dataclasses.replace(config.train, seed=config.train.seed + fold)
    result = train(
        train_config,
        samples,
        val_volumes,
        model_config=config.model,
        out_dir=run_dir,
        config_hash=config.config_hash,
    )
    params = result.best if config.eval_checkpoint == "best" else result.final

    elapsed = time.perf_counter() - start
    records = [
        RunRecord(
            experiment=experiment,
            arm=arm.name,
            fold=fold,
            decoder=decoder,
            config_hash=config.config_hash,
            comparison_hash=config.comparison_hash,
            folds_digest=split.digest,
            scribble_source=config.data.scribble_source,
            cases=evaluate_frames(params, test_frames, decoder, config.train.patch_size),
            wall_time=elapsed,
            lambda_pls=arm.lambda_pls,
        )
        for decoder in arm.decoders
    ]
    write_metrics(run_dir / METRICS_FILE, records)
    return records


def write_metrics(path: Path | str, records: list[RunRecord]) -> None:
    with open(path, "w") as f:
        f.write(canonical_json({"records": [r.to_dict() for r in records]}))


def read_metrics(path: Path | str) -> list[RunRecord]:
    with open(path) as f:
        data = json.load(f)
    return [RunRecord.from_dict(r) for r in data["records"]]


def collect_records(out_dir: Path | str) -> list[RunRecord]:
    """Read every ``runs/*/*/metrics.json`` below ``out_dir``, sorted by (arm, fold)."""
    records = []
    for path in sorted((Path(out_dir) / RUNS_DIR).glob(f"*/*/{METRICS_FILE}")):
        records.extend(read_metrics(path))
    return sort_records(records)


def sort_records(records: list[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: (r.arm, r.fold, r.decoder))


def _write_arm_config(out_dir: Path, arm: Arm) -> None:
    path = out_dir / RUNS_DIR / arm.name / CONFIG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(arm.config.to_json())


def check_controlled(records: list[RunRecord]) -> None:
    """Raise unless all records share fold assignments and non-ablated settings.

    Raises:
        ValidationError: If the comparison hashes or fold digests differ
    """
    comparison = {r.comparison_hash for r in records}
    folds = {r.folds_digest for r in records}
    if len(comparison) > 1:
        raise ValidationError(f"arms differ in more than the ablated settings: {sorted(comparison)}")
    if len(folds) > 1:
        raise ValidationError(f"arms were trained on different fold assignments: {sorted(folds)}")


def run_arms(
    experiment: str,
    arms: list[Arm],
    out_dir: Path | str,
    frames: list[Frame] | None = None,
) -> ExperimentResult:
    """Train and evaluate every (arm, fold) pair and consolidate the records.

    Fold failures are logged and collected; the remaining folds still run and
    their metrics stay on disk.
    """
    if not arms:
        raise ValidationError("at least one arm is required")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = arms[0].config
    (out / CONFIG_FILE).write_text(base.to_json())

    if frames is None:
        frames = prepare_dataset(base, out)
    split = split_folds(list(group_by_patient(frames)), base.folds, base.folds_seed)
    logger.info("fold sizes: %s (digest %s)", split.fold_sizes(), split.digest)

    result = ExperimentResult(experiment=experiment, split=split)
    jobs = [(arm, fold) for arm in arms for fold in range(split.k)]
    for arm in arms:
        _write_arm_config(out, arm)

    if base.workers > 1:
        context = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=base.workers, mp_context=context) as pool:
            futures = {
                (arm.name, fold): pool.submit(run_fold, experiment, arm, frames, split, fold, out)
                for arm, fold in jobs
            }
            for (name, fold), future in futures.items():
                try:
                    result.records.extend(future.result())
                except Exception as e:
                    logger.error("%s fold %d failed: %s", name, fold, e)
                    result.failures.append(RunFailureRecord(arm=name, fold=fold, error=str(e)))
    else:
        for arm, fold in jobs:
            try:
                result.records.extend(run_fold(experiment, arm, frames, split, fold, out))
            except Exception as e:
                logger.error("%s fold %d failed: %s", arm.name, fold, e)
                result.failures.append(RunFailureRecord(arm=arm.name, fold=fold, error=str(e)))

    result.records = sort_records(result.records)
    if result.records:
        check_controlled(result.records)
    return result


def run_cv(config: ExperimentConfig, out_dir: Path | str | None = None, frames: list[Frame] | None = None) -> ExperimentResult:
    """k-fold cross-validation of one configuration, evaluated with ``train.eval_decoder``."""
    arm = Arm(name=config.train.supervision, config=config, decoders=(config.train.eval_decoder,))
    return run_arms(EXPERIMENT_CV, [arm], out_dir or config.output_dir, frames)


def lambda_arm_name(value: float) -> str:
    return f"lambda-{value:g}"


def ablate_lambda(
    config: ExperimentConfig,
    values: list[float] | None = None,
    out_dir: Path | str | None = None,
    frames: list[Frame] | None = None,
) -> ExperimentResult:
    """Cross-validate the pseudo-label strategy once per lambda, all else fixed.

    Raises:
        ValidationError: If ``values`` is empty, repeats a value or holds a
            negative value
    """
    values = [float(v) for v in (DEFAULT_LAMBDAS if values is None else values)]
    if not values:
        raise ValidationError("lambda sweep needs at least one value")
    if len(set(values)) != len(values):
        raise ValidationError(f"lambda values must be distinct, got {values}")
    values.sort()
    if any(v < 0 for v in values):
        raise ValidationError(f"lambda values must be >= 0, got {values}")

    arms = []
    for value in values:
        train_config = dataclasses.replace(config.train, supervision="pls", lambda_pls=value)
        arms.append(
            Arm(
                name=lambda_arm_name(value),
                config=dataclasses.replace(config, train=train_config),
                decoders=(config.train.eval_decoder,),
                lambda_pls=value,
            )
        )
    return run_arms(EXPERIMENT_LAMBDA, arms, out_dir or config.output_dir, frames)


def strategy_config(config: ExperimentConfig, strategy: str) -> ExperimentConfig:
    """Derive the configuration of one supervision-ablation arm.

    Raises:
        ValidationError: If the strategy is unknown
    """
    train_config = config.train
    data_config = dataclasses.replace(config.data, scribble_source="scribble")
    if strategy in ("pce", "cr", "cps"):
        train_config = dataclasses.replace(train_config, supervision=strategy)
    elif strategy == "pls":
        train_config = dataclasses.replace(train_config, supervision="pls", alpha_mode="random")
    elif strategy == "pls-fixed":
        train_config = dataclasses.replace(train_config, supervision="pls", alpha_mode="fixed", alpha_fixed=0.5)
    elif strategy == "fullsup":
        train_config = dataclasses.replace(train_config, supervision="pce")
        data_config = dataclasses.replace(data_config, scribble_source="dense")
    else:
        raise ValidationError(f"unknown strategy {strategy!r}; choose from {STRATEGIES + OPTIONAL_STRATEGIES}")
    return dataclasses.replace(config, train=train_config, data=data_config)


def ablate_supervision(
    config: ExperimentConfig,
    strategies: list[str] | None = None,
    out_dir: Path | str | None = None,
    frames: list[Frame] | None = None,
) -> ExperimentResult:
    """Cross-validate each supervision strategy on shared folds and seeds.

    The pCE baseline is always trained since every other arm is tested
    against it. Pseudo-label arms are evaluated with both decoders.

    Raises:
        ValidationError: If the strategy list is empty or names an unknown strategy
    """
    requested = list(STRATEGIES if strategies is None else strategies)
    if not requested:
        raise ValidationError("supervision ablation needs at least one strategy")
    known = STRATEGIES + OPTIONAL_STRATEGIES
    unknown = [s for s in requested if s not in known]
    if unknown:
        raise ValidationError(f"unknown strategy(s) {unknown}; choose from {known}")
    if REFERENCE_STRATEGY not in requested:
        requested.insert(0, REFERENCE_STRATEGY)

    arms = []
    for strategy in sorted(set(requested), key=known.index):
        decoders = ("main", "aux") if strategy.startswith("pls") else (config.train.eval_decoder,)
        arms.append(Arm(name=strategy, config=strategy_config(config, strategy), decoders=decoders))
    return run_arms(EXPERIMENT_SUPERVISION, arms, out_dir or config.output_dir, frames)
