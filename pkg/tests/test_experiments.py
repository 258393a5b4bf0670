"""Tests for cross-validation and ablation orchestration."""

import json

import numpy as np
import pytest

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.synthetic import synthesize_dataset
from scribble_seg.harness import experiments
from scribble_seg.harness.config import DEFAULT_LAMBDAS, STRATEGIES, load_config
from scribble_seg.harness.experiments import (
    CONFIG_FILE,
    METRICS_FILE,
    RUNS_DIR,
    RunRecord,
    ablate_lambda,
    ablate_supervision,
    check_controlled,
    collect_records,
    read_metrics,
    run_cv,
    strategy_config,
    training_samples,
)
from scribble_seg.harness.report import LAMBDA_SWEEP_CSV, build_rows, emit_report

TINY = [
    "synth.n_patients=4",
    "synth.shape=[2,32,32]",
    "folds=2",
    "model.levels=2",
    "model.base_width=2",
    "train.patch_size=[32,32]",
    "train.max_iterations=2",
    "train.batch_size=2",
    "train.progress=false",
]


def tiny_config(tmp_path, *overrides):
    return load_config(overrides=TINY + [f'output_dir="{tmp_path}"', *overrides])


@pytest.fixture
def frames(tmp_path_factory):
    return synthesize_dataset(tmp_path_factory.mktemp("data"), n_patients=4, shape=(2, 32, 32), seed=0)


def fake_record(arm, comparison_hash="cmp", folds_digest="folds"):
    return RunRecord("cv", arm, 0, "main", "h", comparison_hash, folds_digest, "scribble", [])


class TestStrategyConfig:
    """Tests for strategy_config."""

    @pytest.mark.parametrize("strategy", ["pce", "cr", "cps"])
    def test_plain_strategies(self, strategy):
        """Test the named supervision is selected."""
        assert strategy_config(load_config(), strategy).train.supervision == strategy

    def test_pls_variants(self):
        """Test random and fixed mixing arms."""
        base = load_config(overrides=["train.alpha_mode=fixed", "train.alpha_fixed=0.2"])
        pls = strategy_config(base, "pls").train
        fixed = strategy_config(base, "pls-fixed").train
        assert (pls.supervision, pls.alpha_mode) == ("pls", "random")
        assert (fixed.supervision, fixed.alpha_mode, fixed.alpha_fixed) == ("pls", "fixed", 0.5)

    def test_fullsup(self):
        """Test the upper bound trains scribble-only loss on dense labels."""
        config = strategy_config(load_config(), "fullsup")
        assert config.train.supervision == "pce"
        assert config.data.scribble_source == "dense"

    def test_arms_stay_comparable(self):
        """Test every arm shares the comparison hash of the base config."""
        base = load_config()
        hashes = {strategy_config(base, s).comparison_hash for s in ("pce", "cr", "cps", "pls", "pls-fixed", "fullsup")}
        assert hashes == {base.comparison_hash}

    def test_unknown(self):
        """Test an unknown strategy name."""
        with pytest.raises(ValidationError, match="unknown strategy"):
            strategy_config(load_config(), "entropy-min")


class TestTrainingSamples:
    """Tests for training_samples."""

    def test_dense_stripped(self, frames):
        """Test slices carry scribbles only, normalized to [0, 1]."""
        samples = training_samples(frames)
        assert len(samples) == sum(f.image.voxels.shape[0] for f in frames)
        assert all(s.dense is None for s in samples)
        assert all(0.0 <= s.image.min() and s.image.max() <= 1.0 for s in samples)

    def test_dense_source(self, frames):
        """Test the dense label stands in for the scribble when asked."""
        samples = training_samples(frames[:1], "dense")
        assert all(s.dense is None for s in samples)
        assert (samples[0].scribble.labels == frames[0].dense.labels[0]).all()


class TestCheckControlled:
    """Tests for check_controlled."""

    def test_shared(self):
        """Test records with shared hashes pass."""
        check_controlled([fake_record("pce"), fake_record("pls")])

    def test_different_settings(self):
        """Test arms differing outside the ablated keys."""
        with pytest.raises(ValidationError, match="ablated"):
            check_controlled([fake_record("pce"), fake_record("pls", comparison_hash="other")])

    def test_different_folds(self):
        """Test arms trained on different fold assignments."""
        with pytest.raises(ValidationError, match="fold assignments"):
            check_controlled([fake_record("pce"), fake_record("pls", folds_digest="other")])


class TestAblationArguments:
    """Tests for argument validation before anything trains."""

    @pytest.mark.parametrize("values", [[], [-0.1, 0.5], [0.5, 0.1, 0.5]])
    def test_bad_lambdas(self, tmp_path, values):
        """Test empty, negative and repeated lambda lists."""
        with pytest.raises(ValidationError):
            ablate_lambda(tiny_config(tmp_path), values)

    @pytest.mark.parametrize("strategies", [[], ["pls", "mixup"]])
    def test_bad_strategies(self, tmp_path, strategies):
        """Test empty and unknown strategy lists."""
        with pytest.raises(ValidationError):
            ablate_supervision(tiny_config(tmp_path), strategies)


class TestRunArms:
    """Tests for run_arms with the training stubbed out."""

    def test_failure_collected(self, tmp_path, frames, monkeypatch):
        """Test a failing fold is recorded while the others complete."""
        real_run_fold = experiments.run_fold

        def flaky(experiment, arm, frames, split, fold, out_dir):
            if fold == 1:
                raise RuntimeError("out of memory")
            return real_run_fold(experiment, arm, frames, split, fold, out_dir)

        monkeypatch.setattr(experiments, "run_fold", flaky)
        result = run_cv(tiny_config(tmp_path), frames=frames)
        assert not result.ok
        assert [(f.arm, f.fold, f.error) for f in result.failures] == [("pls", 1, "out of memory")]
        assert [r.fold for r in result.records] == [0]
        assert (tmp_path / RUNS_DIR / "pls" / "fold-0" / METRICS_FILE).exists()

    def test_lambda_arms(self, tmp_path, frames, monkeypatch):
        """Test the sweep builds one pseudo-label arm per lambda, in ascending order."""
        seen = []

        def record_arm(experiment, arm, frames, split, fold, out_dir):
            seen.append((arm.name, arm.config.train.supervision, arm.config.train.lambda_pls, fold))
            return []

        monkeypatch.setattr(experiments, "run_fold", record_arm)
        ablate_lambda(tiny_config(tmp_path, "train.supervision=pce"), [0.5, 0.1], frames=frames)
        assert seen == [
            ("lambda-0.1", "pls", 0.1, 0),
            ("lambda-0.1", "pls", 0.1, 1),
            ("lambda-0.5", "pls", 0.5, 0),
            ("lambda-0.5", "pls", 0.5, 1),
        ]

    def test_reference_always_included(self, tmp_path, frames, monkeypatch):
        """Test the pCE baseline is added and pseudo-label arms use both decoders."""
        arms = {}

        def record_arm(experiment, arm, frames, split, fold, out_dir):
            arms[arm.name] = arm.decoders
            return []

        monkeypatch.setattr(experiments, "run_fold", record_arm)
        ablate_supervision(tiny_config(tmp_path), ["pls", "cr"], frames=frames)
        assert list(arms) == ["pce", "cr", "pls"]
        assert arms["pls"] == ("main", "aux")
        assert arms["pce"] == ("main",)
        assert json.loads((tmp_path / RUNS_DIR / "cr" / CONFIG_FILE).read_text())["train"]["supervision"] == "cr"


@pytest.mark.slow
class TestEndToEnd:
    """Small real training runs."""

    def test_cv_synthesizes_and_evaluates(self, tmp_path):
        """Test cross-validation on a generated dataset writes per-fold metrics."""
        config = tiny_config(tmp_path)
        result = run_cv(config)
        assert result.ok
        assert (tmp_path / "data" / "patient_001").is_dir()
        assert json.loads((tmp_path / CONFIG_FILE).read_text()) == json.loads(config.to_json())
        assert [r.fold for r in result.records] == [0, 1]
        assert sum(len(r.cases) for r in result.records) == 8
        case_ids = {c.case_id for r in result.records for c in r.cases}
        assert len(case_ids) == 8
        for fold in (0, 1):
            run_dir = tmp_path / RUNS_DIR / "pls" / f"fold-{fold}"
            assert (run_dir / "history.jsonl").exists()
            assert read_metrics(run_dir / METRICS_FILE)[0].config_hash == config.config_hash
        assert collect_records(tmp_path) == result.records

    def test_cv_deterministic(self, tmp_path, frames):
        """Test two runs with the same config give identical metrics."""
        first = run_cv(tiny_config(tmp_path / "a"), frames=frames)
        second = run_cv(tiny_config(tmp_path / "b"), frames=frames)
        assert [r.cases for r in first.records] == [r.cases for r in second.records]

    def test_supervision_ablation_controlled(self, tmp_path, frames):
        """Test all arms share folds and settings and pseudo-label arms report both decoders."""
        result = ablate_supervision(tiny_config(tmp_path), ["pce", "pls"], frames=frames)
        assert result.ok
        assert {(r.arm, r.decoder) for r in result.records} == {("pce", "main"), ("pls", "main"), ("pls", "aux")}
        assert len({r.comparison_hash for r in result.records}) == 1
        assert len({r.folds_digest for r in result.records}) == 1

    def test_validation_split(self, tmp_path, frames):
        """Test a validation fraction keeps a held-out patient for model selection."""
        result = run_cv(tiny_config(tmp_path, "val_fraction=0.5", "eval_checkpoint=best"), frames=frames)
        assert result.ok
        assert (tmp_path / RUNS_DIR / "pls" / "fold-0" / "best").is_dir()

    def test_full_supervision_ablation(self, tmp_path, frames):
        """Test all five strategies run and report one row per arm and decoder under one comparison hash."""
        result = ablate_supervision(tiny_config(tmp_path), list(STRATEGIES), frames=frames)
        assert result.ok
        check_controlled(result.records)
        assert len({r.comparison_hash for r in result.records}) == 1
        rows = build_rows(result.records)
        assert [(r.arm, r.decoder) for r in rows] == [
            ("pce", "main"),
            ("cr", "main"),
            ("cps", "main"),
            ("pls-fixed", "main"),
            ("pls-fixed", "aux"),
            ("pls", "main"),
            ("pls", "aux"),
        ]
        assert all(r.table.n_cases == 8 for r in rows)
        assert rows[0].vs_reference is None
        assert all(r.vs_reference is not None for r in rows[1:])

    def test_full_lambda_sweep(self, tmp_path, frames):
        """Test the six default lambdas each give one pseudo-label row and a sweep table line."""
        result = ablate_lambda(tiny_config(tmp_path), frames=frames)
        assert result.ok
        check_controlled(result.records)
        rows = build_rows(result.records)
        assert [r.lambda_pls for r in rows] == list(DEFAULT_LAMBDAS)
        assert {r.decoder for r in rows} == {"main"}

        written = emit_report(result.records, ["csv"], tmp_path)
        assert [p.name for p in written] == ["report.csv", LAMBDA_SWEEP_CSV]
        assert len((tmp_path / "report.csv").read_text().splitlines()) == 1 + len(DEFAULT_LAMBDAS)
        assert len((tmp_path / LAMBDA_SWEEP_CSV).read_text().splitlines()) == 1 + len(DEFAULT_LAMBDAS)


def main_decoder_dsc(records):
    """Mean foreground DSC per arm over every main-decoder test case."""
    per_arm = {}
    for record in records:
        if record.decoder == "main":
            per_arm.setdefault(record.arm, []).extend(c.mean_dsc for c in record.cases)
    return {arm: float(np.mean(scores)) for arm, scores in per_arm.items()}


@pytest.mark.slow
class TestMethodEffect:
    """Desk-scale comparison of pseudo-label supervision against scribbles alone."""

    def test_pls_beats_pce(self, tmp_path):
        """Test two-fold CV on 20 synthetic patients: pls >= 0.80 mean DSC and >= 0.03 above pce."""
        config = load_config(overrides=["folds=2", "train.progress=false", f'output_dir="{tmp_path}"'])
        result = ablate_supervision(config, ["pce", "pls"])
        assert result.ok
        scores = main_decoder_dsc(result.records)
        assert scores["pls"] >= 0.80
        assert scores["pls"] - scores["pce"] >= 0.03
