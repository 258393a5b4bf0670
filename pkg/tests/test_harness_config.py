"""Tests for experiment configuration loading and hashing."""

import json

import pytest

from scribble_seg.common.errors import ConfigError
from scribble_seg.harness.config import (
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_value,
    read_config_file,
)


class TestExperimentConfig:
    """Tests for ExperimentConfig."""

    def test_defaults(self):
        """Test the desk-scale defaults."""
        config = ExperimentConfig()
        assert config.folds == 5
        assert config.data.synthetic
        assert (config.model.levels, config.model.base_width) == (3, 8)
        assert config.train.supervision == "pls"
        assert config.report_formats == ("json", "csv", "md")

    def test_dict_round_trip(self):
        """Test to_dict/from_dict reproduce the same config."""
        config = load_config(overrides=["train.lambda_pls=0.3", "synth.shape=[4,32,32]", "folds=3"])
        again = ExperimentConfig.from_dict(json.loads(config.to_json()))
        assert again == config
        assert again.config_hash == config.config_hash

    def test_partial_model_keeps_desk_defaults(self):
        """Test a model section only overrides the keys it names."""
        config = ExperimentConfig.from_dict({"model": {"dropout_rate": 0.2}})
        assert (config.model.levels, config.model.base_width, config.model.dropout_rate) == (3, 8, 0.2)

    @pytest.mark.parametrize(
        "data, match",
        [
            ({"folds": 1}, "folds"),
            ({"report_formats": ["xml"]}, "report format"),
            ({"val_fraction": 1.0}, "val_fraction"),
            ({"eval_checkpoint": "last"}, "eval_checkpoint"),
            ({"workers": 0}, "workers"),
            ({"data": {"root": "/nonexistent/scribble-data"}}, "data.root"),
            ({"data": {"scribble_source": "boxes"}}, "scribble_source"),
            ({"train": {"patch_size": [30, 30]}}, "divisible"),
            ({"train": {"lambda_pls": -1}}, "lambda_pls"),
            ({"train": {"learning_rate": 0.1}}, "unknown config key"),
            ({"colour": "blue"}, "unknown config key"),
            ({"train": 3}, "table"),
        ],
    )
    def test_invalid(self, data, match):
        """Test invalid values and unknown keys are configuration errors."""
        with pytest.raises(ConfigError, match=match):
            ExperimentConfig.from_dict(data)

    def test_existing_root(self, tmp_path):
        """Test a real directory is accepted as the dataset root."""
        config = ExperimentConfig.from_dict({"data": {"root": str(tmp_path)}})
        assert not config.data.synthetic


class TestHashes:
    """Tests for config_hash and comparison_hash."""

    def test_execution_keys_ignored(self):
        """Test output location, workers and progress do not change the hash."""
        base = load_config()
        moved = load_config(overrides=['output_dir="elsewhere"', "workers=4", "train.progress=false"])
        assert base.config_hash == moved.config_hash

    def test_result_keys_change_hash(self):
        """Test a setting that changes results changes the hash."""
        assert load_config().config_hash != load_config(overrides=["train.base_lr=0.01"]).config_hash

    def test_ablated_keys_share_comparison_hash(self):
        """Test arms that differ only in ablated keys are comparable."""
        pls = load_config()
        pce = load_config(overrides=["train.supervision=pce", "train.lambda_pls=0.1", "data.scribble_source=dense"])
        assert pls.config_hash != pce.config_hash
        assert pls.comparison_hash == pce.comparison_hash

    def test_shared_keys_break_comparison(self):
        """Test a difference outside the ablated keys breaks comparability."""
        assert load_config().comparison_hash != load_config(overrides=["train.max_iterations=10"]).comparison_hash


class TestOverrides:
    """Tests for parse_value and apply_overrides."""

    @pytest.mark.parametrize(
        "text, value",
        [("0.5", 0.5), ("3", 3), ("true", True), ("[1, 2]", [1, 2]), ('"x"', "x"), ("pce", "pce")],
    )
    def test_parse_value(self, text, value):
        """Test JSON literals parse and anything else stays a string."""
        assert parse_value(text) == value

    def test_nested(self):
        """Test dotted keys create nested tables."""
        data = apply_overrides({"train": {"seed": 1}}, ["train.seed=2", "model.levels=4"])
        assert data == {"train": {"seed": 2}, "model": {"levels": 4}}

    def test_input_not_mutated(self):
        """Test the original dict is left alone."""
        data = {"train": {"seed": 1}}
        apply_overrides(data, ["train.seed=2"])
        assert data == {"train": {"seed": 1}}

    @pytest.mark.parametrize("override", ["train.seed", "=3"])
    def test_malformed(self, override):
        """Test overrides without a key or value separator."""
        with pytest.raises(ConfigError, match="override"):
            apply_overrides({}, [override])

    def test_not_a_table(self):
        """Test descending into a scalar."""
        with pytest.raises(ConfigError, match="not a table"):
            apply_overrides({"folds": 5}, ["folds.x=1"])


class TestLoadConfig:
    """Tests for read_config_file and load_config."""

    def test_json_file(self, tmp_path):
        """Test a JSON config with an override on top."""
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"folds": 3, "train": {"max_iterations": 50}}))
        config = load_config(path, overrides=["train.max_iterations=60"])
        assert config.folds == 3
        assert config.train.max_iterations == 60

    def test_toml_file(self, tmp_path):
        """Test a TOML config."""
        path = tmp_path / "exp.toml"
        path.write_text('folds = 4\n\n[train]\nsupervision = "cps"\npatch_size = [32, 32]\n\n[synth]\nn_patients = 6\n')
        config = load_config(path)
        assert config.folds == 4
        assert config.train.supervision == "cps"
        assert config.train.patch_size == (32, 32)
        assert config.synth.n_patients == 6

    def test_seed_shorthand(self):
        """Test --seed sets all three seeds."""
        config = load_config(seed=9)
        assert (config.synth.seed, config.folds_seed, config.train.seed) == (9, 9, 9)

    def test_missing_file(self, tmp_path):
        """Test a missing config file."""
        with pytest.raises(ConfigError, match="not found"):
            read_config_file(tmp_path / "missing.json")

    @pytest.mark.parametrize("name, text", [("bad.json", "{oops"), ("bad.toml", "folds = = 3")])
    def test_unparsable(self, tmp_path, name, text):
        """Test corrupt JSON and TOML files."""
        path = tmp_path / name
        path.write_text(text)
        with pytest.raises(ConfigError, match="cannot parse"):
            read_config_file(path)

    def test_root_must_be_object(self, tmp_path):
        """Test a JSON file holding a list."""
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            load_config(path)
