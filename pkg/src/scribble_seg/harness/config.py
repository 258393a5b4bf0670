"""Experiment configuration: loading, overrides and hashing."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomlkit
from tomlkit.exceptions import ParseError

from scribble_seg.common.config import canonical_json, dataclass_from_dict, dataclass_to_dict, stable_hash
from scribble_seg.common.errors import ConfigError
from scribble_seg.model.config import ModelConfig
from scribble_seg.train.config import TrainConfig

# Lambda values of the sensitivity sweep
DEFAULT_LAMBDAS = (0.01, 0.1, 0.2, 0.3, 0.5, 1.0)

# Supervision ablation arms, in report order; "fullsup" is opt-in only
STRATEGIES = ("pce", "cr", "cps", "pls-fixed", "pls")
OPTIONAL_STRATEGIES = ("fullsup",)
REFERENCE_STRATEGY = "pce"

SCRIBBLE_SOURCES = ("scribble", "dense")
EVAL_CHECKPOINTS = ("final", "best")
REPORT_FORMATS = ("json", "csv", "md")

# Keys that an ablation is allowed to vary between its arms
ABLATED_KEYS = (
    ("train", "supervision"),
    ("train", "alpha_mode"),
    ("train", "alpha_fixed"),
    ("train", "lambda_pls"),
    ("train", "eval_decoder"),
    ("data", "scribble_source"),
)

# Keys that only affect where and how fast a run executes, never its results
EXECUTION_KEYS = (
    ("output_dir",),
    ("workers",),
    ("train", "progress"),
)


@dataclass
class DataConfig:
    """Where the dataset comes from.

    An empty ``root`` means a synthetic dataset is generated under the output
    directory from the ``synth`` section.
    """

    root: str = ""
    scribble_source: str = "scribble"

    def __post_init__(self):
        if self.scribble_source not in SCRIBBLE_SOURCES:
            raise ValueError(f"scribble_source must be one of {SCRIBBLE_SOURCES}, got {self.scribble_source!r}")

    @property
    def synthetic(self) -> bool:
        return not self.root


@dataclass
class SynthConfig:
    n_patients: int = 20
    shape: tuple[int, int, int] = (8, 64, 64)
    seed: int = 0
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.n_patients < 1:
            raise ValueError(f"n_patients must be >= 1, got {self.n_patients}")
        if len(self.shape) != 3:
            raise ValueError(f"shape must be [D, H, W], got {list(self.shape)}")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    data: DataConfig = field(default_factory=DataConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    model: ModelConfig = field(default_factory=ModelConfig.desk_scale)
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 5
    folds_seed: int = 0
    output_dir: str = "out"
    report_formats: tuple[str, ...] = REPORT_FORMATS
    val_fraction: float = 0.0
    eval_checkpoint: str = "final"
    workers: int = 1

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        unknown = sorted(set(self.report_formats) - set(REPORT_FORMATS))
        if unknown:
            raise ConfigError(f"unknown report format(s): {', '.join(unknown)}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if self.eval_checkpoint not in EVAL_CHECKPOINTS:
            raise ConfigError(f"eval_checkpoint must be one of {EVAL_CHECKPOINTS}, got {self.eval_checkpoint!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.data.root and not Path(self.data.root).is_dir():
            raise ConfigError(f"data.root does not exist: {self.data.root}")
        multiple = self.model.size_multiple
        if any(n % multiple for n in self.train.patch_size):
            raise ConfigError(
                f"train.patch_size {list(self.train.patch_size)} must be divisible by {multiple} "
                f"for a {self.model.levels}-level network"
            )

    @classmethod
    def from_dict(cls, data: dict | None) -> "ExperimentConfig":
        data = dict(data or {})
        sections = {}
        for name in ("data", "synth", "model", "train"):
            value = data.pop(name, None)
            if value is not None and not isinstance(value, dict):
                raise ConfigError(f"[{name}] must be a table/object")
            sections[name] = value or {}

        model = {**ModelConfig.desk_scale().to_dict(), **sections["model"]}
        top = dataclass_from_dict(_TopLevel, data, "experiment")
        try:
            return cls(
                data=dataclass_from_dict(DataConfig, sections["data"], "data"),
                synth=dataclass_from_dict(SynthConfig, sections["synth"], "synth"),
                model=ModelConfig.from_dict(model),
                train=TrainConfig.from_dict(sections["train"]),
                **{name: getattr(top, name) for name in _TopLevel.__dataclass_fields__},
            )
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {e}") from e

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @property
    def config_hash(self) -> str:
        """Hash of every setting that can change a result."""
        return stable_hash(_without(self.to_dict(), EXECUTION_KEYS))

    @property
    def comparison_hash(self) -> str:
        """Hash of the settings every arm of one ablation must share."""
        return stable_hash(_without(self.to_dict(), EXECUTION_KEYS + ABLATED_KEYS))


@dataclass
class _TopLevel:
    folds: int = 5
    folds_seed: int = 0
    output_dir: str = "out"
    report_formats: tuple[str, ...] = REPORT_FORMATS
    val_fraction: float = 0.0
    eval_checkpoint: str = "final"
    workers: int = 1


def _without(data: dict, paths: tuple[tuple[str, ...], ...]) -> dict:
    data = copy.deepcopy(data)
    for path in paths:
        node = data
        for key in path[:-1]:
            node = node.get(key, {})
        node.pop(path[-1], None)
    return data


def parse_value(text: str):
    """Parse an override value as a JSON literal, falling back to the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides to a nested config dict.

    Raises:
        ConfigError: If an override is not of the form ``key=value``
    """
    data = copy.deepcopy(data)
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override must look like key.sub=value, got {override!r}")
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"cannot set {key}: {part} is not a table")
            node = child
        node[parts[-1]] = parse_value(value.strip())
    return data


def read_config_file(path: Path | str) -> dict:
    """Read a JSON or TOML config file into a plain dict.

    Raises:
        ConfigError: If the file is missing or cannot be parsed
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None

    try:
        if path.suffix == ".toml":
            return tomlkit.parse(text).unwrap()
        return json.loads(text)
    except (json.JSONDecodeError, ParseError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None


def load_config(
    path: Path | str | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
) -> ExperimentConfig:
    """Resolve an experiment config from a file, ``--set`` overrides and ``--seed``.

    Args:
        path: JSON or TOML config file; defaults apply when omitted
        overrides: ``dotted.key=value`` strings, applied in order
        seed: Shorthand setting ``synth.seed``, ``folds_seed`` and ``train.seed``

    Raises:
        ConfigError: If the file, an override or a resolved value is invalid
    """
    data = read_config_file(path) if path is not None else {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    data = apply_overrides(data, overrides or [])
    if seed is not None:
        data = apply_overrides(data, [f"synth.seed={seed}", f"folds_seed={seed}", f"train.seed={seed}"])
    return ExperimentConfig.from_dict(data)
