"""Checkpoint directories: one container array per tensor plus a manifest."""

from __future__ import annotations

import json
import logging
import os
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from packaging.version import InvalidVersion, Version

from scribble_seg.common.container import read_array, write_array
from scribble_seg.common.errors import FormatError
from scribble_seg.model.config import ModelConfig
from scribble_seg.model.network import DualBranchUNet

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
MANIFEST = "manifest.json"
TENSOR_DIR = "tensors"


@dataclass
class CheckpointInfo:
    """Contents of a checkpoint manifest."""

    format_version: str
    iteration: int
    config_hash: str
    model_config: ModelConfig
    tensors: list[dict]


def save_checkpoint(
    path: Path | str,
    params: DualBranchUNet,
    iteration: int,
    config_hash: str | None = None,
) -> Path:
    """Write a checkpoint directory atomically (build in a temp dir, then rename).

    Returns:
        The checkpoint directory
    """
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    if tmp.exists():
        shutil.rmtree(tmp)

    tensors = []
    for name, tensor in params.state_dict().items():
        array = tensor.detach().cpu().to(torch.float32).numpy()
        write_array(tmp / TENSOR_DIR / f"{name}.bin", array, "f32")
        tensors.append({"name": name, "shape": list(array.shape)})

    manifest = {
        "format_version": FORMAT_VERSION,
        "iteration": int(iteration),
        "config_hash": config_hash or params.config.digest,
        "model_config": params.config.to_dict(),
        "tensors": tensors,
    }
    with open(tmp / MANIFEST, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    if path.exists():
        old = path.with_name(f".{path.name}.old-{os.getpid()}")
        os.replace(path, old)
        os.replace(tmp, path)
        shutil.rmtree(old)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        os.replace(tmp, path)

    logger.info("saved checkpoint %s (iteration %d)", path, iteration)
    return path


def read_manifest(path: Path | str) -> CheckpointInfo:
    """Parse and version-check a checkpoint manifest.

    Raises:
        FormatError: If the manifest is missing, malformed, or from an incompatible format version
    """
    manifest_path = Path(path) / MANIFEST
    try:
        with open(manifest_path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise FormatError(manifest_path, "checkpoint manifest not found") from None
    except json.JSONDecodeError as e:
        raise FormatError(manifest_path, f"manifest is not valid JSON ({e})") from None

    try:
        version = Version(str(data.get("format_version", "")))
    except InvalidVersion:
        raise FormatError(manifest_path, f"invalid format_version {data.get('format_version')!r}") from None
    if version.major != Version(FORMAT_VERSION).major:
        raise FormatError(manifest_path, f"unsupported checkpoint format {version} (reader supports {FORMAT_VERSION})")

    try:
        return CheckpointInfo(
            format_version=str(version),
            iteration=int(data["iteration"]),
            config_hash=str(data["config_hash"]),
            model_config=ModelConfig.from_dict(data["model_config"]),
            tensors=list(data["tensors"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(manifest_path, f"incomplete manifest ({e})") from None


def load_checkpoint(path: Path | str, dtype: torch.dtype = torch.float32) -> tuple[DualBranchUNet, CheckpointInfo]:
    """Rebuild the network stored in a checkpoint directory.

    Raises:
        FormatError: If the manifest or any tensor file is missing or does not match the network
    """
    path = Path(path)
    info = read_manifest(path)
    params = DualBranchUNet(info.model_config).to(dtype)
    expected = params.state_dict()

    listed = {t["name"] for t in info.tensors}
    if listed != set(expected):
        raise FormatError(path / MANIFEST, "tensor list does not match the network built from model_config")

    state = {}
    for name, reference in expected.items():
        array, _ = read_array(path / TENSOR_DIR / f"{name}.bin")
        if tuple(array.shape) != tuple(reference.shape):
            raise FormatError(path / TENSOR_DIR / f"{name}.bin", f"shape {array.shape} != {tuple(reference.shape)}")
        state[name] = torch.from_numpy(np.ascontiguousarray(array)).to(dtype)
    params.load_state_dict(state)
    return params, info
