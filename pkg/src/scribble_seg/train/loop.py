"""The training loop: sample, augment, forward, joint loss, backward, SGD."""

from __future__ import annotations

import copy
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from tqdm import tqdm

from scribble_seg.common.errors import NumericalError, ValidationError
from scribble_seg.data.config import CLASS_NAMES, FOREGROUND
from scribble_seg.data.dataset import DenseLabel, ImageVolume, SliceSample
from scribble_seg.data.transforms import augment, resize_sample
from scribble_seg.losses.functional import sample_alpha, total_loss
from scribble_seg.metrics.overlap import BinaryVolume, dsc3d
from scribble_seg.model.checkpoint import save_checkpoint
from scribble_seg.model.config import ModelConfig
from scribble_seg.model.network import DualBranchUNet, backward, forward, init_params
from scribble_seg.train.config import TrainConfig
from scribble_seg.train.inference import infer_volume
from scribble_seg.train.optim import OptimState, poly_lr, sgd_step

logger = logging.getLogger(__name__)

HISTORY_FILE = "history.jsonl"
FINAL_CHECKPOINT = "final"
BEST_CHECKPOINT = "best"


@dataclass
class TrainResult:
    """Outcome of one training run."""

    final: DualBranchUNet
    best: DualBranchUNet
    history: list[dict] = field(default_factory=list)
    validation: list[dict] = field(default_factory=list)
    best_score: float | None = None
    best_iteration: int = 0


@contextmanager
def deterministic_execution(threads: int):
    """Pin torch to ``threads`` threads and deterministic kernels for the duration."""
    previous_threads = torch.get_num_threads()
    previous_deterministic = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)
    try:
        yield
    finally:
        torch.set_num_threads(previous_threads)
        torch.use_deterministic_algorithms(previous_deterministic)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator, torch.Generator]:
    # independent streams: batch sampling, augmentation, alpha, dropout
    batch_ss, augment_ss, alpha_ss, dropout_ss = np.random.SeedSequence(seed).spawn(4)
    dropout = torch.Generator().manual_seed(int(dropout_ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)))
    return (
        np.random.default_rng(batch_ss),
        np.random.default_rng(augment_ss),
        np.random.default_rng(alpha_ss),
        dropout,
    )


def _make_batch(
    samples: list[SliceSample],
    indices: np.ndarray,
    rng: np.random.Generator,
    config: TrainConfig,
    dtype: torch.dtype,
) -> tuple[torch.Tensor, torch.Tensor]:
    images, scribbles = [], []
    for index in indices:
        sample = augment(samples[int(index)], rng, config.augment)
        sample = resize_sample(sample, config.patch_size)
        images.append(sample.image)
        scribbles.append(sample.scribble.labels)
    batch = torch.from_numpy(np.stack(images)[:, None].astype(np.float64)).to(dtype)
    labels = torch.from_numpy(np.stack(scribbles).astype(np.int64))
    return batch, labels


def validation_dsc(
    params: DualBranchUNet,
    volumes: list[tuple[ImageVolume, DenseLabel]],
    decoder: str,
    input_size: tuple[int, int],
) -> float:
    """Mean foreground DSC over validation volumes."""
    scores = []
    for volume, dense in volumes:
        pred = infer_volume(params, volume, decoder=decoder, input_size=input_size)
        for name in FOREGROUND:
            cls = CLASS_NAMES.index(name)
            scores.append(dsc3d(BinaryVolume(pred == cls, volume.spacing), BinaryVolume(dense.labels == cls, volume.spacing)))
    return float(np.mean(scores))


def write_history(path: Path | str, history: list[dict]) -> None:
    with open(path, "w") as f:
        for record in history:
            f.write(json.dumps(record) + "\n")


def train(
    config: TrainConfig,
    train_samples: list[SliceSample],
    val_volumes: list[tuple[ImageVolume, DenseLabel]] | None = None,
    model_config: ModelConfig | None = None,
    out_dir: Path | str | None = None,
    config_hash: str | None = None,
    dtype: torch.dtype = torch.float32,
) -> TrainResult:
    """Train the dual-branch network on scribbled slices.

    Each iteration draws ``batch_size`` slices uniformly with replacement,
    augments and resizes them, runs both decoders in train mode, draws alpha,
    evaluates the strategy's joint loss, backpropagates and takes one SGD step
    at the poly-decayed learning rate. Validation (mean foreground DSC with
    ``eval_decoder``) runs every ``validation_interval`` iterations.

    With ``out_dir`` set, writes ``history.jsonl`` and the ``final`` and
    ``best`` checkpoints there. On a non-finite loss the history so far is
    written before the error propagates.

    Args:
        config: Training settings
        train_samples: Slices with images in [0, 1]; dense labels must be stripped
        val_volumes: (volume, dense label) pairs for model selection
        model_config: Network shape (desk-scale if omitted)
        out_dir: Directory for history and checkpoints
        config_hash: Hash recorded in checkpoint manifests
        dtype: Parameter dtype

    Raises:
        ValidationError: If there are no samples or a sample carries a dense label
        NumericalError: If the loss or a gradient becomes non-finite
    """
    model_config = model_config or ModelConfig.desk_scale()
    val_volumes = val_volumes or []
    if config.max_iterations > 0 and not train_samples:
        raise ValidationError("training set is empty")
    if any(s.dense is not None for s in train_samples):
        raise ValidationError("training samples must not carry dense labels")

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    batch_rng, augment_rng, alpha_rng, dropout_rng = _streams(config.seed)
    weights = config.loss_weights()
    history: list[dict] = []
    validations: list[dict] = []

    with deterministic_execution(config.threads):
        params = init_params(model_config, config.seed, dtype=dtype)
        state = OptimState.zeros_like(params)
        best_state = copy.deepcopy(params.state_dict())
        best_score: float | None = None
        best_iteration = 0

        iterator = tqdm(
            range(config.max_iterations),
            desc=f"train[{config.supervision}]",
            disable=not config.progress,
            ncols=80,
        )
        try:
            for iteration in iterator:
                lr = poly_lr(config.base_lr, iteration, config.max_iterations, config.poly_power)
                indices = batch_rng.integers(0, len(train_samples), size=config.batch_size)
                batch, scribbles = _make_batch(train_samples, indices, augment_rng, config, dtype)

                y1, y2 = forward(params, batch, mode="train", rng=dropout_rng)
                alpha = sample_alpha(alpha_rng, config.alpha_mode, config.alpha_fixed)
                loss, diagnostics = total_loss(y1, y2, scribbles, alpha, weights, config.supervision)

                grads = backward(params, loss, iteration=iteration)
                params, state = sgd_step(params, grads, state, lr, config.momentum, config.weight_decay)

                history.append({"iter": iteration, "lr": lr, **diagnostics.to_dict()})
                if iteration % 50 == 0:
                    iterator.set_postfix(loss=f"{diagnostics.loss_total:.4f}")

                step = iteration + 1
                if val_volumes and (step % config.validation_interval == 0 or step == config.max_iterations):
                    score = validation_dsc(params, val_volumes, config.eval_decoder, config.patch_size)
                    validations.append({"iter": step, "dsc": score})
                    logger.info("iteration %d: validation DSC %.4f (%s decoder)", step, score, config.eval_decoder)
                    if best_score is None or score > best_score:
                        best_score = score
                        best_iteration = step
                        best_state = copy.deepcopy(params.state_dict())
        except NumericalError:
            if out is not None:
                write_history(out / HISTORY_FILE, history)
            raise

    if best_score is None:
        best_state = params.state_dict()
        best_iteration = state.iteration

    best = DualBranchUNet(model_config).to(dtype)
    best.load_state_dict(best_state)

    if out is not None:
        write_history(out / HISTORY_FILE, history)
        save_checkpoint(out / FINAL_CHECKPOINT, params, state.iteration, config_hash)
        save_checkpoint(out / BEST_CHECKPOINT, best, best_iteration, config_hash)

    return TrainResult(
        final=params,
        best=best,
        history=history,
        validation=validations,
        best_score=best_score,
        best_iteration=best_iteration,
    )
