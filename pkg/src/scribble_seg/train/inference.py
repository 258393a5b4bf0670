"""Slice-by-slice prediction of whole volumes."""

from __future__ import annotations

import numpy as np
import torch

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.dataset import ImageVolume
from scribble_seg.data.transforms import normalize_slice, resize_image, resize_labels
from scribble_seg.model.network import DualBranchUNet, forward

DECODER_INDEX = {"main": 0, "aux": 1}


def infer_volume(
    params: DualBranchUNet,
    volume: ImageVolume,
    decoder: str = "main",
    input_size: tuple[int, int] | None = None,
) -> np.ndarray:
    """Label every slice of a volume with one decoder and stack the results.

    Each slice is normalized to [0, 1], resized to ``input_size`` (default:
    the slice's own size), passed through the network in eval mode, reduced
    with argmax and resized back with nearest-neighbor. No post-processing.

    Returns:
        uint8 label volume with the input's shape

    Raises:
        ValidationError: If the decoder name is unknown or the size is incompatible with the network
    """
    if decoder not in DECODER_INDEX:
        raise ValidationError(f"decoder must be 'main' or 'aux', got {decoder!r}")

    _, h, w = volume.voxels.shape
    size = tuple(input_size) if input_size is not None else (h, w)
    multiple = params.config.size_multiple
    if size[0] % multiple or size[1] % multiple:
        raise ValidationError(f"network input {size} is not divisible by {multiple}")

    dtype = next(params.parameters()).dtype
    slices = [resize_image(normalize_slice(s), size) for s in volume.voxels]
    batch = torch.from_numpy(np.stack(slices)[:, None]).to(dtype)

    with torch.no_grad():
        probs = forward(params, batch, mode="eval")[DECODER_INDEX[decoder]]
    labels = torch.argmax(probs, dim=1).numpy().astype(np.uint8)

    return np.stack([resize_labels(s, (h, w)) for s in labels])
