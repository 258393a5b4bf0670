"""Intensity normalization, resizing and training-time augmentation."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import UNLABELED, AugmentConfig
from scribble_seg.data.dataset import DenseLabel, ImageVolume, ScribbleMask, SliceSample


def normalize_slice(image: np.ndarray) -> np.ndarray:
    """Rescale one slice to [0, 1]; a constant slice maps to zeros."""
    image = np.asarray(image, dtype=np.float32)
    if not np.isfinite(image).all():
        raise ValidationError("image contains non-finite intensities")
    lo = image.min()
    hi = image.max()
    if hi <= lo:
        return np.zeros_like(image)
    out = (image - lo) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def normalize_intensity(volume: ImageVolume) -> ImageVolume:
    """Rescale every slice of a volume independently to [0, 1].

    Raises:
        ValidationError: If the volume holds NaN or infinite values
    """
    voxels = np.stack([normalize_slice(s) for s in volume.voxels])
    return ImageVolume(voxels=voxels, spacing=volume.spacing, patient_id=volume.patient_id, frame_id=volume.frame_id)


def resize_image(image: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resample of a 2D image; corner pixel centers stay aligned."""
    if image.shape == tuple(target):
        return image.copy()
    zoom = (target[0] / image.shape[0], target[1] / image.shape[1])
    out = ndimage.zoom(image, zoom, order=1, mode="nearest")
    return _fit(out, target)


def resize_labels(labels: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a 2D label map; no new values appear."""
    if labels.shape == tuple(target):
        return labels.copy()
    zoom = (target[0] / labels.shape[0], target[1] / labels.shape[1])
    out = ndimage.zoom(labels, zoom, order=0, mode="nearest")
    return _fit(out, target)


def _fit(array: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    # ndimage.zoom rounds the output shape; pad or crop the odd pixel by edge replication
    if array.shape == tuple(target):
        return array
    pad = [(0, max(0, t - s)) for s, t in zip(array.shape, target)]
    array = np.pad(array, pad, mode="edge")
    return array[: target[0], : target[1]]


def resize_sample(sample: SliceSample, target: tuple[int, int]) -> SliceSample:
    """Resize a slice sample: bilinear image, nearest-neighbor labels.

    Raises:
        ValidationError: If a target dimension is < 1
    """
    target = (int(target[0]), int(target[1]))
    if min(target) < 1:
        raise ValidationError(f"target size must be >= 1, got {target}")

    dense = None
    if sample.dense is not None:
        dense = DenseLabel(resize_labels(sample.dense.labels, target), sample.dense.num_classes)
    return SliceSample(
        image=resize_image(sample.image, target),
        scribble=ScribbleMask(resize_labels(sample.scribble.labels, target), sample.scribble.num_classes),
        dense=dense,
        provenance=sample.provenance,
    )


def _map_arrays(sample: SliceSample, fn_image, fn_labels) -> SliceSample:
    dense = None
    if sample.dense is not None:
        dense = DenseLabel(fn_labels(sample.dense.labels, 0), sample.dense.num_classes)
    return SliceSample(
        image=fn_image(sample.image),
        scribble=ScribbleMask(fn_labels(sample.scribble.labels, UNLABELED), sample.scribble.num_classes),
        dense=dense,
        provenance=sample.provenance,
    )


def augment(sample: SliceSample, rng: np.random.Generator, config: AugmentConfig | None = None) -> SliceSample:
    """Randomly rotate, flip and add noise to a slice sample.

    Each transform fires with its configured probability. Rotations are
    multiples of 90 degrees unless ``config.free_rotation`` is set. Label maps
    follow the image geometrically; noise touches the image only. The random
    draws happen in a fixed order so a seeded generator gives identical output.
    """
    config = config or AugmentConfig()

    if rng.random() < config.rotate_prob:
        if config.free_rotation:
            angle = float(rng.uniform(-config.free_rotation_max_deg, config.free_rotation_max_deg))
            sample = _map_arrays(
                sample,
                lambda a: ndimage.rotate(a, angle, reshape=False, order=1, mode="nearest"),
                lambda a, fill: ndimage.rotate(a, angle, reshape=False, order=0, mode="constant", cval=fill),
            )
        else:
            k = int(rng.integers(1, 4))
            sample = _map_arrays(sample, lambda a: np.rot90(a, k).copy(), lambda a, _: np.rot90(a, k).copy())

    if rng.random() < config.flip_prob:
        axis = int(rng.integers(0, 2))
        sample = _map_arrays(sample, lambda a: np.flip(a, axis).copy(), lambda a, _: np.flip(a, axis).copy())

    if rng.random() < config.noise_prob:
        sigma = float(rng.uniform(0.0, config.noise_sigma_max))
        noise = rng.normal(0.0, sigma, size=sample.image.shape)
        image = np.clip(sample.image + noise, 0.0, 1.0).astype(sample.image.dtype)
        sample = SliceSample(image=image, scribble=sample.scribble, dense=sample.dense, provenance=sample.provenance)

    return sample
