"""Volume overlap and boundary-distance metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from scribble_seg.common.errors import ValidationError

# 6-connected neighbourhood in 3D
FACE_NEIGHBOURS = ndimage.generate_binary_structure(3, 1)

HD_PERCENTILE = 95.0


@dataclass
class BinaryVolume:
    """A 3D boolean mask with voxel spacing in mm."""

    mask: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 3:
            raise ValidationError(f"binary volume must be 3D, got shape {self.mask.shape}")
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValidationError(f"spacing must be three positive values, got {self.spacing}")

    @property
    def empty(self) -> bool:
        return not self.mask.any()

    @property
    def diagonal_mm(self) -> float:
        """Length of the volume's bounding-box diagonal, in mm."""
        return math.sqrt(sum((n * s) ** 2 for n, s in zip(self.mask.shape, self.spacing)))


def _check_same_grid(pred: BinaryVolume, gt: BinaryVolume, check_spacing: bool) -> None:
    if pred.mask.shape != gt.mask.shape:
        raise ValidationError(f"shape mismatch: {pred.mask.shape} vs {gt.mask.shape}")
    if check_spacing and not np.allclose(pred.spacing, gt.spacing, rtol=0, atol=1e-9):
        raise ValidationError(f"spacing mismatch: {pred.spacing} vs {gt.spacing}")


def dsc3d(pred: BinaryVolume, gt: BinaryVolume) -> float:
    """Dice coefficient ``2|P & G| / (|P| + |G|)``; 1.0 if both are empty."""
    _check_same_grid(pred, gt, check_spacing=False)
    p = int(pred.mask.sum())
    g = int(gt.mask.sum())
    if p + g == 0:
        return 1.0
    return 2.0 * int(np.logical_and(pred.mask, gt.mask).sum()) / (p + g)


def extract_surface(vol: BinaryVolume) -> np.ndarray:
    """Foreground voxels with at least one background or out-of-bounds face neighbour.

    Returns:
        Integer voxel coordinates ``[N, 3]`` in C order; ``N = 0`` for an empty mask
    """
    interior = ndimage.binary_erosion(vol.mask, structure=FACE_NEIGHBOURS, border_value=0)
    return np.argwhere(vol.mask & ~interior)


def surface_distances(pred: BinaryVolume, gt: BinaryVolume) -> np.ndarray:
    """Both directed surface-distance sets (pred->gt then gt->pred), in mm.

    Both masks must be non-empty.
    """
    spacing = np.asarray(pred.spacing, dtype=np.float64)
    pred_points = extract_surface(pred) * spacing
    gt_points = extract_surface(gt) * spacing
    to_gt, _ = cKDTree(gt_points).query(pred_points, k=1)
    to_pred, _ = cKDTree(pred_points).query(gt_points, k=1)
    return np.concatenate([to_gt, to_pred])


def hd95(pred: BinaryVolume, gt: BinaryVolume) -> float:
    """95th percentile (linear interpolation) of the symmetric surface distances, in mm.

    Two empty masks give 0. If exactly one is empty the result is the volume
    diagonal in mm; callers flag that case (see ``evaluate_case``).

    Raises:
        ValidationError: If shapes or spacings differ
    """
    _check_same_grid(pred, gt, check_spacing=True)
    if pred.empty and gt.empty:
        return 0.0
    if pred.empty or gt.empty:
        return pred.diagonal_mm
    return float(np.percentile(surface_distances(pred, gt), HD_PERCENTILE))
