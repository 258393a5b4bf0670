"""Dataset types and the on-disk dataset layout.

A dataset root holds one directory per patient::

    root/patient_<id>/frame_<id>_image.bin     + .json   (f32, [D, H, W], spacing_mm)
    root/patient_<id>/frame_<id>_label.bin     + .json   (u8 dense label, optional)
    root/patient_<id>/frame_<id>_scribble.bin  + .json   (u8, UNLABELED = 255)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scribble_seg.common.container import read_array, write_array
from scribble_seg.common.errors import FormatError, ValidationError
from scribble_seg.data.config import NUM_CLASSES, UNLABELED

PATIENT_DIR_RE = re.compile(r"^patient_(?P<patient>[A-Za-z0-9-]+)$")
FRAME_FILE_RE = re.compile(r"^frame_(?P<frame>[A-Za-z0-9-]+)_(?P<kind>image|label|scribble)\.bin$")


@dataclass
class ImageVolume:
    """One scan: intensities indexed [slice, row, col] plus voxel spacing in mm."""

    voxels: np.ndarray
    spacing: tuple[float, float, float]
    patient_id: str
    frame_id: str

    def __post_init__(self):
        if self.voxels.ndim != 3 or min(self.voxels.shape) < 1:
            raise ValidationError(f"volume must be 3D with non-empty axes, got shape {self.voxels.shape}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValidationError(f"spacing must be three positive values, got {self.spacing}")
        if not np.isfinite(self.voxels).all():
            raise ValidationError(f"volume {self.patient_id}/{self.frame_id} contains non-finite intensities")

    @property
    def key(self) -> tuple[str, str]:
        return (self.patient_id, self.frame_id)


@dataclass
class ScribbleMask:
    """Sparse labels: class ids in [0, C) or the UNLABELED sentinel."""

    labels: np.ndarray
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        check_label_values(self.labels, self.num_classes, allow_unlabeled=True)

    @property
    def labeled(self) -> np.ndarray:
        """Boolean mask of the annotated pixel set."""
        return self.labels != UNLABELED


@dataclass
class DenseLabel:
    """Dense labels: a class id in [0, C) at every pixel."""

    labels: np.ndarray
    num_classes: int = NUM_CLASSES

    def __post_init__(self):
        check_label_values(self.labels, self.num_classes, allow_unlabeled=False)


@dataclass
class SliceSample:
    """One 2D training/evaluation slice."""

    image: np.ndarray
    scribble: ScribbleMask
    dense: DenseLabel | None = None
    provenance: tuple[str, str, int] = ("", "", 0)

    def __post_init__(self):
        if self.image.ndim != 2:
            raise ValidationError(f"slice image must be 2D, got shape {self.image.shape}")
        if self.scribble.labels.shape != self.image.shape:
            raise ValidationError(
                f"scribble shape {self.scribble.labels.shape} != image shape {self.image.shape}"
            )
        if self.dense is not None and self.dense.labels.shape != self.image.shape:
            raise ValidationError(f"dense shape {self.dense.labels.shape} != image shape {self.image.shape}")

    def without_dense(self) -> "SliceSample":
        """Return the sample with its dense label stripped (what training sees)."""
        return SliceSample(image=self.image, scribble=self.scribble, dense=None, provenance=self.provenance)


@dataclass
class Frame:
    """One loaded frame: image volume, scribble volume and optional dense label."""

    image: ImageVolume
    scribble: ScribbleMask
    dense: DenseLabel | None = None

    @property
    def key(self) -> tuple[str, str]:
        return self.image.key

    def slices(self) -> list[SliceSample]:
        """Split the frame into per-slice samples (image intensities as stored)."""
        samples = []
        for z in range(self.image.voxels.shape[0]):
            samples.append(
                SliceSample(
                    image=self.image.voxels[z],
                    scribble=ScribbleMask(self.scribble.labels[z], self.scribble.num_classes),
                    dense=DenseLabel(self.dense.labels[z], self.dense.num_classes) if self.dense is not None else None,
                    provenance=(self.image.patient_id, self.image.frame_id, z),
                )
            )
        return samples


def check_label_values(labels: np.ndarray, num_classes: int, allow_unlabeled: bool) -> None:
    """Raise ValidationError if ``labels`` holds a value outside the allowed set."""
    values = np.unique(labels)
    valid = (values >= 0) & (values < num_classes)
    if allow_unlabeled:
        valid |= values == UNLABELED
    if not valid.all():
        bad = values[~valid].tolist()
        raise ValidationError(f"unknown label value(s) {bad} for {num_classes} classes")


def _frame_paths(patient_dir: Path, frame_id: str) -> dict[str, Path]:
    return {kind: patient_dir / f"frame_{frame_id}_{kind}.bin" for kind in ("image", "label", "scribble")}


def load_dataset(root_path: Path | str, num_classes: int = NUM_CLASSES) -> list[Frame]:
    """Load every frame under a dataset root.

    Args:
        root_path: Dataset root directory
        num_classes: Number of classes the labels are validated against

    Returns:
        Frames sorted by (patient_id, frame_id); an empty root gives an empty list

    Raises:
        FormatError: If a header or payload is missing or corrupt
        ValidationError: If shapes disagree within a frame or a label value is unknown
    """
    root = Path(root_path)
    if not root.is_dir():
        raise FormatError(root, "dataset root is not a directory")

    frames = []
    for patient_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        match = PATIENT_DIR_RE.match(patient_dir.name)
        if not match:
            continue
        patient_id = match["patient"]

        frame_ids = sorted(
            {m["frame"] for m in (FRAME_FILE_RE.match(p.name) for p in patient_dir.iterdir()) if m}
        )
        for frame_id in frame_ids:
            frames.append(_load_frame(patient_dir, patient_id, frame_id, num_classes))

    frames.sort(key=lambda f: f.key)
    return frames


def _load_frame(patient_dir: Path, patient_id: str, frame_id: str, num_classes: int) -> Frame:
    paths = _frame_paths(patient_dir, frame_id)

    voxels, header = read_array(paths["image"])
    if header.dtype != "f32" or voxels.ndim != 3:
        raise FormatError(paths["image"], f"image must be a 3D f32 array, got {header.dtype} {list(header.shape)}")
    if not np.isfinite(voxels).all():
        raise ValidationError(f"{paths['image']}: image contains non-finite intensities")
    if header.spacing_mm is None:
        raise FormatError(paths["image"], "image header has no spacing_mm")

    image = ImageVolume(voxels=voxels, spacing=header.spacing_mm, patient_id=patient_id, frame_id=frame_id)

    scribble_labels = _read_labels(paths["scribble"], voxels.shape)
    try:
        scribble = ScribbleMask(scribble_labels, num_classes)
    except ValidationError as e:
        raise ValidationError(f"{paths['scribble']}: {e}") from None

    dense = None
    if paths["label"].exists():
        try:
            dense = DenseLabel(_read_labels(paths["label"], voxels.shape), num_classes)
        except ValidationError as e:
            raise ValidationError(f"{paths['label']}: {e}") from None

    return Frame(image=image, scribble=scribble, dense=dense)


def _read_labels(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    labels, header = read_array(path)
    if header.dtype != "u8":
        raise FormatError(path, f"label arrays must be u8, got {header.dtype}")
    if labels.shape != shape:
        raise ValidationError(f"{path}: shape {labels.shape} does not match image shape {shape}")
    return labels


def write_frame(root_path: Path | str, frame: Frame) -> None:
    """Write one frame in the dataset layout (dense label only when present)."""
    patient_dir = Path(root_path) / f"patient_{frame.image.patient_id}"
    paths = _frame_paths(patient_dir, frame.image.frame_id)
    spacing = frame.image.spacing

    write_array(paths["image"], frame.image.voxels, "f32", spacing)
    write_array(paths["scribble"], frame.scribble.labels, "u8", spacing)
    if frame.dense is not None:
        write_array(paths["label"], frame.dense.labels, "u8", spacing)


def group_by_patient(frames: list[Frame]) -> dict[str, list[Frame]]:
    """Group frames by patient id, keeping frame order."""
    groups: dict[str, list[Frame]] = {}
    for frame in frames:
        groups.setdefault(frame.image.patient_id, []).append(frame)
    return groups
