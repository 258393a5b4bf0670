"""Synthetic cardiac-like dataset and scribble generator.

Every slice carries three structures on a background: a disk (LV), an
annulus around it (Myo) and a crescent hugging the annulus (RV). Centers and
radii are randomized per patient, shrink toward the apex, and the second frame
of each patient is a contracted copy of the first.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import (
    CLASS_NAMES,
    NUM_CLASSES,
    SYNTH_MIN_SIZE,
    SYNTH_SPACING_MM,
    UNLABELED,
)
from scribble_seg.data.dataset import DenseLabel, Frame, ImageVolume, ScribbleMask, write_frame

logger = logging.getLogger(__name__)

BG, RV, MYO, LV = range(NUM_CLASSES)

# Mean intensity per class, before per-patient jitter
CLASS_INTENSITY = {BG: 0.15, RV: 0.75, MYO: 0.35, LV: 0.9}

# Distance band (px) from the foreground where the background scribble is drawn
BG_SCRIBBLE_BAND = (3, 10)

# 4-connected structuring element
CROSS = ndimage.generate_binary_structure(2, 1)
# 8-connectivity for counting pieces
EIGHT = np.ones((3, 3), dtype=bool)

# Strokes through blobs stay this far (px) inside the structure
CHORD_MARGIN = 2.0


def _slice_labels(shape: tuple[int, int], center: tuple[float, float], r_lv: float, thickness: float, r_rv: float) -> np.ndarray:
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = center
    dist = np.hypot(yy - cy, xx - cx)

    outer = r_lv + thickness
    rv_center = (cy + 0.15 * r_rv, cx - outer)
    rv_dist = np.hypot(yy - rv_center[0], xx - rv_center[1])

    labels = np.zeros(shape, dtype=np.uint8)
    labels[(rv_dist <= r_rv) & (dist > outer + 1.0)] = RV
    labels[(dist > r_lv) & (dist <= outer)] = MYO
    labels[dist <= r_lv] = LV
    return labels


def _render(labels: np.ndarray, intensity: dict[int, float], rng: np.random.Generator, noise_sigma: float) -> np.ndarray:
    image = np.zeros(labels.shape, dtype=np.float64)
    for cls, value in intensity.items():
        image[labels == cls] = value
    # smooth region boundaries and add a faint low-frequency bias
    image = ndimage.gaussian_filter(image, sigma=1.0)
    bias = ndimage.gaussian_filter(rng.normal(0.0, 1.0, labels.shape), sigma=max(labels.shape) / 8)
    bias *= 0.05 / max(np.abs(bias).max(), 1e-12)
    image += bias + rng.normal(0.0, noise_sigma, labels.shape)
    return image.astype(np.float32)


def synthesize_volume(
    shape: tuple[int, int, int],
    rng: np.random.Generator,
    noise_sigma: float = 0.05,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Draw one patient's anatomy and render both frames.

    Returns:
        (images, dense labels), one entry per frame, each shaped ``shape``
    """
    depth, h, w = shape
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    if min(h, w) < SYNTH_MIN_SIZE:
        raise ValidationError(f"in-plane size must be >= {SYNTH_MIN_SIZE} to fit the structures, got {(h, w)}")

    size = float(min(h, w))
    center = (
        h / 2 + rng.uniform(-0.04, 0.04) * size,
        w / 2 + 0.08 * size + rng.uniform(-0.04, 0.04) * size,
    )
    r_lv = rng.uniform(0.11, 0.15) * size
    thickness = rng.uniform(0.05, 0.07) * size
    rv_ratio = rng.uniform(0.7, 0.85)
    intensity = {cls: value + rng.uniform(-0.05, 0.05) for cls, value in CLASS_INTENSITY.items()}

    images, labels = [], []
    # frame 0 relaxed, frame 1 contracted: smaller cavity, thicker wall
    for lv_scale, wall_scale in ((1.0, 1.0), (0.8, 1.15)):
        frame_labels = []
        for z in range(depth):
            apex = 1.0 - 0.3 * (z / (depth - 1) if depth > 1 else 0.0)
            r = max(2.0, r_lv * lv_scale * apex)
            t = max(2.0, thickness * wall_scale)
            frame_labels.append(_slice_labels((h, w), center, r, t, rv_ratio * (r + t)))
        frame_labels = np.stack(frame_labels)
        frame_image = np.stack([_render(s, intensity, rng, noise_sigma) for s in frame_labels])
        images.append(frame_image)
        labels.append(frame_labels)
    return images, labels


def _chord(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A 3 px wide straight stroke at a random angle through the deepest point of ``mask``."""
    depth = ndimage.distance_transform_edt(mask)
    cy, cx = np.unravel_index(int(np.argmax(depth)), mask.shape)
    interior = depth >= min(CHORD_MARGIN, depth.max())

    angle = rng.uniform(0.0, np.pi)
    reach = float(max(mask.shape))
    t = np.arange(-reach, reach + 0.5, 0.5)
    ys = np.rint(cy + t * np.sin(angle)).astype(int)
    xs = np.rint(cx + t * np.cos(angle)).astype(int)
    inside = (ys >= 0) & (ys < mask.shape[0]) & (xs >= 0) & (xs < mask.shape[1])

    line = np.zeros_like(mask)
    line[ys[inside], xs[inside]] = True
    line = ndimage.binary_dilation(line, structure=CROSS) & interior
    # only the stretch through the deepest point
    pieces, _ = ndimage.label(line, structure=EIGHT)
    return pieces == pieces[cy, cx]


def _class_curve(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Curve-like scribble for every connected piece of one class mask."""
    out = np.zeros_like(mask)
    pieces, count = ndimage.label(mask, structure=EIGHT)
    for index in range(1, count + 1):
        piece = pieces == index
        curve = skeletonize(piece)
        # blobs (disks) thin to a dot; add a stroke across them
        if curve.sum() < np.sqrt(piece.sum()):
            curve = curve | _chord(piece, rng)
        if not curve.any():
            curve = _deepest_pixel(piece)
        out |= curve
    return out


def _deepest_pixel(mask: np.ndarray) -> np.ndarray:
    """Single-pixel mask at the point of ``mask`` farthest from its boundary."""
    depth = ndimage.distance_transform_edt(mask)
    out = np.zeros_like(mask)
    out[np.unravel_index(int(np.argmax(depth)), mask.shape)] = True
    return out


def _background_curve(background: np.ndarray, foreground: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    h, w = background.shape
    if not foreground.any():
        line = np.zeros_like(background)
        line[h // 2, w // 4 : max(w // 4 + 1, 3 * w // 4)] = True
        return line & background

    distance = ndimage.distance_transform_edt(~foreground)
    offset = int(rng.integers(BG_SCRIBBLE_BAND[0], BG_SCRIBBLE_BAND[1] + 1))
    ring = background & (np.abs(distance - offset) < 0.5)
    if not ring.any():
        return np.zeros_like(background)

    components, count = ndimage.label(ring, structure=EIGHT)
    if count > 1:
        sizes = ndimage.sum_labels(ring, components, index=np.arange(1, count + 1))
        ring = components == (int(np.argmax(sizes)) + 1)
    return ring


def _scribble_slice(dense: np.ndarray, num_classes: int, rng: np.random.Generator) -> np.ndarray:
    scribble = np.full(dense.shape, UNLABELED, dtype=np.uint8)
    foreground = dense != 0

    for cls in range(1, num_classes):
        mask = dense == cls
        if not mask.any():
            continue
        curve = _class_curve(mask, rng)
        scribble[curve] = cls

    background = ~foreground
    if background.any():
        curve = _background_curve(background, foreground, rng)
        if not curve.any():
            logger.debug("background band empty, scribbling the deepest background pixel")
            curve = _deepest_pixel(background)
        scribble[curve] = 0

    return scribble


def synthesize_scribbles(dense: DenseLabel, rng: np.random.Generator) -> ScribbleMask:
    """Derive curve-like scribbles from a dense label (2D slice or 3D volume).

    Each connected piece of a foreground class is thinned to its 1 px
    skeleton; pieces whose skeleton is little more than a dot (disks) also
    get a straight stroke through their center. The background gets one
    curve at a random 3-10 px distance from the foreground. Every class
    present in ``dense`` keeps at least one labeled pixel and every labeled
    pixel agrees with ``dense``.
    """
    labels = dense.labels
    if labels.ndim == 2:
        return ScribbleMask(_scribble_slice(labels, dense.num_classes, rng), dense.num_classes)
    if labels.ndim != 3:
        raise ValidationError(f"dense label must be 2D or 3D, got shape {labels.shape}")
    slices = [_scribble_slice(s, dense.num_classes, rng) for s in labels]
    return ScribbleMask(np.stack(slices), dense.num_classes)


def synthesize_dataset(
    root_path: Path | str,
    n_patients: int,
    shape: tuple[int, int, int],
    seed: int,
    noise_sigma: float = 0.05,
) -> list[Frame]:
    """Generate and write a synthetic dataset with two frames per patient.

    Args:
        root_path: Destination dataset root
        n_patients: Number of patients (>= 1)
        shape: Volume shape (D, H, W) with H, W >= 32
        seed: Seed; the same seed reproduces the dataset bit for bit
        noise_sigma: Standard deviation of the additive Gaussian image noise

    Returns:
        The frames that were written, sorted by (patient_id, frame_id)

    Raises:
        ValidationError: If n_patients < 1 or the shape is too small
    """
    if n_patients < 1:
        raise ValidationError(f"n_patients must be >= 1, got {n_patients}")
    shape = tuple(int(n) for n in shape)
    if len(shape) != 3:
        raise ValidationError(f"shape must be (D, H, W), got {shape}")

    root = Path(root_path)
    frames = []
    for index in range(n_patients):
        rng = np.random.default_rng([seed, index])
        patient_id = f"{index + 1:03d}"
        images, labels = synthesize_volume(shape, rng, noise_sigma)
        for frame_index, (image, dense_labels) in enumerate(zip(images, labels)):
            dense = DenseLabel(dense_labels, NUM_CLASSES)
            frame = Frame(
                image=ImageVolume(
                    voxels=image,
                    spacing=SYNTH_SPACING_MM,
                    patient_id=patient_id,
                    frame_id=f"{frame_index + 1:02d}",
                ),
                scribble=synthesize_scribbles(dense, rng),
                dense=dense,
            )
            write_frame(root, frame)
            frames.append(frame)

    logger.info(
        "wrote %d synthetic patient(s), %d frame(s) of shape %s (%s) to %s",
        n_patients,
        len(frames),
        shape,
        "/".join(CLASS_NAMES),
        root,
    )
    return frames


def scribble_coverage(scribble: ScribbleMask) -> float:
    """Fraction of pixels carrying a scribble label."""
    return float(scribble.labeled.mean())
