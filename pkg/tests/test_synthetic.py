"""Tests for the synthetic dataset and scribble generator."""

import numpy as np
import pytest
from scipy import ndimage

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import UNLABELED
from scribble_seg.data.dataset import DenseLabel, load_dataset
from scribble_seg.data.synthetic import scribble_coverage, synthesize_dataset, synthesize_scribbles


class TestSynthesizeDataset:
    """Tests for synthesize_dataset."""

    def test_one_patient_layout(self, tmp_path):
        """Test one patient gives two frames with three files (plus headers) each."""
        synthesize_dataset(tmp_path, n_patients=1, shape=(4, 32, 32), seed=0)
        patient_dir = tmp_path / "patient_001"
        assert sorted(p.name for p in tmp_path.iterdir()) == ["patient_001"]
        bins = sorted(p.name for p in patient_dir.glob("*.bin"))
        assert bins == [
            "frame_01_image.bin",
            "frame_01_label.bin",
            "frame_01_scribble.bin",
            "frame_02_image.bin",
            "frame_02_label.bin",
            "frame_02_scribble.bin",
        ]
        assert len(list(patient_dir.glob("*.json"))) == 6

    def test_all_classes_on_interior_slices(self, tmp_path):
        """Test every interior slice holds BG, RV, Myo and LV."""
        frames = synthesize_dataset(tmp_path, n_patients=3, shape=(6, 64, 64), seed=4)
        for frame in frames:
            for z in range(1, 5):
                assert set(np.unique(frame.dense.labels[z])) == {0, 1, 2, 3}

    def test_deterministic(self, tmp_path):
        """Test the same seed writes byte-identical files."""
        synthesize_dataset(tmp_path / "a", n_patients=2, shape=(3, 32, 32), seed=11)
        synthesize_dataset(tmp_path / "b", n_patients=2, shape=(3, 32, 32), seed=11)
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.*"))
        assert files
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_round_trip(self, tmp_path):
        """Test what is written loads back bit-exactly."""
        written = synthesize_dataset(tmp_path, n_patients=2, shape=(2, 32, 32), seed=1)
        loaded = load_dataset(tmp_path)
        assert [f.key for f in loaded] == [f.key for f in written]
        for a, b in zip(written, loaded):
            assert np.array_equal(a.image.voxels, b.image.voxels)
            assert np.array_equal(a.scribble.labels, b.scribble.labels)
            assert np.array_equal(a.dense.labels, b.dense.labels)

    def test_too_small(self, tmp_path):
        """Test shapes that cannot fit the structures."""
        with pytest.raises(ValidationError):
            synthesize_dataset(tmp_path, n_patients=1, shape=(4, 16, 64), seed=0)

    def test_no_patients(self, tmp_path):
        """Test n_patients must be positive."""
        with pytest.raises(ValidationError):
            synthesize_dataset(tmp_path, n_patients=0, shape=(4, 32, 32), seed=0)

    def test_sparse_on_large_slices(self, tmp_path):
        """Test scribbles cover under 5% of 256x256 slices."""
        frames = synthesize_dataset(tmp_path, n_patients=1, shape=(3, 256, 256), seed=2)
        for frame in frames:
            assert scribble_coverage(frame.scribble) < 0.05


class TestSynthesizeScribbles:
    """Tests for synthesize_scribbles."""

    def test_all_background(self):
        """Test an all-background slice gets only a background scribble."""
        dense = DenseLabel(np.zeros((32, 32), dtype=np.uint8))
        labels = synthesize_scribbles(dense, np.random.default_rng(0)).labels
        assert set(np.unique(labels)) == {0, UNLABELED}
        assert (labels == 0).sum() < labels.size

    def test_agrees_with_dense(self, tmp_path):
        """Test every scribbled pixel carries the dense class."""
        frames = synthesize_dataset(tmp_path, n_patients=2, shape=(4, 48, 48), seed=7)
        for frame in frames:
            labeled = frame.scribble.labeled
            assert np.array_equal(frame.scribble.labels[labeled], frame.dense.labels[labeled])

    def test_every_present_class_scribbled(self, tmp_path):
        """Test no class present in the dense slice is dropped."""
        frames = synthesize_dataset(tmp_path, n_patients=2, shape=(4, 48, 48), seed=3)
        for frame in frames:
            for dense, scribble in zip(frame.dense.labels, frame.scribble.labels):
                present = set(np.unique(dense))
                assert present <= set(np.unique(scribble))

    def test_tiny_region_kept(self):
        """Test a one-pixel structure still gets its pixel labeled."""
        labels = np.zeros((32, 32), dtype=np.uint8)
        labels[10, 10] = 3
        labels[20:26, 20:26] = 2
        scribble = synthesize_scribbles(DenseLabel(labels), np.random.default_rng(0)).labels
        assert scribble[10, 10] == 3
        assert (scribble == 2).any()
        assert (scribble == 0).any()

    def test_background_near_foreground(self):
        """Test the background curve lies 3 to 10 px from the foreground."""
        labels = np.zeros((64, 64), dtype=np.uint8)
        labels[28:36, 28:36] = 3
        scribble = synthesize_scribbles(DenseLabel(labels), np.random.default_rng(1)).labels
        ys, xs = np.nonzero(scribble == 0)
        fy, fx = np.nonzero(labels)
        nearest = np.min(np.hypot(ys[:, None] - fy[None], xs[:, None] - fx[None]), axis=1)
        assert nearest.min() >= 2.5 and nearest.max() <= 10.5

    def test_volume_input(self):
        """Test a 3D dense label gives a 3D scribble."""
        labels = np.zeros((2, 32, 32), dtype=np.uint8)
        labels[:, 10:20, 10:20] = 1
        mask = synthesize_scribbles(DenseLabel(labels), np.random.default_rng(0))
        assert mask.labels.shape == (2, 32, 32)

    def test_curves_not_dots(self, tmp_path):
        """Test foreground scribbles on 64x64 slices are strokes, not single pixels."""
        frames = synthesize_dataset(tmp_path, n_patients=3, shape=(4, 64, 64), seed=5)
        lengths = {1: [], 2: [], 3: []}
        for frame in frames:
            for dense, scribble in zip(frame.dense.labels, frame.scribble.labels):
                for cls, found in lengths.items():
                    if (dense == cls).any():
                        found.append(int((scribble == cls).sum()))
        for cls, found in lengths.items():
            assert min(found) >= 4, cls
            assert np.mean(found) >= 10, cls

    def test_disk_gets_a_stroke(self):
        """Test a solid disk is scribbled with a line across it, not its center pixel."""
        yy, xx = np.mgrid[0:64, 0:64]
        labels = np.where(np.hypot(yy - 32, xx - 32) <= 10, 3, 0).astype(np.uint8)
        scribble = synthesize_scribbles(DenseLabel(labels), np.random.default_rng(2)).labels
        ys, xs = np.nonzero(scribble == 3)
        assert max(np.ptp(ys), np.ptp(xs)) >= 10
        assert (scribble == 3).sum() < (labels == 3).sum() / 2

    def test_annulus_stays_a_ring(self):
        """Test a thick annulus thins to one closed curve reaching all four quadrants."""
        yy, xx = np.mgrid[0:64, 0:64]
        dist = np.hypot(yy - 32, xx - 32)
        labels = np.where((dist > 12) & (dist <= 18), 2, 0).astype(np.uint8)
        curve = synthesize_scribbles(DenseLabel(labels), np.random.default_rng(0)).labels == 2
        assert ndimage.label(curve, structure=np.ones((3, 3)))[1] == 1
        for rows in (slice(0, 32), slice(32, 64)):
            for cols in (slice(0, 32), slice(32, 64)):
                assert curve[rows, cols].any()
        assert curve.sum() < (labels == 2).sum() / 2
