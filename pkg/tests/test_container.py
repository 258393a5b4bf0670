"""Tests for the binary array container."""

import json

import numpy as np
import pytest

from scribble_seg.common.container import header_path, parse_header, read_array, write_array
from scribble_seg.common.errors import FormatError


class TestWriteRead:
    """Tests for write_array / read_array."""

    def test_f32_volume(self, tmp_path):
        """Test a float volume with spacing comes back bit-exact."""
        array = np.random.default_rng(0).random((2, 3, 4)).astype(np.float32)
        write_array(tmp_path / "x.bin", array, "f32", (10.0, 1.5, 1.5))

        loaded, header = read_array(tmp_path / "x.bin")
        assert loaded.dtype == np.float32
        assert np.array_equal(loaded, array)
        assert header.shape == (2, 3, 4)
        assert header.spacing_mm == (10.0, 1.5, 1.5)

    def test_payload_is_little_endian_row_major(self, tmp_path):
        """Test the on-disk byte layout."""
        array = np.array([[1, 2], [3, 255]], dtype=np.uint8)
        write_array(tmp_path / "x.bin", array, "u8")
        assert (tmp_path / "x.bin").read_bytes() == bytes([1, 2, 3, 255])

        write_array(tmp_path / "y.bin", np.array([1.0], dtype=np.float32), "f32")
        assert (tmp_path / "y.bin").read_bytes() == np.array([1.0], dtype="<f4").tobytes()

    def test_header_contents(self, tmp_path):
        """Test the JSON sidecar fields."""
        write_array(tmp_path / "x.bin", np.zeros((1, 2, 3)), "u8", (1, 2, 3))
        data = json.loads(header_path(tmp_path / "x.bin").read_text())
        assert data == {"dtype": "u8", "shape": [1, 2, 3], "spacing_mm": [1.0, 2.0, 3.0]}

    def test_unknown_dtype_tag(self, tmp_path):
        """Test writing with an unsupported tag fails."""
        with pytest.raises(ValueError):
            write_array(tmp_path / "x.bin", np.zeros(3), "f64")


class TestParseHeader:
    """Tests for header validation."""

    def _write(self, tmp_path, data):
        path = tmp_path / "h.json"
        path.write_text(json.dumps(data) if not isinstance(data, str) else data)
        return path

    def test_missing_file(self, tmp_path):
        """Test a missing header names the file."""
        with pytest.raises(FormatError, match="h.json"):
            parse_header(tmp_path / "h.json")

    def test_not_json(self, tmp_path):
        """Test a corrupt header."""
        with pytest.raises(FormatError, match="not valid JSON"):
            parse_header(self._write(tmp_path, "{oops"))

    @pytest.mark.parametrize(
        "data",
        [
            {"dtype": "i16", "shape": [2]},
            {"dtype": "u8", "shape": []},
            {"dtype": "u8", "shape": [0, 2]},
            {"dtype": "u8", "shape": [2, True]},
            {"dtype": "u8", "shape": [2, 2], "spacing_mm": [1.0]},
            {"dtype": "u8", "shape": [2], "spacing_mm": [-1.0]},
            [1, 2],
        ],
    )
    def test_invalid_fields(self, tmp_path, data):
        """Test invalid dtype, shape and spacing values are rejected."""
        with pytest.raises(FormatError):
            parse_header(self._write(tmp_path, data))

    def test_format_error_is_value_error(self, tmp_path):
        """Test the error hierarchy."""
        with pytest.raises(ValueError):
            parse_header(tmp_path / "missing.json")


class TestReadErrors:
    """Tests for payload checks."""

    def test_truncated_payload(self, tmp_path):
        """Test a payload shorter than the header says."""
        write_array(tmp_path / "x.bin", np.zeros((4, 4), dtype=np.float32), "f32")
        (tmp_path / "x.bin").write_bytes(b"\x00" * 10)
        with pytest.raises(FormatError, match="needs 64"):
            read_array(tmp_path / "x.bin")

    def test_missing_payload(self, tmp_path):
        """Test a header without its payload."""
        write_array(tmp_path / "x.bin", np.zeros(2), "u8")
        (tmp_path / "x.bin").unlink()
        with pytest.raises(FormatError, match="payload file not found"):
            read_array(tmp_path / "x.bin")
