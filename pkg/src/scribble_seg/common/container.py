"""Reader and writer for the raw array container (``.bin`` payload + ``.json`` header)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scribble_seg.common.errors import FormatError

# Header dtype tag -> little-endian numpy dtype
DTYPES = {
    "f32": np.dtype("<f4"),
    "u8": np.dtype("u1"),
}


@dataclass
class ArrayHeader:
    """Parsed sidecar header of one container array."""

    dtype: str
    shape: tuple[int, ...]
    spacing_mm: tuple[float, ...] | None = None

    @property
    def numpy_dtype(self) -> np.dtype:
        return DTYPES[self.dtype]

    @property
    def nbytes(self) -> int:
        return math.prod(self.shape) * self.numpy_dtype.itemsize

    def to_dict(self) -> dict:
        data: dict = {"dtype": self.dtype, "shape": list(self.shape)}
        if self.spacing_mm is not None:
            data["spacing_mm"] = list(self.spacing_mm)
        return data


def header_path(bin_path: Path | str) -> Path:
    """Return the sidecar ``.json`` path of a ``.bin`` payload."""
    return Path(bin_path).with_suffix(".json")


def parse_header(path: Path | str) -> ArrayHeader:
    """Parse a container header file.

    Args:
        path: Path to the ``.json`` sidecar

    Returns:
        ArrayHeader with validated dtype, shape and spacing

    Raises:
        FormatError: If the file is missing, is not JSON, or has invalid fields
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise FormatError(path, "header file not found") from None
    except json.JSONDecodeError as e:
        raise FormatError(path, f"header is not valid JSON ({e})") from None

    if not isinstance(data, dict):
        raise FormatError(path, "header must be a JSON object")

    dtype = data.get("dtype")
    if dtype not in DTYPES:
        raise FormatError(path, f"unsupported dtype {dtype!r} (expected one of {sorted(DTYPES)})")

    shape = data.get("shape")
    if (
        not isinstance(shape, list)
        or not shape
        or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in shape)
    ):
        raise FormatError(path, f"shape must be a non-empty list of positive integers, got {shape!r}")

    spacing = data.get("spacing_mm")
    if spacing is not None:
        if (
            not isinstance(spacing, list)
            or len(spacing) != len(shape)
            or not all(isinstance(s, (int, float)) and not isinstance(s, bool) and s > 0 for s in spacing)
        ):
            raise FormatError(path, f"spacing_mm must list one positive value per axis, got {spacing!r}")
        spacing = tuple(float(s) for s in spacing)

    return ArrayHeader(dtype=dtype, shape=tuple(shape), spacing_mm=spacing)


def read_array(bin_path: Path | str) -> tuple[np.ndarray, ArrayHeader]:
    """Read one container array.

    Args:
        bin_path: Path to the ``.bin`` payload (header is its ``.json`` sibling)

    Returns:
        Tuple of (array in native byte order, parsed header)

    Raises:
        FormatError: If header or payload is missing or the payload size disagrees
    """
    bin_path = Path(bin_path)
    header = parse_header(header_path(bin_path))

    try:
        raw = bin_path.read_bytes()
    except FileNotFoundError:
        raise FormatError(bin_path, "payload file not found") from None

    if len(raw) != header.nbytes:
        raise FormatError(
            bin_path,
            f"payload has {len(raw)} bytes, header {list(header.shape)} x {header.dtype} needs {header.nbytes}",
        )

    array = np.frombuffer(raw, dtype=header.numpy_dtype).reshape(header.shape)
    return array.astype(array.dtype.newbyteorder("="), copy=True), header


def write_array(
    bin_path: Path | str,
    array: np.ndarray,
    dtype: str,
    spacing_mm: tuple[float, ...] | None = None,
) -> ArrayHeader:
    """Write one container array and its header.

    Args:
        bin_path: Destination ``.bin`` path; the header goes next to it
        array: Array to write (cast to ``dtype``)
        dtype: Header dtype tag, ``"f32"`` or ``"u8"``
        spacing_mm: Optional per-axis spacing recorded in the header

    Returns:
        The header that was written
    """
    if dtype not in DTYPES:
        raise ValueError(f"unsupported dtype {dtype!r}")

    bin_path = Path(bin_path)
    bin_path.parent.mkdir(parents=True, exist_ok=True)

    header = ArrayHeader(
        dtype=dtype,
        shape=tuple(int(n) for n in array.shape),
        spacing_mm=tuple(float(s) for s in spacing_mm) if spacing_mm is not None else None,
    )
    payload = np.ascontiguousarray(array, dtype=header.numpy_dtype)
    bin_path.write_bytes(payload.tobytes(order="C"))

    with open(header_path(bin_path), "w") as f:
        json.dump(header.to_dict(), f, sort_keys=True)
        f.write("\n")

    return header
