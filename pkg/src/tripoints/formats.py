"""Wire formats: the binary tensor container and the annotation document.

Tensor container layout (all little-endian):

    offset  size        field
    0       8           magic, b"MLSDTNSR"
    8       1           version, currently 1
    9       1           ndim, 1..4
    10      2           reserved, must be zero
    12      4 * ndim    dims, uint32 each, all > 0
    ...     4 * prod    payload, float32, row-major (channel, row, col)

Annotations are a JSON document {"images": [{"id", "width", "height",
"lines": [[x1, y1, x2, y2], ...]}, ...]} with coordinates inside the image
rectangle and no zero-length lines.  Readers reject malformed input rather
than repair it; both writers are canonical so write -> read -> write is
byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import LineSegment

__all__ = [
    "TENSOR_MAGIC",
    "TENSOR_VERSION",
    "TensorFormatError",
    "TensorMagicError",
    "TensorVersionError",
    "TensorDimError",
    "TensorPayloadError",
    "AnnotationError",
    "ImageAnnotation",
    "AnnotationSet",
    "read_tensor",
    "write_tensor",
    "read_annotations",
    "write_annotations",
]

TENSOR_MAGIC = b"MLSDTNSR"
TENSOR_VERSION = 1
MAX_NDIM = 4


class TensorFormatError(ValueError):
    """Base class for tensor container violations."""


class TensorMagicError(TensorFormatError):
    pass


class TensorVersionError(TensorFormatError):
    pass


class TensorDimError(TensorFormatError):
    pass


class TensorPayloadError(TensorFormatError):
    pass


class AnnotationError(ValueError):
    """Malformed or out-of-contract annotation document."""


def write_tensor(tensor: np.ndarray, path) -> None:
    """Serialize a float array; see the module docstring for the layout."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    if not 1 <= arr.ndim <= MAX_NDIM:
        raise TensorDimError(f"tensor rank must be 1..{MAX_NDIM}, got {arr.ndim}")
    if any(d <= 0 for d in arr.shape):
        raise TensorDimError(f"tensor dims must be positive, got {arr.shape}")
    header = TENSOR_MAGIC + bytes([TENSOR_VERSION, arr.ndim, 0, 0])
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor container, rejecting any malformed input."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TensorPayloadError(f"file too short for a header: {len(data)} bytes")
    if data[:8] != TENSOR_MAGIC:
        raise TensorMagicError(f"bad magic {data[:8]!r}")
    version = data[8]
    if version != TENSOR_VERSION:
        raise TensorVersionError(f"unsupported version {version}")
    ndim = data[9]
    if not 1 <= ndim <= MAX_NDIM:
        raise TensorDimError(f"tensor rank must be 1..{MAX_NDIM}, got {ndim}")
    if data[10:12] != b"\x00\x00":
        raise TensorFormatError(f"reserved bytes must be zero, got {data[10:12]!r}")
    if len(data) < 12 + 4 * ndim:
        raise TensorPayloadError("file too short for the dims block")
    dims = struct.unpack_from(f"<{ndim}I", data, 12)
    if any(d == 0 for d in dims):
        raise TensorDimError(f"tensor dims must be positive, got {dims}")
    count = 1
    for d in dims:
        count *= d
    expected = 12 + 4 * ndim + 4 * count
    if len(data) != expected:
        raise TensorPayloadError(f"payload size mismatch: expected {expected} bytes, file has {len(data)}")
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=12 + 4 * ndim)
    return payload.reshape(dims).copy()


@dataclass
class ImageAnnotation:
    """One annotated image; ``lines`` keeps the raw [x1, y1, x2, y2] rows."""

    id: str
    width: int
    height: int
    lines: list = field(default_factory=list)

    def segments(self) -> list[LineSegment]:
        return [LineSegment.of(*row) for row in self.lines]


@dataclass
class AnnotationSet:
    images: list[ImageAnnotation] = field(default_factory=list)


def _check_line(img_id, width, height, row):
    if not isinstance(row, list) or len(row) != 4:
        raise AnnotationError(f"image {img_id!r}: line must be [x1, y1, x2, y2], got {row!r}")
    for v in row:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise AnnotationError(f"image {img_id!r}: non-numeric coordinate in {row!r}")
    x1, y1, x2, y2 = (float(v) for v in row)
    for x in (x1, x2):
        if not 0.0 <= x <= width:
            raise AnnotationError(f"image {img_id!r}: x coordinate {x} outside [0, {width}]")
    for y in (y1, y2):
        if not 0.0 <= y <= height:
            raise AnnotationError(f"image {img_id!r}: y coordinate {y} outside [0, {height}]")
    if x1 == x2 and y1 == y2:
        raise AnnotationError(f"image {img_id!r}: zero-length line {row!r}")


def _parse_image(entry) -> ImageAnnotation:
    if not isinstance(entry, dict):
        raise AnnotationError(f"image entry must be an object, got {type(entry).__name__}")
    try:
        img_id = entry["id"]
        width = entry["width"]
        height = entry["height"]
        lines = entry["lines"]
    except KeyError as e:
        raise AnnotationError(f"image entry missing key {e.args[0]!r}") from None
    if not isinstance(img_id, str) or not img_id:
        raise AnnotationError(f"image id must be a non-empty string, got {img_id!r}")
    for name, v in (("width", width), ("height", height)):
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise AnnotationError(f"image {img_id!r}: {name} must be a positive integer, got {v!r}")
    if not isinstance(lines, list):
        raise AnnotationError(f"image {img_id!r}: lines must be a list")
    for row in lines:
        _check_line(img_id, width, height, row)
    return ImageAnnotation(id=img_id, width=width, height=height, lines=lines)


def read_annotations(path) -> AnnotationSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise AnnotationError(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "images" not in doc:
        raise AnnotationError('document must be an object with an "images" list')
    images = doc["images"]
    if not isinstance(images, list):
        raise AnnotationError('"images" must be a list')
    parsed = [_parse_image(entry) for entry in images]
    seen = set()
    for img in parsed:
        if img.id in seen:
            raise AnnotationError(f"duplicate image id {img.id!r}")
        seen.add(img.id)
    return AnnotationSet(images=parsed)


def write_annotations(annotations: AnnotationSet, path) -> None:
    doc = {
        "images": [
            {"id": img.id, "width": img.width, "height": img.height, "lines": img.lines}
            for img in annotations.images
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
