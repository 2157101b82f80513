"""Line-segment primitives: canonical ordering, internal division, overlap
splitting, and affine transforms of line annotations.

Coordinates are input-image pixels with x to the right and y down. A
canonical segment orders its endpoints lexicographically by (x, then y);
that pins down which endpoint is the start, so segment angles and endpoint
matching are well defined everywhere else in the package.

All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Point",
    "LineSegment",
    "ImageGeometry",
    "canonicalize",
    "length_and_degree",
    "internal_points",
    "base_subpart_length",
    "sol_split",
    "affine_augment",
    "identity_transform",
    "horizontal_flip",
    "vertical_flip",
    "rotation",
    "scaling",
    "shearing",
    "compose",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class Point:
    """A 2D point in pixel coordinates."""

    x: float
    y: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class LineSegment:
    """A scored segment between two distinct endpoints.

    ``score`` is the detection confidence (1.0 for ground truth).  ``center``
    is only set on decoded segments and records the location of the map cell
    the segment was generated from, in input-image pixels; the matching loss
    reads it back.
    """

    start: Point
    end: Point
    score: float = 1.0
    center: Point | None = None

    @classmethod
    def of(cls, x1: float, y1: float, x2: float, y2: float, score: float = 1.0) -> "LineSegment":
        return cls(Point(float(x1), float(y1)), Point(float(x2), float(y2)), score)


@dataclass(frozen=True, slots=True)
class ImageGeometry:
    """Input-image size in pixels.

    Both sides must be even so the half-resolution map grid is integral.
    """

    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if self.width % 2 or self.height % 2:
            raise ValueError(f"image size must be even, got {self.width}x{self.height}")

    @property
    def map_width(self) -> int:
        return self.width // 2

    @property
    def map_height(self) -> int:
        return self.height // 2

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


def canonicalize(line: LineSegment) -> LineSegment:
    """Return ``line`` with endpoints ordered lexicographically by (x, y).

    Raises:
        ValueError: If the segment has zero length.
    """
    a = (line.start.x, line.start.y)
    b = (line.end.x, line.end.y)
    if a == b:
        raise ValueError(f"zero-length line at {a}")
    if b < a:
        return replace(line, start=line.end, end=line.start)
    return line


def length_and_degree(line: LineSegment) -> tuple[float, float]:
    """Euclidean length and angle of ``end - start`` in radians.

    For canonical segments the angle lies in [-pi/2, pi/2].

    Raises:
        ValueError: If the segment has zero length.
    """
    dx = line.end.x - line.start.x
    dy = line.end.y - line.start.y
    length = math.hypot(dx, dy)
    if length == 0.0:
        raise ValueError(f"zero-length line at ({line.start.x}, {line.start.y})")
    return length, math.atan2(dy, dx)


def internal_points(line: LineSegment, k: int) -> list[Point]:
    """The k points dividing ``line`` into k + 1 equal intervals, in order."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    sx, sy = line.start.x, line.start.y
    dx = line.end.x - sx
    dy = line.end.y - sy
    step = 1.0 / (k + 1)
    return [Point(sx + i * step * dx, sy + i * step * dy) for i in range(1, k + 1)]


def base_subpart_length(input_size: int) -> float:
    """Default base subpart length: one eighth of the input side."""
    return input_size * 0.125


def _round_half_away(v: float) -> int:
    # v is nonnegative here, so half-away-from-zero == half-up
    return int(math.floor(v + 0.5))


def sol_split(line: LineSegment, mu: float) -> list[LineSegment]:
    """Split ``line`` into overlapping equal-length subparts.

    The number of internal division points is k = round(r / (mu / 2)) - 1
    for segment length r.  For k <= 1 the segment is returned unchanged.
    Otherwise the segment is divided into k + 1 equal intervals by points
    p_1 .. p_k, and the k subparts (p_i, p_{i+2}) for i = 0 .. k-1 are
    returned, each spanning two consecutive intervals; adjacent subparts
    overlap by exactly one interval, so every subpart has length
    2 * r / (k + 1).

    Args:
        line: Canonical segment to split.
        mu: Base subpart length in pixels, > 0.

    Returns:
        List of canonical subparts, or ``[line]`` when no split applies.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    length, _ = length_and_degree(line)
    k = _round_half_away(length / (mu / 2.0)) - 1
    if k <= 1:
        return [line]
    points = [line.start, *internal_points(line, k), line.end]
    return [
        canonicalize(LineSegment(points[i], points[i + 2], score=line.score))
        for i in range(k)
    ]


def _clip_to_rect(x0, y0, x1, y1, width, height):
    """Parametric clip of a segment to [0, width] x [0, height].

    Returns the clipped endpoints or None when the segment lies fully
    outside.  Endpoints already inside are returned unchanged so an
    identity transform round-trips exactly.
    """
    dx = x1 - x0
    dy = y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0), (dx, width - x0), (-dy, y0), (dy, height - y0)):
        if p == 0.0:
            if q < 0.0:
                return None
        else:
            r = q / p
            if p < 0.0:
                if r > t1:
                    return None
                if r > t0:
                    t0 = r
            else:
                if r < t0:
                    return None
                if r < t1:
                    t1 = r
    a = (x0, y0) if t0 == 0.0 else (x0 + t0 * dx, y0 + t0 * dy)
    b = (x1, y1) if t1 == 1.0 else (x0 + t1 * dx, y0 + t1 * dy)
    return a, b


def affine_augment(
    lines: list[LineSegment],
    transform: np.ndarray,
    geom: ImageGeometry,
    min_length: float = 4.0,
) -> list[LineSegment]:
    """Map segments through a 3x3 homogeneous transform and clip to the image.

    Endpoints are transformed, the result is clipped to the rectangle
    [0, width] x [0, height], and segments that end up fully outside or
    shorter than ``min_length`` are dropped.  Outputs are canonical.

    Raises:
        ValueError: If the transform is not 3x3 or is singular.
    """
    m = np.asarray(transform, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"transform must be 3x3, got {m.shape}")
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("transform matrix is singular")

    out = []
    for line in lines:
        x0, y0 = _apply_transform(m, line.start.x, line.start.y)
        x1, y1 = _apply_transform(m, line.end.x, line.end.y)
        clipped = _clip_to_rect(x0, y0, x1, y1, geom.width, geom.height)
        if clipped is None:
            continue
        (ax, ay), (bx, by) = clipped
        if math.hypot(bx - ax, by - ay) < min_length:
            continue
        out.append(canonicalize(LineSegment(Point(ax, ay), Point(bx, by), score=line.score)))
    return out


def _apply_transform(m, x, y):
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    tx = (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w
    ty = (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w
    return tx, ty


def identity_transform() -> np.ndarray:
    return np.eye(3)


def horizontal_flip(geom: ImageGeometry) -> np.ndarray:
    return np.array([[-1.0, 0.0, geom.width], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def vertical_flip(geom: ImageGeometry) -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, -1.0, geom.height], [0.0, 0.0, 1.0]])


def _about_center(geom: ImageGeometry, core: np.ndarray) -> np.ndarray:
    cx, cy = geom.width / 2.0, geom.height / 2.0
    to_origin = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    return back @ core @ to_origin


def rotation(degrees: float, geom: ImageGeometry) -> np.ndarray:
    """Rotation about the image center, counterclockwise in (x right, y down)."""
    t = math.radians(degrees)
    core = np.array([[math.cos(t), -math.sin(t), 0.0], [math.sin(t), math.cos(t), 0.0], [0.0, 0.0, 1.0]])
    return _about_center(geom, core)


def scaling(sx: float, sy: float, geom: ImageGeometry) -> np.ndarray:
    """Scaling about the image center."""
    core = np.array([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    return _about_center(geom, core)


def shearing(kx: float, ky: float, geom: ImageGeometry) -> np.ndarray:
    """Shear about the image center: x += kx * y, y += ky * x."""
    core = np.array([[1.0, kx, 0.0], [ky, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return _about_center(geom, core)


def compose(*transforms: np.ndarray) -> np.ndarray:
    """Compose transforms so the last argument is applied first."""
    m = np.eye(3)
    for t in transforms:
        m = m @ np.asarray(t, dtype=np.float64)
    return m
