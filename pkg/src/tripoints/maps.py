"""Ground-truth map encoding at half input resolution.

A line annotation becomes a 7-channel map stack: normalized length and
degree, a Gaussian center heatmap, and four displacement channels holding
the 2D offsets from a cell to the segment's start and end points.  The
offsets are stored relative to the cell that holds them (map-space units),
so decoding from any supervised cell reproduces the endpoints exactly.

Map cell (row, col) sits at map coordinate (x=col, y=row); the input-to-map
scale is exactly 2 with no half-cell offset.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import ImageGeometry, LineSegment, canonicalize, length_and_degree, sol_split

__all__ = [
    "CHANNELS",
    "LENGTH",
    "DEGREE",
    "CENTER",
    "DISP_SX",
    "DISP_SY",
    "DISP_EX",
    "DISP_EY",
    "GAUSSIAN_SIGMA",
    "MapStack",
    "SegMaps",
    "GtBundle",
    "normalize_length",
    "denormalize_length",
    "normalize_degree",
    "denormalize_degree",
    "encode_center",
    "encode_displacement",
    "encode_length_degree",
    "encode_segmentation",
    "encode_tp_stack",
    "rasterize_lines",
    "build_gt",
]

logger = logging.getLogger(__name__)

CHANNELS = ("length", "degree", "center", "disp_sx", "disp_sy", "disp_ex", "disp_ey")
LENGTH, DEGREE, CENTER, DISP_SX, DISP_SY, DISP_EX, DISP_EY = range(7)

# Heatmap spread in map cells; the kernel is truncated to a 3x3 window.
GAUSSIAN_SIGMA = 1.0
_WINDOW = 1  # window radius in cells


@dataclass
class MapStack:
    """7-channel map stack at half input resolution, channel-first float32."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[0] != len(CHANNELS):
            raise ValueError(f"expected ({len(CHANNELS)}, h, w) stack, got shape {self.data.shape}")

    @classmethod
    def zeros(cls, geom: ImageGeometry) -> "MapStack":
        return cls(np.zeros((len(CHANNELS), geom.map_height, geom.map_width), dtype=np.float32))

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def length(self) -> np.ndarray:
        return self.data[LENGTH]

    @property
    def degree(self) -> np.ndarray:
        return self.data[DEGREE]

    @property
    def center(self) -> np.ndarray:
        return self.data[CENTER]

    @property
    def displacements(self) -> np.ndarray:
        """The four displacement channels as a (4, h, w) view."""
        return self.data[DISP_SX : DISP_EY + 1]


@dataclass
class SegMaps:
    """Junction heatmap and binary line raster at map resolution."""

    junction: np.ndarray
    line: np.ndarray


@dataclass
class GtBundle:
    """Everything a training step consumes for one annotated image."""

    tp: MapStack
    sol: MapStack
    seg: SegMaps
    tp_mask: np.ndarray
    sol_mask: np.ndarray


def normalize_length(length: float, geom: ImageGeometry) -> float:
    """Length in pixels -> fraction of the input-image diagonal."""
    return length / geom.diagonal


def denormalize_length(value: float, geom: ImageGeometry) -> float:
    return value * geom.diagonal


def normalize_degree(radians: float) -> float:
    """Angle in radians -> [0.25, 0.75] for canonical segments."""
    return radians / (2.0 * math.pi) + 0.5


def denormalize_degree(value: float) -> float:
    return (value - 0.5) * 2.0 * math.pi


def _nearest_cell(mx: float, my: float) -> tuple[int, int]:
    # Half-up rounding keeps the choice deterministic when the coordinate
    # falls exactly between two cells.
    return int(math.floor(mx + 0.5)), int(math.floor(my + 0.5))


def _map_center(line: LineSegment) -> tuple[float, float]:
    cx = (line.start.x + line.end.x) / 2.0
    cy = (line.start.y + line.end.y) / 2.0
    return cx / 2.0, cy / 2.0


def _splat_gaussian(grid: np.ndarray, mx: float, my: float, sigma: float) -> bool:
    """Max-fuse a 3x3 truncated Gaussian centered at map coords (mx, my).

    Returns False when the nearest cell lies outside the grid.
    """
    h, w = grid.shape
    qx, qy = _nearest_cell(mx, my)
    if not (0 <= qx < w and 0 <= qy < h):
        return False
    inv = 1.0 / (2.0 * sigma * sigma)
    for jy in range(max(0, qy - _WINDOW), min(h, qy + _WINDOW + 1)):
        for jx in range(max(0, qx - _WINDOW), min(w, qx + _WINDOW + 1)):
            g = math.exp(-((jx - mx) ** 2 + (jy - my) ** 2) * inv)
            if g > grid[jy, jx]:
                grid[jy, jx] = g
    return True


def encode_center(lines: list[LineSegment], geom: ImageGeometry, sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    """Gaussian center heatmap, overlaps fused by per-cell maximum."""
    grid = np.zeros((geom.map_height, geom.map_width), dtype=np.float32)
    skipped = 0
    for line in lines:
        if not _splat_gaussian(grid, *_map_center(line), sigma):
            skipped += 1
    if skipped:
        logger.warning("encode_center: skipped %d line(s) with center outside the map", skipped)
    return grid


def _window_winners(lines, geom):
    """Assign each supervised cell the line whose center is nearest.

    Every line claims the 3x3 window around its center cell.  When windows
    collide the winner is the line with the smaller (distance^2, endpoints)
    key, which makes the result independent of input order.
    """
    h, w = geom.map_height, geom.map_width
    winners: dict[tuple[int, int], tuple[tuple, LineSegment]] = {}
    skipped = 0
    for line in lines:
        mx, my = _map_center(line)
        qx, qy = _nearest_cell(mx, my)
        if not (0 <= qx < w and 0 <= qy < h):
            skipped += 1
            continue
        tail = (line.start.x, line.start.y, line.end.x, line.end.y)
        for jy in range(max(0, qy - _WINDOW), min(h, qy + _WINDOW + 1)):
            for jx in range(max(0, qx - _WINDOW), min(w, qx + _WINDOW + 1)):
                key = ((jx - mx) ** 2 + (jy - my) ** 2, *tail)
                cell = (jy, jx)
                if cell not in winners or key < winners[cell][0]:
                    winners[cell] = (key, line)
    return winners, skipped


def encode_displacement(lines: list[LineSegment], geom: ImageGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Four displacement channels plus their supervision mask.

    At every cell q of a line's 3x3 center window the stored offsets are
    start/2 - q and end/2 - q, i.e. relative to the cell itself.
    """
    disp = np.zeros((4, geom.map_height, geom.map_width), dtype=np.float32)
    mask = np.zeros((geom.map_height, geom.map_width), dtype=np.float32)
    winners, skipped = _window_winners(lines, geom)
    for (row, col), (_key, line) in winners.items():
        disp[0, row, col] = line.start.x / 2.0 - col
        disp[1, row, col] = line.start.y / 2.0 - row
        disp[2, row, col] = line.end.x / 2.0 - col
        disp[3, row, col] = line.end.y / 2.0 - row
        mask[row, col] = 1.0
    if skipped:
        logger.warning("encode_displacement: skipped %d line(s) with center outside the map", skipped)
    return disp, mask


def encode_length_degree(lines: list[LineSegment], geom: ImageGeometry) -> np.ndarray:
    """Normalized length and degree, written uniformly over each 3x3 window."""
    out = np.zeros((2, geom.map_height, geom.map_width), dtype=np.float32)
    winners, skipped = _window_winners(lines, geom)
    cache: dict[int, tuple[float, float]] = {}
    for (row, col), (_key, line) in winners.items():
        vals = cache.get(id(line))
        if vals is None:
            length, degree = length_and_degree(line)
            vals = (normalize_length(length, geom), normalize_degree(degree))
            cache[id(line)] = vals
        out[0, row, col] = vals[0]
        out[1, row, col] = vals[1]
    if skipped:
        logger.warning("encode_length_degree: skipped %d line(s) with center outside the map", skipped)
    return out


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    """8-connected integer line trace from (x0, y0) to (x1, y1), inclusive."""
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize_lines(lines: list[LineSegment], shape: tuple[int, int], scale: float = 1.0) -> np.ndarray:
    """Binary raster of segments on a (height, width) grid.

    Endpoint coordinates are divided by ``scale`` and rounded to the nearest
    cell before tracing; cells outside the grid are ignored.
    """
    grid = np.zeros(shape, dtype=np.uint8)
    h, w = shape
    for line in lines:
        x0, y0 = _nearest_cell(line.start.x / scale, line.start.y / scale)
        x1, y1 = _nearest_cell(line.end.x / scale, line.end.y / scale)
        for x, y in _bresenham(x0, y0, x1, y1):
            if 0 <= x < w and 0 <= y < h:
                grid[y, x] = 1
    return grid


def encode_segmentation(lines: list[LineSegment], geom: ImageGeometry, sigma: float = GAUSSIAN_SIGMA) -> SegMaps:
    """Junction heatmap over distinct endpoints and a binary line raster."""
    junction = np.zeros((geom.map_height, geom.map_width), dtype=np.float32)
    endpoints = {(line.start.x, line.start.y) for line in lines}
    endpoints |= {(line.end.x, line.end.y) for line in lines}
    skipped = 0
    for x, y in sorted(endpoints):
        if not _splat_gaussian(junction, x / 2.0, y / 2.0, sigma):
            skipped += 1
    if skipped:
        logger.warning("encode_segmentation: skipped %d endpoint(s) outside the map", skipped)
    line_map = rasterize_lines(lines, (geom.map_height, geom.map_width), scale=2.0).astype(np.float32)
    return SegMaps(junction=junction, line=line_map)


def encode_tp_stack(lines: list[LineSegment], geom: ImageGeometry) -> MapStack:
    """Assemble the full 7-channel stack for one list of segments."""
    stack = MapStack.zeros(geom)
    stack.data[CENTER] = encode_center(lines, geom)
    disp, _ = encode_displacement(lines, geom)
    stack.data[DISP_SX : DISP_EY + 1] = disp
    stack.data[LENGTH : DEGREE + 1] = encode_length_degree(lines, geom)
    return stack


def build_gt(lines: list[LineSegment], geom: ImageGeometry, mu: float) -> GtBundle:
    """Encode one annotation into TP, SoL, and segmentation ground truth.

    The TP stack encodes the original segments, the SoL stack encodes the
    concatenated subparts of every segment split with base length ``mu``,
    and the masks flag every supervised (nonzero-center) cell.
    """
    canon = [canonicalize(line) for line in lines]
    tp = encode_tp_stack(canon, geom)
    subparts = [part for line in canon for part in sol_split(line, mu)]
    sol = encode_tp_stack(subparts, geom)
    seg = encode_segmentation(canon, geom)
    tp_mask = (tp.center > 0).astype(np.float32)
    sol_mask = (sol.center > 0).astype(np.float32)
    return GtBundle(tp=tp, sol=sol, seg=seg, tp_mask=tp_mask, sol_mask=sol_mask)
