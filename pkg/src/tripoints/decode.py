"""Decode a 7-channel map stack into scored, vectorized line segments.

This is the entire prediction path: suppress non-maxima on the center map,
pick the surviving cells above threshold, and add each cell's displacement
vectors to obtain the endpoints.  Only TP stacks are decoded; SoL stacks
are a training-time construct.

Thresholding and suppression compare raw map values (in logits mode the
score threshold is mapped into logit space first), so results are
bit-identical across backends; the sigmoid touches only reported scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from .geometry import ImageGeometry, LineSegment, Point, canonicalize
from .maps import MapStack

__all__ = ["ScoredCenter", "DecodeConfig", "local_max_nms", "extract_centers", "generate_lines"]

INPUT_MODES = ("logits", "raw_scores")


@dataclass(frozen=True, slots=True)
class ScoredCenter:
    """A surviving center-map cell: (row, col) plus its score."""

    cell: tuple[int, int]
    score: float


@dataclass
class DecodeConfig:
    score_threshold: float = 0.2
    top_k: int = 200
    input_mode: str = "logits"
    nms_window: int = 3

    def __post_init__(self):
        if not 0.0 < self.score_threshold < 1.0:
            raise ValueError(f"score_threshold must be in (0, 1), got {self.score_threshold}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"input_mode must be one of {INPUT_MODES}, got {self.input_mode!r}")
        if self.nms_window < 1 or self.nms_window % 2 == 0:
            raise ValueError(f"nms_window must be odd and >= 1, got {self.nms_window}")


def local_max_nms(values: np.ndarray, window: int = 3, backend: str | None = None) -> np.ndarray:
    """Zero every cell that is not the window maximum.

    Ties go to the first cell in row-major order, so the output is a fixed
    point of the operation.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError(f"expected a 2D map, got shape {values.shape}")
    return get_kernels(backend).local_max_nms(values, window)


def _as_stack(maps) -> MapStack:
    return maps if isinstance(maps, MapStack) else MapStack(maps)


def extract_centers(maps, cfg: DecodeConfig, backend: str | None = None) -> list[ScoredCenter]:
    """Suppressed, thresholded center cells sorted by descending score.

    Ties are ordered row-major and the list is truncated to ``cfg.top_k``.
    """
    stack = _as_stack(maps)
    center = np.ascontiguousarray(stack.center, dtype=np.float32)
    if cfg.input_mode == "logits":
        t = cfg.score_threshold
        raw_threshold = math.log(t / (1.0 - t))
    else:
        raw_threshold = float(cfg.score_threshold)
    rows, cols = get_kernels(backend).extract_survivors(center, cfg.nms_window, raw_threshold)
    if rows.size == 0:
        return []
    vals = center[rows, cols].astype(np.float64)
    order = np.lexsort((cols, rows, -vals))[: cfg.top_k]
    rows, cols, vals = rows[order], cols[order], vals[order]
    scores = 1.0 / (1.0 + np.exp(-vals)) if cfg.input_mode == "logits" else vals
    return [ScoredCenter((int(r), int(c)), float(s)) for r, c, s in zip(rows, cols, scores)]


def generate_lines(maps, cfg: DecodeConfig, geom: ImageGeometry, backend: str | None = None) -> list[LineSegment]:
    """Turn extracted centers plus displacements into canonical segments.

    For a center cell q the endpoints are (q + d_s(q)) * 2 and
    (q + d_e(q)) * 2 in input pixels.  Zero-length results are dropped;
    each output records its generating cell in ``center``.
    """
    stack = _as_stack(maps)
    if (stack.height, stack.width) != (geom.map_height, geom.map_width):
        raise ValueError(
            f"map stack is {stack.height}x{stack.width} but geometry expects "
            f"{geom.map_height}x{geom.map_width}"
        )
    disp = stack.displacements
    out = []
    for sc in extract_centers(stack, cfg, backend):
        row, col = sc.cell
        sx = (col + float(disp[0, row, col])) * 2.0
        sy = (row + float(disp[1, row, col])) * 2.0
        ex = (col + float(disp[2, row, col])) * 2.0
        ey = (row + float(disp[3, row, col])) * 2.0
        if sx == ex and sy == ey:
            continue
        line = LineSegment(
            Point(sx, sy), Point(ex, ey), score=sc.score, center=Point(col * 2.0, row * 2.0)
        )
        out.append(canonicalize(line))
    return out
