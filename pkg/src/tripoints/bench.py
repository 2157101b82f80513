"""Decode throughput benchmark.

Builds a synthetic TP stack with a known number of surviving centers and
times the full decode (suppression, extraction, line generation) for every
available kernel backend, single-threaded.
"""

from __future__ import annotations

import math
import statistics
import time

import numpy as np

from .backend import available_backends
from .decode import DecodeConfig, generate_lines
from .geometry import ImageGeometry, LineSegment, Point, canonicalize
from .maps import CENTER, MapStack, encode_tp_stack

__all__ = ["spaced_random_lines", "synthetic_tp_stack", "run_decode_benchmark"]


def spaced_random_lines(
    geom: ImageGeometry,
    n: int,
    rng: np.random.Generator,
    min_length: float = 8.0,
    max_length: float = 48.0,
) -> list[LineSegment]:
    """Random canonical segments whose 3x3 center windows never collide.

    Center cells are drawn without replacement from a grid with 3-cell
    spacing, keeping enough border margin that endpoints stay inside the
    image.
    """
    margin = int(math.ceil((max_length / 2.0 + 2.0) / 2.0))
    xs = np.arange(margin, geom.map_width - margin, 3)
    ys = np.arange(margin, geom.map_height - margin, 3)
    if n > len(xs) * len(ys):
        raise ValueError(f"cannot place {n} spaced lines on a {geom.map_width}x{geom.map_height} map")
    chosen = rng.choice(len(xs) * len(ys), size=n, replace=False)
    lines = []
    for flat in chosen:
        cx = xs[flat % len(xs)] * 2.0 + rng.uniform(-0.9, 0.9)
        cy = ys[flat // len(xs)] * 2.0 + rng.uniform(-0.9, 0.9)
        angle = rng.uniform(-math.pi / 2.0, math.pi / 2.0)
        half = rng.uniform(min_length, max_length) / 2.0
        dx = half * math.cos(angle)
        dy = half * math.sin(angle)
        lines.append(canonicalize(LineSegment(Point(cx - dx, cy - dy), Point(cx + dx, cy + dy))))
    return lines


def synthetic_tp_stack(map_size: int, n_centers: int, seed: int = 0) -> tuple[MapStack, ImageGeometry]:
    """A TP stack with exactly ``n_centers`` decodable peaks.

    The center channel is reshaped into logit-like values (positives well
    above, background well below the decode threshold) so the benchmark
    exercises the same path as real model output.
    """
    geom = ImageGeometry(map_size * 2, map_size * 2)
    rng = np.random.default_rng(seed)
    lines = spaced_random_lines(geom, n_centers, rng) if n_centers else []
    stack = encode_tp_stack(lines, geom)
    center = stack.data[CENTER]
    stack.data[CENTER] = np.where(center > 0, center * 8.0 - 4.0, -12.0).astype(np.float32)
    return stack, geom


def run_decode_benchmark(
    map_size: int = 256,
    n_centers: int = 200,
    repetitions: int = 100,
    backends: list[str] | None = None,
    seed: int = 0,
) -> dict:
    """Time the decode path; returns per-backend min/median/p99 in ms."""
    stack, geom = synthetic_tp_stack(map_size, n_centers, seed)
    cfg = DecodeConfig(score_threshold=0.2, top_k=max(200, n_centers or 1), input_mode="logits")
    results = []
    for name in backends or available_backends():
        lines = generate_lines(stack, cfg, geom, backend=name)  # warm-up
        times_ms = []
        for _ in range(max(1, repetitions)):
            t0 = time.perf_counter()
            generate_lines(stack, cfg, geom, backend=name)
            times_ms.append((time.perf_counter() - t0) * 1000.0)
        results.append(
            {
                "backend": name,
                "decoded_lines": len(lines),
                "min_ms": min(times_ms),
                "median_ms": float(statistics.median(times_ms)),
                "p99_ms": float(np.percentile(times_ms, 99.0)),
            }
        )
    return {
        "map_size": map_size,
        "n_centers": n_centers,
        "repetitions": max(1, repetitions),
        "results": results,
    }
