"""Pure-NumPy decode kernels, the fallback when the compiled core is absent.

Both backends implement the same contract: a cell survives suppression iff
its value equals the maximum of its window and no earlier cell (row-major)
inside the window holds an equal value.  All comparisons happen on the raw
float32 values so the two backends agree bit for bit.
"""

import numpy as np
from scipy.ndimage import maximum_filter


def _survivor_mask(values: np.ndarray, window: int) -> np.ndarray:
    peak = maximum_filter(values, size=window, mode="constant", cval=-np.inf)
    keep = values >= peak
    h, w = values.shape
    r = window // 2
    for di in range(-r, 1):
        for dj in range(-r, r + 1):
            if di == 0 and dj >= 0:
                continue
            # kill cells whose window holds an equal value at an earlier
            # row-major position
            i0, i1 = max(0, -di), min(h, h - di)
            j0, j1 = max(0, -dj), min(w, w - dj)
            equal = values[i0 + di : i1 + di, j0 + dj : j1 + dj] == values[i0:i1, j0:j1]
            keep[i0:i1, j0:j1] &= ~equal
    return keep


def local_max_nms(values: np.ndarray, window: int) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float32)
    out = np.zeros_like(values)
    keep = _survivor_mask(values, window)
    out[keep] = values[keep]
    return out


def extract_survivors(values: np.ndarray, window: int, threshold: float):
    values = np.ascontiguousarray(values, dtype=np.float32)
    keep = _survivor_mask(values, window)
    keep &= values.astype(np.float64) >= threshold
    rows, cols = np.nonzero(keep)
    return rows.astype(np.int64), cols.astype(np.int64)
