"""Training losses with analytic gradients with respect to the predicted maps.

Classification maps are raw (pre-sigmoid) values; regression maps are plain
values.  Losses accumulate in float64 whatever the input dtype, and every
composite sums its terms in a fixed left-to-right order so repeated
evaluation is bit-identical.

Gradients are provided for the map losses.  The matching loss is an exact
value but its gradient path runs through the non-differentiable center
extraction, so no gradient flows through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .geometry import LineSegment, Point, canonicalize, sol_split
from .maps import CENTER, DEGREE, DISP_EY, DISP_SX, GtBundle, LENGTH, MapStack

__all__ = [
    "SMOOTH_L1_BETA",
    "DEFAULT_GAMMA",
    "CENTER_WEIGHTS",
    "JUNCTION_WEIGHTS",
    "LINE_WEIGHTS",
    "LossValue",
    "MatchSet",
    "PredBundle",
    "separated_bce",
    "masked_smooth_l1",
    "match_lines",
    "matching_loss",
    "tp_loss",
    "total_loss",
]

SMOOTH_L1_BETA = 1.0
DEFAULT_GAMMA = 5.0
CENTER_WEIGHTS = (1.0, 30.0)
JUNCTION_WEIGHTS = (1.0, 30.0)
LINE_WEIGHTS = (1.0, 1.0)


@dataclass
class LossValue:
    """A scalar loss, optionally with its gradient and a term breakdown."""

    value: float
    gradient: np.ndarray | None = None
    components: dict[str, float] | None = None


@dataclass
class MatchSet:
    """(predicted, ground-truth) pairs whose endpoints both lie within gamma."""

    pairs: list[tuple[LineSegment, LineSegment]]
    gamma: float


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def separated_bce(
    feature: np.ndarray,
    gt: np.ndarray,
    lambda_pos: float = 1.0,
    lambda_neg: float = 1.0,
    with_gradient: bool = False,
) -> LossValue:
    """Binary cross-entropy with positive and negative terms normalized apart.

    Positives are the nonzero GT cells; their log-sigmoid terms are weighted
    by the GT value and averaged over the positive count, while negatives
    are averaged over the negative count.  The two means are combined as
    lambda_pos * pos + lambda_neg * neg.  An empty side contributes 0.

    Args:
        feature: Raw (pre-sigmoid) map.
        gt: Ground-truth map of the same shape.
        with_gradient: Also return d(loss)/d(feature).
    """
    f = np.asarray(feature, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if f.shape != g.shape:
        raise ValueError(f"feature shape {f.shape} != gt shape {g.shape}")
    pos = g != 0.0
    n_pos = int(pos.sum())
    n_neg = f.size - n_pos
    l_pos = float((g[pos] * _softplus(-f[pos])).sum() / n_pos) if n_pos else 0.0
    l_neg = float(_softplus(f[~pos]).sum() / n_neg) if n_neg else 0.0
    value = lambda_pos * l_pos + lambda_neg * l_neg
    gradient = None
    if with_gradient:
        s = expit(f)
        gradient = np.zeros_like(f)
        if n_pos:
            gradient[pos] = -lambda_pos * g[pos] * (1.0 - s[pos]) / n_pos
        if n_neg:
            gradient[~pos] = lambda_neg * s[~pos] / n_neg
    return LossValue(value, gradient, {"pos": l_pos, "neg": l_neg})


def masked_smooth_l1(
    pred: np.ndarray,
    gt: np.ndarray,
    mask: np.ndarray,
    with_gradient: bool = False,
) -> LossValue:
    """Mean smooth-L1 over masked cells, transition at |d| = 1.

    A 2D mask broadcasts over leading channel dimensions.  An empty mask
    yields loss 0.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"pred shape {p.shape} != gt shape {g.shape}")
    m = np.asarray(mask) != 0
    if m.shape != p.shape:
        if m.shape == p.shape[p.ndim - m.ndim :]:
            m = np.broadcast_to(m, p.shape)
        else:
            raise ValueError(f"mask shape {m.shape} does not broadcast to {p.shape}")
    n = int(m.sum())
    if n == 0:
        return LossValue(0.0, np.zeros_like(p) if with_gradient else None)
    d = p[m] - g[m]
    a = np.abs(d)
    terms = np.where(a < SMOOTH_L1_BETA, 0.5 * d * d, a - 0.5 * SMOOTH_L1_BETA)
    value = float(terms.sum() / n)
    gradient = None
    if with_gradient:
        gradient = np.zeros_like(p)
        gradient[m] = np.clip(d, -SMOOTH_L1_BETA, SMOOTH_L1_BETA) / n
    return LossValue(value, gradient)


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def match_lines(preds: list[LineSegment], gts: list[LineSegment], gamma: float = DEFAULT_GAMMA) -> MatchSet:
    """One-to-one matching of predictions to GT under the endpoint threshold.

    A pair is admissible iff both endpoint distances are strictly below
    ``gamma`` (segments must be canonical so endpoints correspond).
    Admissible pairs are assigned greedily by ascending total endpoint
    distance; distance ties fall back to input order.
    """
    candidates = []
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            ds = _dist(p.start, g.start)
            de = _dist(p.end, g.end)
            if ds < gamma and de < gamma:
                candidates.append((ds + de, i, j))
    candidates.sort()
    used_pred: set[int] = set()
    used_gt: set[int] = set()
    pairs = []
    for _total, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        pairs.append((preds[i], gts[j]))
    return MatchSet(pairs=pairs, gamma=gamma)


def _predicted_center(pred: LineSegment, center_map: np.ndarray | None) -> tuple[float, float]:
    if pred.center is not None:
        return pred.center.x, pred.center.y
    # No recorded extraction cell: quantize the midpoint to the map grid,
    # which is where the center map would place this line.
    mx = (pred.start.x + pred.end.x) / 2.0
    my = (pred.start.y + pred.end.y) / 2.0
    col = math.floor(mx / 2.0 + 0.5)
    row = math.floor(my / 2.0 + 0.5)
    if center_map is not None:
        row = min(max(row, 0), center_map.shape[0] - 1)
        col = min(max(col, 0), center_map.shape[1] - 1)
    return col * 2.0, row * 2.0


def matching_loss(matches: MatchSet, center_map: np.ndarray | None = None) -> LossValue:
    """Mean L1 distance over matched pairs at start, end, and center points.

    The center term compares the prediction's extracted center location
    against the GT midpoint.  An empty match set yields 0.
    """
    if not matches.pairs:
        return LossValue(0.0)
    total = 0.0
    for pred, gt in matches.pairs:
        cx, cy = _predicted_center(pred, center_map)
        gcx = (gt.start.x + gt.end.x) / 2.0
        gcy = (gt.start.y + gt.end.y) / 2.0
        total += (
            abs(pred.start.x - gt.start.x)
            + abs(pred.start.y - gt.start.y)
            + abs(pred.end.x - gt.end.x)
            + abs(pred.end.y - gt.end.y)
            + abs(cx - gcx)
            + abs(cy - gcy)
        )
    return LossValue(total / len(matches.pairs))


def tp_loss(
    pred: MapStack,
    gt: MapStack,
    mask: np.ndarray,
    decoded_preds: list[LineSegment],
    gt_lines: list[LineSegment],
    gamma: float = DEFAULT_GAMMA,
    center_weights: tuple[float, float] = CENTER_WEIGHTS,
    with_gradient: bool = False,
) -> LossValue:
    """Map-stack loss: center + displacement + length + degree + matching.

    Terms are summed left to right in that order.  The gradient, when
    requested, is a (7, h, w) stack; the matching term contributes none.
    """
    center = separated_bce(pred.center, gt.center, *center_weights, with_gradient=with_gradient)
    disp = masked_smooth_l1(pred.displacements, gt.displacements, mask, with_gradient=with_gradient)
    length = masked_smooth_l1(pred.length, gt.length, mask, with_gradient=with_gradient)
    degree = masked_smooth_l1(pred.degree, gt.degree, mask, with_gradient=with_gradient)
    match = matching_loss(match_lines(decoded_preds, gt_lines, gamma), pred.center)
    value = center.value + disp.value + length.value + degree.value + match.value
    gradient = None
    if with_gradient:
        gradient = np.zeros((len(pred.data), pred.height, pred.width), dtype=np.float64)
        gradient[CENTER] = center.gradient
        gradient[DISP_SX : DISP_EY + 1] = disp.gradient
        gradient[LENGTH] = length.gradient
        gradient[DEGREE] = degree.gradient
    components = {
        "center": center.value,
        "disp": disp.value,
        "length": length.value,
        "degree": degree.value,
        "match": match.value,
    }
    return LossValue(value, gradient, components)


@dataclass
class PredBundle:
    """Predicted maps for one image: TP stack, SoL stack, junction, line."""

    tp: MapStack
    sol: MapStack
    junction: np.ndarray
    line: np.ndarray

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "PredBundle":
        a = np.asarray(arr, dtype=np.float32)
        if a.ndim != 3 or a.shape[0] != 16:
            raise ValueError(f"expected a (16, h, w) prediction array, got shape {a.shape}")
        return cls(MapStack(a[0:7]), MapStack(a[7:14]), a[14], a[15])

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [self.tp.data, self.sol.data, self.junction[None], self.line[None]], axis=0
        )


def total_loss(
    pred: PredBundle,
    gt: GtBundle,
    decoded_tp: list[LineSegment],
    gt_lines: list[LineSegment],
    decoded_sol: list[LineSegment] = (),
    sol_lines: list[LineSegment] | None = None,
    mu: float | None = None,
    gamma: float = DEFAULT_GAMMA,
    with_gradient: bool = False,
) -> LossValue:
    """Full training loss: TP stack + SoL stack + junction + line terms.

    The SoL stack reuses the TP formula against subpart ground truth; its
    matching term compares ``decoded_sol`` (lines generated from the
    predicted SoL maps) against the subparts.  Pass ``sol_lines`` directly
    or give ``mu`` to derive them from ``gt_lines``.  The sum order is
    fixed: tp + sol + junction + line.
    """
    if sol_lines is None:
        if mu is None:
            raise ValueError("either sol_lines or mu is required to build subpart ground truth")
        sol_lines = [part for line in gt_lines for part in sol_split(canonicalize(line), mu)]
    tp = tp_loss(pred.tp, gt.tp, gt.tp_mask, decoded_tp, gt_lines, gamma, with_gradient=with_gradient)
    sol = tp_loss(pred.sol, gt.sol, gt.sol_mask, list(decoded_sol), sol_lines, gamma, with_gradient=with_gradient)
    junction = separated_bce(pred.junction, gt.seg.junction, *JUNCTION_WEIGHTS, with_gradient=with_gradient)
    line = separated_bce(pred.line, gt.seg.line, *LINE_WEIGHTS, with_gradient=with_gradient)
    value = tp.value + sol.value + junction.value + line.value
    gradient = None
    if with_gradient:
        h, w = pred.tp.height, pred.tp.width
        gradient = np.zeros((16, h, w), dtype=np.float64)
        gradient[0:7] = tp.gradient
        gradient[7:14] = sol.gradient
        gradient[14] = junction.gradient
        gradient[15] = line.gradient
    components = {"tp": tp.value, "sol": sol.value, "junction": junction.value, "line": line.value}
    for name, val in tp.components.items():
        components[f"tp.{name}"] = val
    for name, val in sol.components.items():
        components[f"sol.{name}"] = val
    return LossValue(value, gradient, components)
