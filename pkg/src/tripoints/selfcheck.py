"""Built-in verification suites.

Each check replays one of the package's correctness arguments from scratch:
analytic gradients against central finite differences, the encode/decode
round trip, split constants, the matching boundary, a brute-force AP
oracle, suppression idempotence, and backend agreement.  ``inject_bug``
deliberately corrupts one named check so the failure path can be tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import available_backends, get_kernels
from .bench import spaced_random_lines, synthetic_tp_stack
from .decode import DecodeConfig, generate_lines, local_max_nms
from .geometry import ImageGeometry, LineSegment, canonicalize, sol_split
from .loss import masked_smooth_l1, match_lines, separated_bce
from .maps import encode_tp_stack
from .metrics import structural_ap

__all__ = ["CheckResult", "CHECKS", "run_all", "format_report"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _central_diff(fn, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * step)
    return grad


def _max_rel_err(analytic: np.ndarray, numeric: np.ndarray, exclude: np.ndarray | None = None) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    err = np.abs(analytic - numeric) / denom
    if exclude is not None:
        err = err[~exclude]
    return float(err.max()) if err.size else 0.0


def _check_bce_gradient(rng, perturb):
    worst = 0.0
    for _ in range(20):
        f = rng.normal(0.0, 2.0, size=(8, 8))
        w = rng.uniform(0.1, 1.0, size=(8, 8)) * (rng.random((8, 8)) < 0.3)
        analytic = separated_bce(f, w, 1.0, 30.0, with_gradient=True).gradient
        if perturb:
            analytic = analytic + 1e-2
        numeric = _central_diff(lambda x: separated_bce(x, w, 1.0, 30.0).value, f)
        worst = max(worst, _max_rel_err(analytic, numeric))
    return worst < 1e-4, f"max rel err {worst:.3e}"


def _check_smooth_l1_gradient(rng, perturb):
    worst = 0.0
    for _ in range(20):
        pred = rng.normal(0.0, 1.5, size=(8, 8))
        gt = rng.normal(0.0, 1.5, size=(8, 8))
        mask = (rng.random((8, 8)) < 0.5).astype(np.float64)
        analytic = masked_smooth_l1(pred, gt, mask, with_gradient=True).gradient
        if perturb:
            analytic = analytic + 1e-2
        numeric = _central_diff(lambda x: masked_smooth_l1(x, gt, mask).value, pred)
        near_kink = (np.abs(np.abs(pred - gt) - 1.0) < 1e-2) & (mask != 0)
        worst = max(worst, _max_rel_err(analytic, numeric, exclude=near_kink))
    return worst < 1e-4, f"max rel err {worst:.3e} (kink cells excluded)"


def _check_roundtrip(rng, perturb):
    geom = ImageGeometry(512, 512)
    lines = spaced_random_lines(geom, 100, rng)
    stack = encode_tp_stack(lines, geom)
    cfg = DecodeConfig(score_threshold=0.5, top_k=200, input_mode="raw_scores")
    decoded = generate_lines(stack, cfg, geom)
    if len(decoded) != len(lines):
        return False, f"expected {len(lines)} decoded lines, got {len(decoded)}"
    worst = 0.0
    for src in lines:
        best = math.inf
        for dec in decoded:
            err = max(
                abs(dec.start.x - src.start.x),
                abs(dec.start.y - src.start.y),
                abs(dec.end.x - src.end.x),
                abs(dec.end.y - src.end.y),
            )
            best = min(best, err)
        worst = max(worst, best)
    if perturb:
        worst += 0.1
    return worst <= 1e-3, f"max endpoint err {worst:.3e} px over {len(lines)} lines"


def _check_sol_split(rng, perturb):
    mu = 320 * 0.125
    unsplit = sol_split(LineSegment.of(0, 0, 40, 0), mu)
    three = sol_split(LineSegment.of(0, 0, 80, 0), mu)
    expected = [(0.0, 40.0), (20.0, 60.0), (40.0, 80.0)]
    got = [(s.start.x, s.end.x) for s in three]
    if perturb:
        got = got[:-1]
    ok = (
        mu == 40.0
        and len(unsplit) == 1
        and unsplit[0].end.x == 40.0
        and got == expected
        and all(abs((b - a) - 40.0) < 1e-9 for a, b in got)
    )
    return ok, f"mu={mu}, subparts={got}"


def _check_match_boundary(rng, perturb):
    gt = [canonicalize(LineSegment.of(100, 100, 200, 100))]
    at_gamma = [canonicalize(LineSegment.of(100, 105, 200, 105))]
    inside = [canonicalize(LineSegment.of(100, 104.99, 200, 104.99))]
    gamma = 5.0 if not perturb else 5.01
    rejected = not match_lines(at_gamma, gt, gamma).pairs
    accepted = len(match_lines(inside, gt, 5.0).pairs) == 1
    return rejected and accepted, f"5.0 px matched={not rejected}, 4.99 px matched={accepted}"


def _sap_bruteforce(preds, gts, theta, geom):
    # independent re-implementation: per-rank greedy matching and a direct
    # all-point interpolation of the PR curve
    sx, sy = 128.0 / geom.width, 128.0 / geom.height
    order = sorted(range(len(preds)), key=lambda i: -preds[i].score)
    used = [False] * len(gts)
    flags = []
    for i in order:
        p = preds[i]
        ps = (p.start.x * sx, p.start.y * sy)
        pe = (p.end.x * sx, p.end.y * sy)
        best_j, best_d = -1, math.inf
        for j, g in enumerate(gts):
            if used[j]:
                continue
            gs = (g.start.x * sx, g.start.y * sy)
            ge = (g.end.x * sx, g.end.y * sy)
            d1 = (ps[0] - gs[0]) ** 2 + (ps[1] - gs[1]) ** 2 + (pe[0] - ge[0]) ** 2 + (pe[1] - ge[1]) ** 2
            d2 = (ps[0] - ge[0]) ** 2 + (ps[1] - ge[1]) ** 2 + (pe[0] - gs[0]) ** 2 + (pe[1] - gs[1]) ** 2
            d = min(d1, d2)
            if d < best_d:
                best_d, best_j = d, j
        if best_j >= 0 and best_d <= theta:
            used[best_j] = True
            flags.append(True)
        else:
            flags.append(False)
    recalls, precisions = [], []
    tp = 0
    for rank, hit in enumerate(flags, start=1):
        tp += hit
        precisions.append(tp / rank)
        recalls.append(tp / len(gts))
    ap = 0.0
    prev_r = 0.0
    for idx in range(len(recalls)):
        r = recalls[idx]
        if r > prev_r:
            ap += (r - prev_r) * max(precisions[idx:])
            prev_r = r
    return ap


def _random_instance(rng, geom):
    n_gt = int(rng.integers(1, 9))
    gts = spaced_random_lines(geom, n_gt, rng, min_length=20, max_length=60)
    preds = []
    for g in gts:
        if rng.random() < 0.8:
            jx, jy = rng.normal(0.0, 4.0, size=2)
            preds.append(
                canonicalize(
                    LineSegment.of(
                        g.start.x + jx, g.start.y + jy, g.end.x + jx, g.end.y + jy,
                        score=float(rng.random()),
                    )
                )
            )
    for extra in spaced_random_lines(geom, int(rng.integers(0, 3)), rng, min_length=20, max_length=60):
        preds.append(canonicalize(LineSegment(extra.start, extra.end, score=float(rng.random()))))
    return preds, gts


def _check_sap_oracle(rng, perturb):
    geom = ImageGeometry(512, 512)
    for _ in range(50):
        preds, gts = _random_instance(rng, geom)
        fast5 = structural_ap(preds, gts, 5.0, geom)
        fast10 = structural_ap(preds, gts, 10.0, geom)
        if perturb:
            fast10 += 1e-3
        if fast5 != _sap_bruteforce(preds, gts, 5.0, geom):
            return False, "theta=5 mismatch with brute force"
        if fast10 != _sap_bruteforce(preds, gts, 10.0, geom):
            return False, "theta=10 mismatch with brute force"
        if fast10 < fast5:
            return False, "AP not monotone in theta"
    return True, "50 instances match brute force, monotone in theta"


def _check_nms_fixed_point(rng, perturb):
    for _ in range(20):
        values = rng.integers(0, 5, size=(32, 32)).astype(np.float32)
        values += (rng.random((32, 32)) < 0.5) * rng.random((32, 32)).astype(np.float32)
        once = local_max_nms(values, 3)
        twice = local_max_nms(once, 3)
        if perturb:
            twice = twice + 1.0
        if not np.array_equal(once, twice):
            return False, "suppression is not idempotent"
    return True, "idempotent on 20 random maps"


def _check_backend_parity(rng, perturb):
    names = available_backends()
    if len(names) < 2:
        return True, "skipped: single backend"
    stack, geom = synthetic_tp_stack(64, 30, seed=int(rng.integers(0, 2**31)))
    cfg = DecodeConfig(score_threshold=0.2, top_k=200, input_mode="logits")
    ref_lines = generate_lines(stack, cfg, geom, backend=names[0])
    values = rng.normal(0.0, 1.0, size=(40, 40)).astype(np.float32)
    ref_nms = get_kernels(names[0]).local_max_nms(values, 3)
    for name in names[1:]:
        if not np.array_equal(ref_nms, get_kernels(name).local_max_nms(values, 3)):
            return False, f"suppression differs between {names[0]} and {name}"
        other = generate_lines(stack, cfg, geom, backend=name)
        if perturb:
            other = other[:-1]
        if len(other) != len(ref_lines) or any(
            a.start != b.start or a.end != b.end or a.score != b.score
            for a, b in zip(ref_lines, other)
        ):
            return False, f"decode differs between {names[0]} and {name}"
    return True, f"backends agree: {', '.join(names)}"


CHECKS = {
    "bce-gradient": _check_bce_gradient,
    "smooth-l1-gradient": _check_smooth_l1_gradient,
    "decode-roundtrip": _check_roundtrip,
    "sol-split": _check_sol_split,
    "match-boundary": _check_match_boundary,
    "sap-oracle": _check_sap_oracle,
    "nms-fixed-point": _check_nms_fixed_point,
    "backend-parity": _check_backend_parity,
}


def run_all(seed: int = 0, inject_bug: str | None = None) -> list[CheckResult]:
    if inject_bug is not None and inject_bug not in CHECKS:
        raise ValueError(f"unknown check {inject_bug!r}; valid names: {', '.join(CHECKS)}")
    results = []
    for idx, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, idx])
        passed, detail = fn(rng, perturb=(inject_bug == name))
        results.append(CheckResult(name, passed, detail))
    return results


def format_report(results: list[CheckResult], seed: int) -> str:
    lines = [f"seed: {seed}"]
    for r in results:
        lines.append(f"{r.name}: {'PASS' if r.passed else 'FAIL'} ({r.detail})")
    n_pass = sum(r.passed for r in results)
    lines.append(f"selfcheck: {n_pass}/{len(results)} passed")
    return "\n".join(lines) + "\n"
