import numpy as np
import pytest

from tripoints.bench import spaced_random_lines
from tripoints.decode import DecodeConfig, ScoredCenter, extract_centers, generate_lines, local_max_nms
from tripoints.geometry import ImageGeometry, LineSegment, canonicalize
from tripoints.maps import CENTER, DISP_EY, DISP_SX, MapStack, encode_tp_stack

GEOM16 = ImageGeometry(16, 16)


def nms_oracle(values, window):
    """Brute-force reference: keep a cell iff it is the row-major-first
    argmax of its own window."""
    h, w = values.shape
    r = window // 2
    out = np.zeros_like(values)
    for i in range(h):
        for j in range(w):
            neigh = [
                (ii, jj)
                for ii in range(max(0, i - r), min(h, i + r + 1))
                for jj in range(max(0, j - r), min(w, j + r + 1))
            ]
            peak = max(values[ii, jj] for ii, jj in neigh)
            if values[i, j] < peak:
                continue
            first = min((ii, jj) for ii, jj in neigh if values[ii, jj] == peak)
            if (i, j) == first:
                out[i, j] = values[i, j]
    return out


class TestLocalMaxNms:
    def test_window_one_is_identity(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(9, 7)).astype(np.float32)
        assert np.array_equal(local_max_nms(values, 1), values)

    def test_gaussian_blob_keeps_only_peak(self):
        from tripoints.maps import encode_center
        grid = encode_center([canonicalize(LineSegment.of(0, 0, 8, 8))], GEOM16)
        out = local_max_nms(grid, 3)
        assert (out > 0).sum() == 1
        assert out[2, 2] == 1.0

    def test_uniform_map_matches_oracle(self):
        values = np.ones((5, 5), dtype=np.float32)
        expected = nms_oracle(values, 3)
        assert np.array_equal(local_max_nms(values, 3), expected)
        assert (expected > 0).sum() == 1 and expected[0, 0] == 1.0

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("window", [1, 3, 5])
    def test_random_maps_match_oracle(self, seed, window):
        rng = np.random.default_rng(seed)
        # quantized values force plenty of ties
        values = rng.integers(0, 4, size=(12, 11)).astype(np.float32)
        values += rng.random((12, 11)).astype(np.float32) * (rng.random((12, 11)) < 0.4)
        assert np.array_equal(local_max_nms(values, window), nms_oracle(values, window))

    def test_fixed_point(self):
        rng = np.random.default_rng(9)
        values = rng.integers(0, 3, size=(16, 16)).astype(np.float32)
        once = local_max_nms(values, 3)
        assert np.array_equal(local_max_nms(once, 3), once)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            local_max_nms(np.zeros((4, 4), dtype=np.float32), 2)


class TestExtractCenters:
    def test_single_line_single_center(self):
        stack = encode_tp_stack([canonicalize(LineSegment.of(0, 0, 8, 8))], GEOM16)
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="raw_scores")
        centers = extract_centers(stack, cfg)
        assert centers == [ScoredCenter((2, 2), 1.0)]

    def test_all_zero_map(self):
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="raw_scores")
        assert extract_centers(MapStack.zeros(GEOM16), cfg) == []

    def test_top_k_keeps_highest(self):
        stack = MapStack.zeros(GEOM16)
        stack.data[CENTER, 1, 1] = 0.9
        stack.data[CENTER, 6, 6] = 0.6
        cfg = DecodeConfig(score_threshold=0.5, top_k=1, input_mode="raw_scores")
        centers = extract_centers(stack, cfg)
        assert len(centers) == 1
        assert centers[0].cell == (1, 1)
        assert centers[0].score == pytest.approx(0.9)

    def test_logits_mode_applies_sigmoid(self):
        stack = MapStack.zeros(GEOM16)
        stack.data[CENTER] = -10.0
        stack.data[CENTER, 3, 3] = 2.0
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="logits")
        centers = extract_centers(stack, cfg)
        assert len(centers) == 1
        assert centers[0].score == pytest.approx(1.0 / (1.0 + np.exp(-2.0)))

    def test_descending_order_row_major_ties(self):
        stack = MapStack.zeros(GEOM16)
        stack.data[CENTER, 5, 5] = 0.7
        stack.data[CENTER, 1, 1] = 0.7
        stack.data[CENTER, 3, 3] = 0.9
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="raw_scores")
        cells = [c.cell for c in extract_centers(stack, cfg)]
        assert cells == [(3, 3), (1, 1), (5, 5)]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DecodeConfig(score_threshold=0.0)
        with pytest.raises(ValueError):
            DecodeConfig(top_k=0)
        with pytest.raises(ValueError):
            DecodeConfig(input_mode="scores")
        with pytest.raises(ValueError):
            DecodeConfig(nms_window=4)


class TestGenerateLines:
    def test_displacement_arithmetic(self):
        stack = MapStack.zeros(GEOM16)
        stack.data[CENTER, 0, 2] = 1.0
        stack.data[DISP_SX : DISP_EY + 1, 0, 2] = np.array([-2.0, 0.0, 2.0, 0.0])
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="raw_scores")
        lines = generate_lines(stack, cfg, GEOM16)
        assert len(lines) == 1
        line = lines[0]
        assert (line.start.x, line.start.y, line.end.x, line.end.y) == (0, 0, 8, 0)
        assert line.score == 1.0
        assert (line.center.x, line.center.y) == (4.0, 0.0)

    def test_zero_displacement_dropped(self):
        stack = MapStack.zeros(GEOM16)
        stack.data[CENTER, 4, 4] = 1.0
        cfg = DecodeConfig(score_threshold=0.5, top_k=10, input_mode="raw_scores")
        assert generate_lines(stack, cfg, GEOM16) == []

    def test_geometry_mismatch_rejected(self):
        stack = MapStack.zeros(GEOM16)
        with pytest.raises(ValueError):
            generate_lines(stack, DecodeConfig(), ImageGeometry(32, 32))

    def test_round_trip_random_lines(self):
        geom = ImageGeometry(512, 512)
        rng = np.random.default_rng(77)
        lines = spaced_random_lines(geom, 60, rng)
        stack = encode_tp_stack(lines, geom)
        cfg = DecodeConfig(score_threshold=0.5, top_k=200, input_mode="raw_scores")
        decoded = generate_lines(stack, cfg, geom)
        assert len(decoded) == len(lines)
        decoded_sorted = sorted(decoded, key=lambda l: (l.start.x, l.start.y))
        source_sorted = sorted(lines, key=lambda l: (l.start.x, l.start.y))
        for got, want in zip(decoded_sorted, source_sorted):
            assert got.start.x == pytest.approx(want.start.x, abs=1e-3)
            assert got.start.y == pytest.approx(want.start.y, abs=1e-3)
            assert got.end.x == pytest.approx(want.end.x, abs=1e-3)
            assert got.end.y == pytest.approx(want.end.y, abs=1e-3)

    def test_threshold_monotonicity(self):
        geom = ImageGeometry(256, 256)
        rng = np.random.default_rng(5)
        lines = spaced_random_lines(geom, 30, rng)
        stack = encode_tp_stack(lines, geom)
        previous = None
        for threshold in (0.2, 0.5, 0.8, 0.95):
            cfg = DecodeConfig(score_threshold=threshold, top_k=200, input_mode="raw_scores")
            got = {
                (l.start.x, l.start.y, l.end.x, l.end.y) for l in generate_lines(stack, cfg, geom)
            }
            if previous is not None:
                assert got <= previous
            previous = got

    def test_deterministic(self):
        geom = ImageGeometry(128, 128)
        rng = np.random.default_rng(13)
        stack = MapStack(rng.normal(size=(7, 64, 64)).astype(np.float32))
        cfg = DecodeConfig(score_threshold=0.3, top_k=50, input_mode="logits")
        a = generate_lines(stack, cfg, geom)
        b = generate_lines(stack, cfg, geom)
        assert a == b
