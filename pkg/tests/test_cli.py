import json
import subprocess
import sys

import numpy as np
import pytest

from tripoints.cli import EXIT_CHECK_FAILURE, EXIT_INPUT_ERROR, EXIT_OK, main
from tripoints.formats import read_tensor, write_tensor
from tripoints.maps import CENTER

ANN = {
    "images": [
        {"id": "a", "width": 64, "height": 64, "lines": [[8, 8, 40, 8], [16, 16, 16, 48]]},
        {"id": "b", "width": 64, "height": 64, "lines": [[10, 50, 50, 20]]},
    ]
}


@pytest.fixture
def ann_path(tmp_path):
    path = tmp_path / "ann.json"
    path.write_text(json.dumps(ANN))
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEncodeDecode:
    def test_encode_writes_tensor_files_and_manifest(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        code, _, _ = run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        assert code == EXIT_OK
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert [img["id"] for img in manifest["images"]] == ["a", "b"]
        assert manifest["mu"] == 64.0
        for img in manifest["images"]:
            for name in img["files"].values():
                assert (out_dir / name).exists()
        tp = read_tensor(out_dir / "a.tp.tnsr")
        assert tp.shape == (7, 32, 32)
        assert read_tensor(out_dir / "a.seg.tnsr").shape == (2, 32, 32)
        assert read_tensor(out_dir / "a.tp_mask.tnsr").shape == (32, 32)

    def test_decode_recovers_annotation(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        code, out, _ = run(
            capsys,
            "decode",
            "--tensor",
            out_dir / "a.tp.tnsr",
            "--input-mode",
            "raw-scores",
            "--threshold",
            "0.5",
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["width"] == doc["height"] == 64
        got = sorted(tuple(row) for row in doc["lines"])
        want = sorted(tuple(map(float, row)) for row in ANN["images"][0]["lines"])
        assert len(got) == len(want)
        for g, w in zip(got, want):
            assert g == pytest.approx(w, abs=1e-3)
        assert all(s == 1.0 for s in doc["scores"])

    def test_decode_empty_annotation(self, tmp_path, capsys):
        ann = tmp_path / "empty.json"
        ann.write_text(json.dumps({"images": [{"id": "e", "width": 32, "height": 32, "lines": []}]}))
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann, "--out", out_dir)
        code, out, _ = run(
            capsys, "decode", "--tensor", out_dir / "e.tp.tnsr", "--input-mode", "raw-scores"
        )
        assert code == EXIT_OK
        assert json.loads(out)["lines"] == []

    def test_threshold_sweep_monotone(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        counts = []
        for threshold in ("0.3", "0.6", "0.9"):
            _, out, _ = run(
                capsys,
                "decode",
                "--tensor",
                out_dir / "b.tp.tnsr",
                "--input-mode",
                "raw-scores",
                "--threshold",
                threshold,
            )
            counts.append(len(json.loads(out)["lines"]))
        assert counts == sorted(counts, reverse=True)

    def test_decode_16_channel_tensor(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        tp = read_tensor(out_dir / "a.tp.tnsr")
        sol = read_tensor(out_dir / "a.sol.tnsr")
        seg = read_tensor(out_dir / "a.seg.tnsr")
        full = np.concatenate([tp, sol, seg], axis=0)
        pred_path = tmp_path / "full.tnsr"
        write_tensor(full, pred_path)
        code, out, _ = run(
            capsys, "decode", "--tensor", pred_path, "--input-mode", "raw-scores", "--threshold", "0.5"
        )
        assert code == EXIT_OK
        assert len(json.loads(out)["lines"]) == 2


class TestEval:
    def test_perfect_predictions(self, tmp_path, ann_path, capsys):
        preds = {
            "images": [
                {"id": img["id"], "lines": img["lines"], "scores": [1.0] * len(img["lines"])}
                for img in ANN["images"]
            ]
        }
        pred_path = tmp_path / "preds.json"
        pred_path.write_text(json.dumps(preds))
        code, out, _ = run(capsys, "eval", "--pred", pred_path, "--annotations", ann_path)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["sap"]["5"] == 1.0
        assert doc["sap"]["10"] == 1.0
        assert doc["f_heatmap"] == 1.0
        assert doc["images"] == 2 and doc["predictions"] == 3

    def test_shuffled_gt_same_report(self, tmp_path, ann_path, capsys):
        preds = {
            "images": [
                {"id": img["id"], "lines": img["lines"], "scores": [0.9] * len(img["lines"])}
                for img in ANN["images"]
            ]
        }
        pred_path = tmp_path / "preds.json"
        pred_path.write_text(json.dumps(preds))
        shuffled = {
            "images": [
                {**img, "lines": list(reversed(img["lines"]))} for img in reversed(ANN["images"])
            ]
        }
        shuffled_path = tmp_path / "shuffled.json"
        shuffled_path.write_text(json.dumps(shuffled))
        _, out1, _ = run(capsys, "eval", "--pred", pred_path, "--annotations", ann_path)
        _, out2, _ = run(capsys, "eval", "--pred", pred_path, "--annotations", shuffled_path)
        assert out1 == out2

    def test_unknown_image_id(self, tmp_path, ann_path, capsys):
        pred_path = tmp_path / "preds.json"
        pred_path.write_text(json.dumps({"images": [{"id": "zz", "lines": [[0, 0, 5, 5]]}]}))
        code, _, err = run(capsys, "eval", "--pred", pred_path, "--annotations", ann_path)
        assert code == EXIT_INPUT_ERROR
        assert "zz" in err


class TestLoss:
    def test_loss_on_inflated_gt(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        tp = read_tensor(out_dir / "a.tp.tnsr")
        sol = read_tensor(out_dir / "a.sol.tnsr")
        seg = read_tensor(out_dir / "a.seg.tnsr")
        for stack in (tp, sol):
            stack[CENTER] = np.where(stack[CENTER] > 0, 40.0 + stack[CENTER], -40.0)
        seg = np.where(seg > 0, 40.0, -40.0).astype(np.float32)
        pred_path = tmp_path / "pred.tnsr"
        write_tensor(np.concatenate([tp, sol, seg], axis=0), pred_path)
        code, out, _ = run(
            capsys, "loss", "--pred", pred_path, "--gt-dir", out_dir, "--image-id", "a"
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["total"] < 1e-4
        assert doc["gamma"] == 5.0
        recomposed = (
            doc["components"]["tp"]
            + doc["components"]["sol"]
            + doc["components"]["junction"]
            + doc["components"]["line"]
        )
        assert doc["total"] == recomposed

    def test_missing_gt_dir(self, tmp_path, capsys):
        pred_path = tmp_path / "pred.tnsr"
        write_tensor(np.zeros((16, 8, 8), dtype=np.float32), pred_path)
        code, _, err = run(
            capsys, "loss", "--pred", pred_path, "--gt-dir", tmp_path / "nope", "--image-id", "a"
        )
        assert code == EXIT_INPUT_ERROR
        assert err


class TestSelfcheckAndBench:
    def test_selfcheck_passes(self, capsys):
        code, out, _ = run(capsys, "selfcheck", "--seed", "0")
        assert code == EXIT_OK
        assert "selfcheck: 8/8 passed" in out

    def test_selfcheck_deterministic_output(self, capsys):
        _, out1, _ = run(capsys, "selfcheck", "--seed", "7")
        _, out2, _ = run(capsys, "selfcheck", "--seed", "7")
        assert out1 == out2

    def test_injected_bug_fails_named_check(self, capsys):
        code, out, _ = run(capsys, "selfcheck", "--seed", "0", "--inject-bug", "bce-gradient")
        assert code == EXIT_CHECK_FAILURE
        assert "bce-gradient: FAIL" in out

    def test_unknown_check_name_is_input_error(self, capsys):
        code, _, err = run(capsys, "selfcheck", "--inject-bug", "nope")
        assert code == EXIT_INPUT_ERROR
        assert "nope" in err

    def test_bench_reports_stats(self, capsys):
        code, out, _ = run(
            capsys,
            "bench",
            "--map-size", "64",
            "--n-centers", "10",
            "--repetitions", "3",
            "--backend", "python",
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["repetitions"] == 3
        (result,) = doc["results"]
        assert result["backend"] == "python"
        assert result["decoded_lines"] == 10
        assert result["min_ms"] <= result["median_ms"] <= result["p99_ms"]

    def test_bench_single_repetition_and_no_centers(self, capsys):
        code, out, _ = run(
            capsys,
            "bench",
            "--map-size", "64",
            "--n-centers", "0",
            "--repetitions", "1",
            "--backend", "python",
        )
        assert code == EXIT_OK
        (result,) = json.loads(out)["results"]
        assert result["decoded_lines"] == 0


class TestAugment:
    def test_horizontal_flip(self, tmp_path, capsys):
        ann = tmp_path / "ann.json"
        ann.write_text(
            json.dumps(
                {"images": [{"id": "a", "width": 320, "height": 320, "lines": [[10, 10, 100, 10]]}]}
            )
        )
        out_path = tmp_path / "flipped.json"
        code, out, _ = run(capsys, "augment", "--annotations", ann, "--out", out_path, "--flip-h")
        assert code == EXIT_OK
        assert json.loads(out) == {"images": 1, "lines_in": 1, "lines_out": 1}
        doc = json.loads(out_path.read_text())
        assert doc["images"][0]["lines"] == [[220.0, 10.0, 310.0, 10.0]]

    def test_rotation_drops_nothing_inside(self, tmp_path, ann_path, capsys):
        out_path = tmp_path / "rot.json"
        code, out, _ = run(
            capsys, "augment", "--annotations", ann_path, "--out", out_path, "--rotate", "10",
        )
        assert code == EXIT_OK
        summary = json.loads(out)
        assert summary["lines_out"] == summary["lines_in"]


class TestConfig:
    def test_flags_override_config_file(self, tmp_path, capsys):
        # one raw peak at 0.5: config threshold 0.4 keeps it, the flag
        # override at 0.6 must drop it
        stack = np.zeros((7, 16, 16), dtype=np.float32)
        stack[CENTER, 8, 8] = 0.5
        stack[3, 8, 8] = -2.0
        stack[5, 8, 8] = 2.0
        tensor = tmp_path / "t.tnsr"
        write_tensor(stack, tensor)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"decode": {"score_threshold": 0.4, "input_mode": "raw_scores"}}))
        _, out, _ = run(capsys, "decode", "--tensor", tensor, "--config", config)
        assert len(json.loads(out)["lines"]) == 1
        _, out, _ = run(
            capsys, "decode", "--tensor", tensor, "--config", config, "--threshold", "0.6"
        )
        assert len(json.loads(out)["lines"]) == 0

    def test_config_gamma_flows_to_loss(self, tmp_path, ann_path, capsys):
        out_dir = tmp_path / "gt"
        run(capsys, "encode-gt", "--annotations", ann_path, "--out", out_dir)
        pred = np.zeros((16, 32, 32), dtype=np.float32)
        pred_path = tmp_path / "pred.tnsr"
        write_tensor(pred, pred_path)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"gamma": 7.5}))
        code, out, _ = run(
            capsys,
            "loss",
            "--pred", pred_path,
            "--gt-dir", out_dir,
            "--image-id", "a",
            "--config", config,
        )
        assert code == EXIT_OK
        assert json.loads(out)["gamma"] == 7.5

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"gammma": 5}))
        code, _, err = run(capsys, "selfcheck", "--config", config)
        assert code == EXIT_INPUT_ERROR
        assert "gammma" in err


class TestErrors:
    def test_missing_annotation_file(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "encode-gt", "--annotations", tmp_path / "nope.json", "--out", tmp_path / "o"
        )
        assert code == EXIT_INPUT_ERROR
        assert err

    def test_corrupt_tensor(self, tmp_path, capsys):
        bad = tmp_path / "bad.tnsr"
        bad.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        code, _, err = run(capsys, "decode", "--tensor", bad)
        assert code == EXIT_INPUT_ERROR
        assert "magic" in err.lower()

    def test_odd_image_size_rejected(self, tmp_path, capsys):
        ann = tmp_path / "ann.json"
        ann.write_text(json.dumps({"images": [{"id": "a", "width": 63, "height": 64, "lines": []}]}))
        code, _, err = run(capsys, "encode-gt", "--annotations", ann, "--out", tmp_path / "o")
        assert code == EXIT_INPUT_ERROR
        assert "even" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "tripoints", "selfcheck", "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "selfcheck: 8/8 passed" in proc.stdout
