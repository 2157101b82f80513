"""Command-line surface.

Subcommands: encode-gt, augment, decode, loss, eval, selfcheck, bench.
Configuration comes from built-in defaults, then an optional JSON config
file, then flags; later sources win.  Exit codes: 0 success, 2 input
error, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import selfcheck as selfcheck_mod
from .decode import DecodeConfig, generate_lines
from .formats import (
    AnnotationError,
    AnnotationSet,
    ImageAnnotation,
    TensorFormatError,
    read_annotations,
    read_tensor,
    write_annotations,
    write_tensor,
)
from .geometry import (
    ImageGeometry,
    LineSegment,
    affine_augment,
    canonicalize,
    compose,
    horizontal_flip,
    identity_transform,
    rotation,
    scaling,
    shearing,
    vertical_flip,
)
from .loss import (
    CENTER_WEIGHTS,
    JUNCTION_WEIGHTS,
    LINE_WEIGHTS,
    PredBundle,
    total_loss,
)
from .maps import GtBundle, MapStack, SegMaps, build_gt
from .metrics import evaluate_dataset

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_CHECK_FAILURE = 3

_ID_PATTERN = re.compile(r"[A-Za-z0-9._-]+")
_GT_SUFFIXES = ("tp", "sol", "seg", "tp_mask", "sol_mask")


@dataclass
class RunConfig:
    """Resolved run parameters; defaults match the trained-model constants."""

    input_size: int = 512
    mu_ratio: float = 0.125
    gamma: float = 5.0
    lambda_center: tuple[float, float] = CENTER_WEIGHTS
    lambda_junction: tuple[float, float] = JUNCTION_WEIGHTS
    lambda_line: tuple[float, float] = LINE_WEIGHTS
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    seed: int = 0

    @property
    def mu(self) -> float:
        return self.input_size * self.mu_ratio


def _config_from_file(path: Path) -> RunConfig:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"config {path}: not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ValueError(f"config {path}: top level must be an object")
    cfg = RunConfig()
    decode_kwargs = {}
    for key, value in doc.items():
        if key in ("input_size", "seed"):
            setattr(cfg, key, int(value))
        elif key in ("mu_ratio", "gamma"):
            setattr(cfg, key, float(value))
        elif key in ("lambda_center", "lambda_junction", "lambda_line"):
            setattr(cfg, key, (float(value[0]), float(value[1])))
        elif key == "decode":
            if not isinstance(value, dict):
                raise ValueError(f"config {path}: 'decode' must be an object")
            for dkey, dval in value.items():
                if dkey not in ("score_threshold", "top_k", "input_mode", "nms_window"):
                    raise ValueError(f"config {path}: unknown decode key {dkey!r}")
                decode_kwargs[dkey] = dval
        else:
            raise ValueError(f"config {path}: unknown key {key!r}")
    cfg.decode = DecodeConfig(**decode_kwargs)
    return cfg


def resolve_config(args) -> RunConfig:
    cfg = _config_from_file(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "input_size", None) is not None:
        cfg.input_size = args.input_size
    if getattr(args, "mu_ratio", None) is not None:
        cfg.mu_ratio = args.mu_ratio
    if getattr(args, "gamma", None) is not None:
        cfg.gamma = args.gamma
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    decode_overrides = {}
    if getattr(args, "threshold", None) is not None:
        decode_overrides["score_threshold"] = args.threshold
    if getattr(args, "top_k", None) is not None:
        decode_overrides["top_k"] = args.top_k
    if getattr(args, "nms_window", None) is not None:
        decode_overrides["nms_window"] = args.nms_window
    if getattr(args, "input_mode", None) is not None:
        decode_overrides["input_mode"] = args.input_mode.replace("-", "_")
    if decode_overrides:
        cfg.decode = replace(cfg.decode, **decode_overrides)
    if cfg.input_size not in (320, 512):
        raise ValueError(f"input_size must be 320 or 512, got {cfg.input_size}")
    return cfg


def _emit(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _check_image_id(img_id: str) -> str:
    if not _ID_PATTERN.fullmatch(img_id):
        raise ValueError(f"image id {img_id!r} is not filename-safe")
    return img_id


def cmd_encode_gt(args) -> int:
    cfg = resolve_config(args)
    annotations = read_annotations(args.annotations)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"mu": cfg.mu, "input_size": cfg.input_size, "images": []}
    for img in sorted(annotations.images, key=lambda im: im.id):
        _check_image_id(img.id)
        geom = ImageGeometry(img.width, img.height)
        bundle = build_gt(img.segments(), geom, cfg.mu)
        files = {}
        tensors = {
            "tp": bundle.tp.data,
            "sol": bundle.sol.data,
            "seg": np.stack([bundle.seg.junction, bundle.seg.line]),
            "tp_mask": bundle.tp_mask,
            "sol_mask": bundle.sol_mask,
        }
        for suffix in _GT_SUFFIXES:
            name = f"{img.id}.{suffix}.tnsr"
            write_tensor(tensors[suffix], out_dir / name)
            files[suffix] = name
        manifest["images"].append(
            {"id": img.id, "width": img.width, "height": img.height, "lines": len(img.lines), "files": files}
        )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    sys.stdout.write(f"encoded {len(manifest['images'])} image(s) into {out_dir}\n")
    return EXIT_OK


def _tp_stack_from_tensor(arr: np.ndarray) -> MapStack:
    if arr.ndim != 3 or arr.shape[0] not in (7, 16):
        raise ValueError(f"expected a (7, h, w) or (16, h, w) tensor, got shape {arr.shape}")
    return MapStack(arr[:7])


def cmd_decode(args) -> int:
    cfg = resolve_config(args)
    arr = read_tensor(args.tensor)
    stack = _tp_stack_from_tensor(arr)
    geom = ImageGeometry(2 * stack.width, 2 * stack.height)
    lines = generate_lines(stack, cfg.decode, geom)
    payload = {
        "width": geom.width,
        "height": geom.height,
        "lines": [[l.start.x, l.start.y, l.end.x, l.end.y] for l in lines],
        "scores": [l.score for l in lines],
    }
    _emit(payload, args.out)
    return EXIT_OK


def _pred_entries(doc) -> list[dict]:
    if isinstance(doc, dict) and "images" in doc:
        entries = doc["images"]
        if not isinstance(entries, list):
            raise ValueError('prediction file: "images" must be a list')
        return entries
    if isinstance(doc, dict) and "lines" in doc:
        return [doc]
    raise ValueError('prediction file must contain "images" or a single "lines" object')


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    annotations = read_annotations(args.annotations)
    by_id = {img.id: img for img in annotations.images}
    doc = json.loads(Path(args.pred).read_text(encoding="utf-8"))
    entries = _pred_entries(doc)
    items = []
    n_preds = 0
    for entry in sorted(entries, key=lambda e: str(e.get("id", ""))):
        img_id = entry.get("id")
        if img_id is None:
            if len(annotations.images) != 1:
                raise ValueError("prediction entry has no id and the annotation set is not a single image")
            img_id = annotations.images[0].id
        if img_id not in by_id:
            raise ValueError(f"prediction references unknown image id {img_id!r}")
        img = by_id[img_id]
        scores = entry.get("scores", [1.0] * len(entry["lines"]))
        if len(scores) != len(entry["lines"]):
            raise ValueError(f"image {img_id!r}: scores and lines differ in length")
        preds = [
            canonicalize(LineSegment.of(*row, score=float(s)))
            for row, s in zip(entry["lines"], scores)
        ]
        gts = [canonicalize(seg) for seg in img.segments()]
        items.append((preds, gts, ImageGeometry(img.width, img.height)))
        n_preds += len(preds)
    report = evaluate_dataset(items)
    payload = report.to_dict()
    payload["images"] = len(items)
    payload["predictions"] = n_preds
    _emit(payload, args.out)
    return EXIT_OK


def _read_gt_bundle(gt_dir: Path, image_id: str) -> GtBundle:
    arrays = {}
    for suffix in _GT_SUFFIXES:
        arrays[suffix] = read_tensor(gt_dir / f"{image_id}.{suffix}.tnsr")
    return GtBundle(
        tp=MapStack(arrays["tp"]),
        sol=MapStack(arrays["sol"]),
        seg=SegMaps(junction=arrays["seg"][0], line=arrays["seg"][1]),
        tp_mask=arrays["tp_mask"],
        sol_mask=arrays["sol_mask"],
    )


def cmd_loss(args) -> int:
    cfg = resolve_config(args)
    pred = PredBundle.from_array(read_tensor(args.pred))
    gt = _read_gt_bundle(Path(args.gt_dir), _check_image_id(args.image_id))
    if gt.tp.data.shape != pred.tp.data.shape:
        raise ValueError(
            f"prediction maps {pred.tp.data.shape} do not match GT maps {gt.tp.data.shape}"
        )
    geom = ImageGeometry(2 * pred.tp.width, 2 * pred.tp.height)
    gt_cfg = DecodeConfig(score_threshold=0.5, top_k=pred.tp.width * pred.tp.height, input_mode="raw_scores")
    gt_lines = generate_lines(gt.tp, gt_cfg, geom)
    sol_lines = generate_lines(gt.sol, gt_cfg, geom)
    decoded_tp = generate_lines(pred.tp, cfg.decode, geom)
    decoded_sol = generate_lines(pred.sol, cfg.decode, geom)
    result = total_loss(
        pred, gt, decoded_tp, gt_lines, decoded_sol, sol_lines=sol_lines, gamma=cfg.gamma
    )
    payload = {"total": result.value, "components": result.components, "gamma": cfg.gamma}
    _emit(payload, args.out)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    cfg = resolve_config(args)
    results = selfcheck_mod.run_all(seed=cfg.seed, inject_bug=args.inject_bug)
    sys.stdout.write(selfcheck_mod.format_report(results, cfg.seed))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILURE


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    backends = None if args.backend == "all" else [args.backend]
    report = bench_mod.run_decode_benchmark(
        map_size=args.map_size,
        n_centers=args.n_centers,
        repetitions=args.repetitions,
        backends=backends,
        seed=cfg.seed,
    )
    _emit(report, args.out)
    return EXIT_OK


def _augment_transform(args, geom: ImageGeometry) -> np.ndarray:
    # applied in a fixed order: flips, then shear, then rotation, then scale
    steps = [identity_transform()]
    if args.flip_h:
        steps.append(horizontal_flip(geom))
    if args.flip_v:
        steps.append(vertical_flip(geom))
    if args.shear is not None:
        steps.append(shearing(args.shear[0], args.shear[1], geom))
    if args.rotate is not None:
        steps.append(rotation(args.rotate, geom))
    if args.scale is not None:
        steps.append(scaling(args.scale, args.scale, geom))
    return compose(*reversed(steps))


def cmd_augment(args) -> int:
    annotations = read_annotations(args.annotations)
    lines_in = 0
    lines_out = 0
    out_images = []
    for img in annotations.images:
        geom = ImageGeometry(img.width, img.height)
        transform = _augment_transform(args, geom)
        mapped = affine_augment(img.segments(), transform, geom, min_length=args.min_length)
        lines_in += len(img.lines)
        lines_out += len(mapped)
        out_images.append(
            ImageAnnotation(
                id=img.id,
                width=img.width,
                height=img.height,
                lines=[[l.start.x, l.start.y, l.end.x, l.end.y] for l in mapped],
            )
        )
    write_annotations(AnnotationSet(images=out_images), args.out)
    sys.stdout.write(
        json.dumps({"images": len(out_images), "lines_in": lines_in, "lines_out": lines_out}) + "\n"
    )
    return EXIT_OK


def _shear_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) == 1:
        return (float(parts[0]), 0.0)
    if len(parts) == 2:
        return (float(parts[0]), float(parts[1]))
    raise argparse.ArgumentTypeError("shear must be KX or KX,KY")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file; flags override it")
    common.add_argument("--input-size", type=int, choices=(320, 512), help="model input side in pixels")
    common.add_argument("--mu-ratio", type=float, help="base subpart length as a fraction of input size")
    common.add_argument("--gamma", type=float, help="endpoint matching threshold in pixels")
    common.add_argument("--threshold", type=float, help="decode score threshold")
    common.add_argument("--top-k", type=int, help="maximum decoded segments")
    common.add_argument("--nms-window", type=int, help="suppression window in cells (odd)")
    common.add_argument("--input-mode", choices=("logits", "raw-scores"), help="how to read the center channel")
    common.add_argument("--seed", type=int, help="seed for randomized commands")

    parser = argparse.ArgumentParser(prog="tripoints", description="Tri-point line segment map toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode-gt", parents=[common], help="encode annotations into GT tensor files")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_encode_gt)

    p = sub.add_parser("augment", parents=[common], help="apply an affine transform to annotations")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="output annotation file")
    p.add_argument("--flip-h", action="store_true", help="mirror horizontally")
    p.add_argument("--flip-v", action="store_true", help="mirror vertically")
    p.add_argument("--rotate", type=float, help="rotation about the image center, degrees")
    p.add_argument("--scale", type=float, help="uniform scale about the image center")
    p.add_argument("--shear", type=_shear_pair, help="shear factors KX or KX,KY")
    p.add_argument("--min-length", type=float, default=4.0, help="drop clipped segments shorter than this")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("decode", parents=[common], help="decode a TP tensor into line segments")
    p.add_argument("--tensor", type=Path, required=True, help="(7, h, w) or (16, h, w) tensor file")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("loss", parents=[common], help="evaluate training losses for stored tensors")
    p.add_argument("--pred", type=Path, required=True, help="(16, h, w) prediction tensor file")
    p.add_argument("--gt-dir", type=Path, required=True, help="directory produced by encode-gt")
    p.add_argument("--image-id", required=True)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", parents=[common], help="score predictions against annotations")
    p.add_argument("--pred", type=Path, required=True, help="decode output or {'images': [...]} file")
    p.add_argument("--annotations", type=Path, required=True)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selfcheck", parents=[common], help="run the built-in verification suites")
    p.add_argument("--inject-bug", metavar="CHECK", help="corrupt the named check (testing hook)")
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("bench", parents=[common], help="benchmark the decode path per backend")
    p.add_argument("--map-size", type=int, default=256, help="square map side in cells")
    p.add_argument("--n-centers", type=int, default=200, help="surviving centers in the synthetic stack")
    p.add_argument("--repetitions", type=int, default=100)
    p.add_argument("--backend", choices=("all", "compiled", "python"), default="all")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TensorFormatError, AnnotationError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT_ERROR
    except (OSError, ValueError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
