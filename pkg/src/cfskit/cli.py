"""Command-line entry point: simulate / separate / evaluate / fuse / sideloss-check.

Exit codes: 0 success, 2 configuration error, 3 input parse error, 4 runtime
failure. All randomness flows from a single --seed so pipelines reproduce
byte-identically (images are deterministic per build of the toolkit).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ToolConfig, dump_config, load_config, with_fusion_weights
from .evaluation import (
    Detection,
    GroundTruth,
    evaluate,
    load_detections,
    load_groundtruth,
    save_detections,
)
from .formats import ParseError, parse_classmap
from .fusion import fuse
from .separator import extract_crops, separate
from .side_loss import reference_report
from .simulator import ImagePool, LayoutError, PoolError, generate_dataset

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key = value config file")
    p.add_argument("--seed", type=int, help="global random seed")
    p.add_argument(
        "--dump-config", type=Path, metavar="PATH",
        help="write the effective configuration to PATH",
    )


def _resolve_config(args: argparse.Namespace, overrides: "dict[str, object]") -> ToolConfig:
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    cfg = load_config(getattr(args, "config", None), overrides)
    dump_path = getattr(args, "dump_config", None)
    if dump_path is not None:
        Path(dump_path).write_text(dump_config(cfg))
    return cfg


def cmd_simulate(args: argparse.Namespace) -> int:
    overrides: dict[str, object] = {}
    if args.total is not None:
        overrides["sim.total_figures"] = args.total
    if args.intra is not None:
        overrides["sim.intra_figures"] = args.intra
    if args.gutter is not None:
        overrides["sim.gutter"] = args.gutter
    if args.background is not None:
        overrides["sim.background"] = args.background
    cfg = _resolve_config(args, overrides)
    pool = ImagePool.from_classmap(args.pool)
    manifest = generate_dataset(cfg.sim, pool, args.out, cfg.seed)
    modes = manifest["figures_per_mode"]
    print(
        f"wrote {manifest['total_figures']} figures "
        f"({modes['intra']} intra, {modes['multi']} multi), "
        f"{manifest['subfigures']} subfigures -> {args.out}"
    )
    for cid, count in sorted(manifest["subfigures_per_class"].items()):
        name = manifest["class_names"].get(cid, cid)
        print(f"  class {cid} ({name}): {count}")
    return 0


def cmd_separate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {"extract.conf_thr": args.conf_thr})
    src = Path(args.images)
    if src.is_dir():
        paths = sorted(p for p in src.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    elif src.exists():
        paths = [src]
    else:
        raise ParseError(src, None, "no such image file or directory")
    detections: list[Detection] = []
    for p in paths:
        dets = separate(p, cfg.cut, image_id=p.stem)
        detections.extend(dets)
        if args.crops is not None:
            extract_crops(p, dets, cfg.conf_thr, args.crops)
    save_detections(detections, args.out)
    print(f"separated {len(paths)} images into {len(detections)} regions -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {})
    detections = load_detections(args.detections)
    ground_truths = load_groundtruth(args.gt)
    if args.class_agnostic:
        detections = [Detection(d.image_id, d.box, 0, d.confidence) for d in detections]
        ground_truths = [GroundTruth(g.image_id, g.box, 0) for g in ground_truths]
    report = evaluate(detections, ground_truths, size_buckets=cfg.size_buckets)
    names = None
    if args.classmap is not None:
        names = {label.id: label.name for label, _ in parse_classmap(args.classmap)}
    sys.stdout.write(report.table(names))
    if args.out is not None:
        Path(args.out).write_text(report.to_json())
        print(f"report -> {args.out}")
    if args.debug_overlay is not None:
        _write_overlays(args.debug_overlay, Path(args.gt), detections, ground_truths)
    return 0


def _write_overlays(out_dir: Path, gt_source: Path, detections, ground_truths) -> None:
    from PIL import Image, ImageDraw

    images_dir = gt_source / "images"
    if not images_dir.is_dir():
        print("debug overlays need a dataset directory ground truth; skipped", file=sys.stderr)
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_image: dict[str, tuple[list, list]] = {}
    for g in ground_truths:
        by_image.setdefault(g.image_id, ([], []))[0].append(g)
    for d in detections:
        by_image.setdefault(d.image_id, ([], []))[1].append(d)
    for image_id, (gts, dets) in sorted(by_image.items()):
        path = next(
            (images_dir / (image_id + s) for s in _IMAGE_SUFFIXES if (images_dir / (image_id + s)).exists()),
            None,
        )
        if path is None:
            continue
        with Image.open(path) as img:
            canvas = img.convert("RGB")
        draw = ImageDraw.Draw(canvas)
        for g in gts:
            draw.rectangle(g.box.as_tuple(), outline=(0, 200, 0), width=2)
        for d in dets:
            draw.rectangle(d.box.as_tuple(), outline=(220, 0, 0), width=1)
        canvas.save(out_dir / f"{image_id}.png")


def cmd_fuse(args: argparse.Namespace) -> int:
    overrides: dict[str, object] = {}
    if args.iou_thr is not None:
        overrides["fuse.iou_thr"] = args.iou_thr
    if args.skip_thr is not None:
        overrides["fuse.skip_box_thr"] = args.skip_thr
    if args.no_count_scaling:
        overrides["fuse.conf_scaling"] = "none"
    cfg = _resolve_config(args, overrides)
    weights = None
    if args.weights is not None:
        try:
            weights = tuple(float(v) for v in args.weights.split(","))
        except ValueError as e:
            raise ConfigError(f"bad --weights value: {e}") from e
    per_model = [load_detections(p) for p in args.inputs]
    try:
        fused = fuse(per_model, with_fusion_weights(cfg, weights))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    save_detections(fused, args.out)
    total_in = sum(len(d) for d in per_model)
    print(f"fused {total_in} detections from {len(per_model)} models into {len(fused)} -> {args.out}")
    return 0


def cmd_sideloss_check(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args, {"loss.num_cls": args.num_cls})
    report = reference_report(num_cls=cfg.loss.num_cls)
    if args.out is not None:
        Path(args.out).write_text(report)
        print(f"reference report -> {args.out}")
    else:
        sys.stdout.write(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfskit",
        description=(
            "Compound-figure dataset engineering: simulate annotated pseudo "
            "compound figures, separate them with a rule-based baseline, "
            "evaluate detections, and fuse multi-model results."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a pseudo compound-figure dataset")
    _common_flags(p)
    p.add_argument("--pool", required=True, type=Path, help="class-map file (`id name dir` lines)")
    p.add_argument("--out", required=True, type=Path, help="output dataset directory")
    p.add_argument("--total", type=int, help="number of figures (default 7000)")
    p.add_argument("--intra", type=int, help="intra-class figure count (default 2000)")
    p.add_argument("--gutter", type=int, help="background gap between subfigures, px")
    p.add_argument("--background", help="canvas background color (default white)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("separate", help="run the rule-based separator over images")
    _common_flags(p)
    p.add_argument("images", type=Path, help="image file or directory")
    p.add_argument("--out", required=True, type=Path, help="detection-results JSON to write")
    p.add_argument("--crops", type=Path, help="also write crops above --conf-thr here")
    p.add_argument("--conf-thr", type=float, default=None, help="crop confidence floor (default 0.7)")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    _common_flags(p)
    p.add_argument("detections", type=Path, help="detection-results JSON")
    p.add_argument("--gt", required=True, type=Path, help="dataset directory or ground-truth JSON")
    p.add_argument("--out", type=Path, help="write the JSON report here")
    p.add_argument("--classmap", type=Path, help="class-map file for display names")
    p.add_argument("--class-agnostic", action="store_true", help="collapse all classes before scoring")
    p.add_argument("--debug-overlay", type=Path, help="write box overlays (dataset-dir ground truth only)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fuse", help="weighted-boxes-fuse several detection files")
    _common_flags(p)
    p.add_argument("inputs", nargs="+", type=Path, help="detection-results JSON files, one per model")
    p.add_argument("--out", required=True, type=Path, help="fused detection-results JSON")
    p.add_argument("--iou-thr", type=float, help="cluster joining IoU threshold (default 0.55)")
    p.add_argument("--skip-thr", type=float, help="drop input boxes below this confidence")
    p.add_argument("--weights", help="comma-separated per-model weights")
    p.add_argument("--no-count-scaling", action="store_true", help="disable cluster-size confidence scaling")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("sideloss-check", help="emit the side-loss reference value report")
    _common_flags(p)
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--num-cls", type=int, default=None, help="class count for the weight table (default 4)")
    p.set_defaults(func=cmd_sideloss_check)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 3
    except (LayoutError, PoolError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
