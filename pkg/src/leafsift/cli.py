"""``leafsift`` command-line interface.

Subcommands: segment, keypoints, patch, index, train-toy, infer, evaluate,
costs, report.  Exit status 0 on success, 1 on usage errors (one-line reason
on stderr), 2 on data errors.

Configuration is layered: built-in defaults, then an INI-style ``--config``
file with ``[segmentation]``, ``[sift]``, ``[patch]`` and ``[pipeline]``
sections (``key = value``, ``#`` comments), then command-line flags.  The
``LEAFSIFT_THREADS`` environment variable overrides the worker count from
any source.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import DegenerateClass, LeafsiftError
from .imaging import RgbImage, read_image, to_grayscale, write_ppm
from .metrics import (
    confusion_matrix, metrics_csv, render_report, roc_curve_ovr, summary_metrics,
)
from .nn import build_architecture, layer_costs, load_weights, save_weights
from .patching import LabeledIndex, PatchConfig, extract_patches, scan_dataset, split_dataset
from .pipeline import (
    PipelineConfig, PredictionRow, classify_image, classify_items,
    parse_predictions_csv, predictions_csv, train_log_csv, train_toy,
)
from .segmentation import SegmentationConfig, remove_background
from .sift import SiftParams, detect_and_describe, detect_keypoints, draw_keypoints

KEYPOINT_CSV_HEADER = "x,y,scale,orientation,response"
MANIFEST_HEADER = (
    "patch_file,source_image,class_id,split,center_x,center_y,source_side,response"
)
COSTS_HEADER = "layer,params,macs,out_shape"
INDEX_HEADER = "path,class_id,class_name,split"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


# --- configuration layering -------------------------------------------------------

_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(value: str, target_type) -> object:
    if target_type is bool:
        try:
            return _BOOL_STRINGS[value.strip().lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {value!r}") from None
    return target_type(value)


def _section_kwargs(parser: configparser.ConfigParser, section: str, cls) -> dict:
    if not parser.has_section(section):
        return {}
    known = {f.name: f.type for f in fields(cls)}
    types = {"color_tolerance": float, "border_margin": int,
             "n_octaves": int, "scales_per_octave": int, "base_sigma": float,
             "assumed_camera_sigma": float, "contrast_threshold": float,
             "edge_ratio": float, "max_interp_steps": int, "upsample": bool,
             "scale_multiplier": float, "patch_side": int, "max_patches": int,
             "nms_factor": float}
    out = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise LeafsiftError(f"unknown config key [{section}] {key}")
        out[key] = _coerce(raw, types[key])
    return out


def load_pipeline_config(path: str | None, overrides: dict | None = None) -> PipelineConfig:
    """defaults <- config file <- flag overrides (None flags are ignored)."""
    seg_kw: dict = {}
    sift_kw: dict = {}
    patch_kw: dict = {}
    pipe_kw: dict = {}
    if path:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        with open(path) as fh:
            parser.read_file(fh)
        seg_kw = _section_kwargs(parser, "segmentation", SegmentationConfig)
        sift_kw = _section_kwargs(parser, "sift", SiftParams)
        patch_kw = _section_kwargs(parser, "patch", PatchConfig)
        if parser.has_section("pipeline"):
            pipe_types = {"architecture": str, "weights": str, "workers": int,
                          "aggregation": str, "seed": int}
            for key, raw in parser.items("pipeline"):
                if key not in pipe_types:
                    raise LeafsiftError(f"unknown config key [pipeline] {key}")
                pipe_kw[key] = _coerce(raw, pipe_types[key])

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        section, name = key.split(".", 1)
        {"segmentation": seg_kw, "sift": sift_kw, "patch": patch_kw, "pipeline": pipe_kw}[
            section
        ][name] = value

    cfg = PipelineConfig(
        segmentation=SegmentationConfig(**seg_kw),
        sift=SiftParams(**sift_kw),
        patch=PatchConfig(**patch_kw),
        architecture=pipe_kw.get("architecture", "cnn_lbp"),
        weights_path=pipe_kw.get("weights"),
        aggregation=pipe_kw.get("aggregation", "mean_softmax"),
        workers=pipe_kw.get("workers", 1),
        seed=pipe_kw.get("seed", 42),
    )
    env_threads = os.environ.get("LEAFSIFT_THREADS")
    if env_threads:
        cfg.workers = int(env_threads)
    return cfg


def _add_config_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI-style configuration file")


def _add_segmentation_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--color-tolerance", type=float, default=None)
    sub.add_argument("--border-margin", type=int, default=None)


def _add_sift_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n-octaves", type=int, default=None)
    sub.add_argument("--scales-per-octave", type=int, default=None)
    sub.add_argument("--base-sigma", type=float, default=None)
    sub.add_argument("--contrast-threshold", type=float, default=None)
    sub.add_argument("--edge-ratio", type=float, default=None)
    sub.add_argument("--upsample", choices=["true", "false"], default=None)


def _add_patch_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--scale-multiplier", type=float, default=None)
    sub.add_argument("--patch-side", type=int, default=None)
    sub.add_argument("--max-patches", type=int, default=None)
    sub.add_argument("--nms-factor", type=float, default=None)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        "segmentation.color_tolerance": getattr(args, "color_tolerance", None),
        "segmentation.border_margin": getattr(args, "border_margin", None),
        "sift.n_octaves": getattr(args, "n_octaves", None),
        "sift.scales_per_octave": getattr(args, "scales_per_octave", None),
        "sift.base_sigma": getattr(args, "base_sigma", None),
        "sift.contrast_threshold": getattr(args, "contrast_threshold", None),
        "sift.edge_ratio": getattr(args, "edge_ratio", None),
        "patch.scale_multiplier": getattr(args, "scale_multiplier", None),
        "patch.patch_side": getattr(args, "patch_side", None),
        "patch.max_patches": getattr(args, "max_patches", None),
        "patch.nms_factor": getattr(args, "nms_factor", None),
        "pipeline.architecture": getattr(args, "arch", None),
        "pipeline.weights": getattr(args, "weights", None),
        "pipeline.workers": getattr(args, "workers", None),
        "pipeline.seed": getattr(args, "seed", None),
    }
    upsample = getattr(args, "upsample", None)
    if upsample is not None:
        overrides["sift.upsample"] = upsample == "true"
    return load_pipeline_config(getattr(args, "config", None), overrides)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _class_names(args: argparse.Namespace, count: int) -> list[str]:
    labels_path = getattr(args, "labels", None)
    if labels_path:
        names = [ln.strip() for ln in Path(labels_path).read_text().splitlines() if ln.strip()]
        if len(names) != count:
            raise LeafsiftError(f"{labels_path} has {len(names)} names, expected {count}")
        return names
    return [f"class_{i}" for i in range(count)]


# --- subcommands -------------------------------------------------------------------

def _cmd_segment(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    img = read_image(args.input)
    masked, mask = remove_background(img, cfg.segmentation)
    write_ppm(args.output, masked)
    if args.mask_out:
        flags = (mask.flags[:, :, None] * np.uint8(255)).repeat(3, axis=2)
        write_ppm(args.mask_out, RgbImage(flags))
    return 0


def keypoint_csv_lines(pairs) -> str:
    lines = [KEYPOINT_CSV_HEADER]
    lines += [
        f"{kp.x:.6f},{kp.y:.6f},{kp.scale:.6f},{kp.orientation:.6f},{kp.response:.6f}"
        for kp, _ in pairs
    ]
    return "\n".join(lines) + "\n"


def _cmd_keypoints(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    img = read_image(args.input)
    if args.segment:
        img, _ = remove_background(img, cfg.segmentation)
    pairs = detect_and_describe(to_grayscale(img), cfg.sift)
    _emit(keypoint_csv_lines(pairs), args.output)
    if args.annotate:
        write_ppm(args.annotate, draw_keypoints(img, [kp for kp, _ in pairs]))
    return 0


def _extract_for_image(img: RgbImage, cfg: PipelineConfig):
    masked, _ = remove_background(img, cfg.segmentation)
    kps = detect_keypoints(to_grayscale(masked), cfg.sift)
    return extract_patches(masked, kps, cfg.patch)


def _cmd_patch(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = [MANIFEST_HEADER]

    def emit_patches(img_path: Path, rel: str, class_id: int, split: str) -> None:
        patches = _extract_for_image(read_image(img_path), cfg)
        stem = Path(rel).stem
        for i, patch in enumerate(patches):
            name = f"{stem}_p{i:02d}.ppm"
            write_ppm(outdir / name, patch.pixels)
            manifest.append(
                f"{name},{rel},{class_id},{split},{patch.source_center[0]:.2f},"
                f"{patch.source_center[1]:.2f},{patch.source_side},{patch.response:.6f}"
            )

    if args.input:
        emit_patches(Path(args.input), Path(args.input).name, -1, "train")
    else:
        if not args.data:
            raise _UsageError("patch requires --data or --input")
        index = split_dataset(scan_dataset(args.data), args.train_ratio)
        for item in index.items:
            emit_patches(Path(args.data) / item.path, item.path, item.class_id, item.split)
        (outdir / "classes.txt").write_text("\n".join(index.classes) + "\n")
    (outdir / "manifest.csv").write_text("\n".join(manifest) + "\n")
    return 0


def index_csv(index: LabeledIndex) -> str:
    lines = [INDEX_HEADER]
    lines += [
        f"{it.path},{it.class_id},{index.classes[it.class_id]},{it.split}"
        for it in index.items
    ]
    return "\n".join(lines) + "\n"


def _cmd_index(args: argparse.Namespace) -> int:
    index = split_dataset(scan_dataset(args.data), args.train_ratio)
    _emit(index_csv(index), args.out)
    return 0


def manifest_to_index(patches_dir: Path) -> LabeledIndex:
    """Rebuild a catalog from a patch directory's manifest."""
    from .patching import IndexItem

    lines = (patches_dir / "manifest.csv").read_text().splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise LeafsiftError(f"{patches_dir}/manifest.csv has an unexpected header")
    items = []
    max_id = 0
    for ln in lines[1:]:
        f = ln.split(",")
        patch_file, class_id, split = f[0], int(f[2]), f[3]
        max_id = max(max_id, class_id)
        items.append((patch_file, class_id, split))
    classes_file = patches_dir / "classes.txt"
    if classes_file.exists():
        classes = [c for c in classes_file.read_text().splitlines() if c]
    else:
        classes = [f"class_{i:03d}" for i in range(max_id + 1)]
    return LabeledIndex(
        classes=classes,
        items=[IndexItem(p, c, s) for p, c, s in sorted(items)],
    )


def _cmd_train_toy(args: argparse.Namespace) -> int:
    patches_dir = Path(args.patches)
    index = manifest_to_index(patches_dir)
    _, weights, log = train_toy(
        index, patches_dir, epochs=args.epochs, lr=args.lr, seed=args.seed,
        batch_size=args.batch_size,
    )
    Path(args.out).write_bytes(save_weights(weights))
    _emit(train_log_csv(log), args.log)
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    spec = build_architecture(cfg.architecture, args.classes)
    weights = load_weights(Path(args.weights).read_bytes(), spec)
    cfg.class_names = _class_names(args, args.classes)
    pred = classify_image(read_image(args.input), cfg, spec, weights)
    probs = ",".join(f"{p:.6f}" for p in pred.probabilities)
    sys.stdout.write(f"{pred.class_id},{pred.class_name},{probs}\n")
    return 0


def evaluate_rows(rows: list[PredictionRow], model: str, class_names: list[str] | None = None):
    """Metrics bundle (report, matrix, curves) from prediction rows.

    ROC curves cover the classes with at least one positive and one negative
    sample; degenerate classes contribute AUC 0 by the same convention that
    maps 0/0 scores to 0.
    """
    k = rows[0].scores.size
    true = [r.true_label for r in rows]
    pred = [r.predicted_label for r in rows]
    cm = confusion_matrix(true, pred, k, class_names)
    report = summary_metrics(cm, model=model)
    curves = []
    aucs = []
    from .metrics import auc as curve_auc

    for c in range(k):
        try:
            curve = roc_curve_ovr([r.scores[c] for r in rows], true, c)
        except DegenerateClass:
            aucs.append(0.0)
            continue
        curves.append(curve)
        aucs.append(curve_auc(curve))
    report.per_class_auc = aucs
    return report, cm, curves


def _truth_overrides(path: str) -> dict[str, int]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != INDEX_HEADER:
        raise LeafsiftError(f"{path} does not look like an index CSV")
    return {f[0]: int(f[1]) for f in (ln.split(",") for ln in lines[1:]) if f[0]}


def _cmd_evaluate(args: argparse.Namespace) -> int:
    rows = parse_predictions_csv(Path(args.pred).read_text())
    if args.truth:
        truth = _truth_overrides(args.truth)
        for row in rows:
            if row.path in truth:
                row.true_label = truth[row.path]
    report, cm, curves = evaluate_rows(rows, model=args.model)
    if args.svg:
        csv_text, svg_text = render_report(report, cm, curves)
        Path(args.svg).write_text(svg_text)
    else:
        csv_text = metrics_csv(report)
    _emit(csv_text, args.out)
    return 0


def costs_csv(arch: str, class_count: int) -> str:
    spec = build_architecture(arch, class_count)
    lines = [COSTS_HEADER]
    total_params = total_macs = 0
    for cost in layer_costs(spec):
        shape = "x".join(str(d) for d in cost.out_shape[1:])
        lines.append(f"{cost.name}:{cost.kind},{cost.params},{cost.macs},{shape}")
        total_params += cost.params
        total_macs += cost.macs
    lines.append(f"total,{total_params},{total_macs},-")
    return "\n".join(lines) + "\n"


def _cmd_costs(args: argparse.Namespace) -> int:
    _emit(costs_csv(args.arch, args.classes), args.out)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    index = split_dataset(scan_dataset(args.data), args.train_ratio)
    items = index.items if args.split == "all" else index.subset(args.split)
    if not items:
        raise LeafsiftError(f"no items in split {args.split!r}")
    spec = build_architecture(cfg.architecture, len(index.classes))
    weights = load_weights(Path(args.weights).read_bytes(), spec)
    cfg.class_names = index.classes

    rows = classify_items(args.data, items, cfg, spec, weights, workers=cfg.workers)
    report, cm, curves = evaluate_rows(rows, model=cfg.architecture, class_names=index.classes)
    csv_text, svg_text = render_report(report, cm, curves)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "predictions.csv").write_text(predictions_csv(rows, len(index.classes)))
    (outdir / "metrics.csv").write_text(csv_text)
    (outdir / "report.svg").write_text(svg_text)
    return 0


# --- wiring -----------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="leafsift", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("segment", help="remove the background, writing black pixels")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mask-out", default=None)
    _add_config_flag(p)
    _add_segmentation_flags(p)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("keypoints", help="detect keypoints, dump CSV and optional overlay")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None, help="CSV path (default stdout)")
    p.add_argument("--annotate", default=None, help="write a circle-overlay PPM")
    p.add_argument("--segment", action="store_true", help="remove background first")
    _add_config_flag(p)
    _add_segmentation_flags(p)
    _add_sift_flags(p)
    p.set_defaults(func=_cmd_keypoints)

    p = sub.add_parser("patch", help="extract keypoint patches plus a manifest CSV")
    p.add_argument("--data", default=None, help="dataset root (class subdirectories)")
    p.add_argument("--input", default=None, help="single image instead of a dataset")
    p.add_argument("--outdir", required=True)
    p.add_argument("--train-ratio", type=float, default=0.8)
    _add_config_flag(p)
    _add_segmentation_flags(p)
    _add_sift_flags(p)
    _add_patch_flags(p)
    p.set_defaults(func=_cmd_patch)

    p = sub.add_parser("index", help="catalog a dataset with the hash-based split")
    p.add_argument("--data", required=True)
    p.add_argument("--train-ratio", type=float, default=0.8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("train-toy", help="train the small model on extracted patches")
    p.add_argument("--patches", required=True, help="directory produced by `patch`")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", required=True, help="weight file to write")
    p.add_argument("--log", default=None, help="epoch log CSV (default stdout)")
    p.set_defaults(func=_cmd_train_toy)

    p = sub.add_parser("infer", help="classify one image")
    p.add_argument("--arch", default=None)
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--labels", default=None, help="class-name file, one per line")
    _add_config_flag(p)
    _add_segmentation_flags(p)
    _add_sift_flags(p)
    _add_patch_flags(p)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("evaluate", help="metrics from a predictions CSV")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", default=None, help="index CSV overriding true labels")
    p.add_argument("--model", default="model")
    p.add_argument("--out", default=None, help="metrics CSV path (default stdout)")
    p.add_argument("--svg", default=None, help="also render the SVG report here")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("costs", help="per-layer parameter and MAC table")
    p.add_argument("--arch", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_costs)

    p = sub.add_parser("report", help="classify a dataset and write the full report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--arch", default=None)
    p.add_argument("--split", choices=["train", "val", "all"], default="val")
    p.add_argument("--train-ratio", type=float, default=0.8)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_config_flag(p)
    _add_segmentation_flags(p)
    _add_sift_flags(p)
    _add_patch_flags(p)
    p.set_defaults(func=_cmd_report)

    return parser


def run_subcommand(argv: list[str] | None = None) -> int:
    """Parse and dispatch; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise _UsageError("a subcommand is required")
        return args.func(args)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return 1
    except (LeafsiftError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
