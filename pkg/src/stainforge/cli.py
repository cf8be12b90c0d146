"""Command-line interface.

One binary, subcommand style:

    stainforge normalize       map images with paramnet or a baseline
    stainforge normalize-wsi   tiled whole-slide normalization
    stainforge benchmark       throughput harness (no I/O in the timing)
    stainforge metrics         QSSIM/SSIM/PSNR tables over directories
    stainforge train-mapper    supervised mapper fit on paired images
    stainforge fit-reference   fit Reinhard/Macenko stats to a reference
    stainforge inspect-weights list / check a PNWT weights file
    stainforge montage         side-by-side labeled image strip

Exit codes: 0 success, 1 partial failure (some files failed), 2
configuration error. Batch commands keep going past per-file errors and
report a summary. STAINFORGE_WORKERS sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from . import __version__
from .baselines import (
    ReinhardStats,
    StainBasis,
    macenko_apply,
    macenko_fit,
    reinhard_apply,
    reinhard_fit,
)
from .core import PixelImage, StainforgeError, decode_u8, encode_u8, resize_bilinear
from .mapper import params_to_json
from .metrics import MetricReport, evaluate_set
from .normalizer import (
    REFERENCE_GPU_FPS,
    benchmark,
    normalize_slide,
    open_slide_dir,
    open_slide_image,
    write_slide_dir,
)
from .predictor import expected_tensors, normalize_one
from .raster import IMAGE_EXTENSIONS, read_image_u8, write_image_u8
from .training import LrSchedule, fit_mapper
from .weights import load_weights

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("STAINFORGE_WORKERS", "1")))
    except ValueError:
        return 1


def _list_images(path: str) -> list[str]:
    if os.path.isfile(path):
        return [path]
    if not os.path.isdir(path):
        return []
    return sorted(
        os.path.join(path, name)
        for name in os.listdir(path)
        if name.lower().endswith(IMAGE_EXTENSIONS)
    )


def _load_store(path: str):
    with open(path, "rb") as fh:
        return load_weights(fh.read())


# ---------------------------------------------------------------- normalize


def _make_baseline_fn(args):
    """Build an image -> image callable for reinhard/macenko."""
    if args.stats:
        with open(args.stats, encoding="utf-8") as fh:
            text = fh.read()
        tgt = ReinhardStats.from_json(text) if args.method == "reinhard" else StainBasis.from_json(text)
    elif args.reference:
        ref = decode_u8(read_image_u8(args.reference))
        tgt = reinhard_fit(ref) if args.method == "reinhard" else macenko_fit(ref)
    else:
        raise StainforgeError(f"--method {args.method} needs --reference or --stats")

    if args.method == "reinhard":
        return lambda img: reinhard_apply(img, reinhard_fit(img), tgt)
    return lambda img: macenko_apply(img, macenko_fit(img), tgt)


def cmd_normalize(args) -> int:
    files = _list_images(args.input)
    if not files:
        print(f"error: no images found at {args.input}", file=sys.stderr)
        return EXIT_CONFIG

    if args.method == "paramnet":
        if not args.weights:
            print("error: --method paramnet requires --weights", file=sys.stderr)
            return EXIT_CONFIG
        try:
            store = _load_store(args.weights)
        except (StainforgeError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        apply_fn = lambda img: normalize_one(img, store)
    else:
        try:
            apply_fn = _make_baseline_fn(args)
        except (StainforgeError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    out_dir = args.output
    single_out = len(files) == 1 and os.path.splitext(out_dir)[1].lower() in IMAGE_EXTENSIONS
    if not single_out:
        os.makedirs(out_dir, exist_ok=True)

    failures = 0
    for path in files:
        t0 = time.perf_counter()
        try:
            img = decode_u8(read_image_u8(path))
            result = encode_u8(apply_fn(img))
            dest = out_dir if single_out else os.path.join(out_dir, os.path.basename(path))
            write_image_u8(dest, result)
        except (StainforgeError, OSError) as exc:
            failures += 1
            print(f"FAIL {path}: {exc}", file=sys.stderr)
            continue
        print(f"{path}: {time.perf_counter() - t0:.3f}s -> {dest}")
    if failures:
        print(f"{failures}/{len(files)} files failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_normalize_wsi(args) -> int:
    try:
        store = _load_store(args.weights)
        if os.path.isdir(args.input):
            slide = open_slide_dir(args.input)
        else:
            slide = open_slide_image(args.input)
    except (StainforgeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    ext = os.path.splitext(args.output)[1].lower()
    if ext in IMAGE_EXTENSIONS:
        raster = normalize_slide(
            slide, store, tile=args.tile, workers=args.workers, use_lut=args.lut
        )
        write_image_u8(args.output, raster)
    else:
        sink = write_slide_dir(args.output, slide.width, slide.height, args.tile)
        normalize_slide(
            slide, store, tile=args.tile, workers=args.workers, use_lut=args.lut, sink=sink
        )
    mpx = slide.width * slide.height / 1e6
    dt = time.perf_counter() - t0
    print(
        f"normalized {slide.width}x{slide.height} ({mpx:.1f} Mpx) in {dt:.2f}s "
        f"[tile={args.tile} workers={args.workers} lut={'on' if args.lut else 'off'}]"
    )
    return EXIT_OK


# ---------------------------------------------------------------- benchmark


def cmd_benchmark(args) -> int:
    try:
        store = _load_store(args.weights)
    except (StainforgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    worker_counts = [int(w) for w in args.workers.split(",")]
    reports = []
    for path in ("direct", "lut"):
        for workers in worker_counts:
            reports.append(
                benchmark(
                    store,
                    tile=args.tile,
                    path=path,
                    workers=workers,
                    duration=args.duration,
                    seed=args.seed,
                )
            )

    if args.json:
        print(json.dumps([r.to_json() for r in reports], indent=2))
        return EXIT_OK

    print(f"{'path':<8}{'workers':>8}{'tiles':>8}{'wall_s':>10}{'fps':>12}{'mpx/s':>12}")
    for r in reports:
        print(
            f"{r.path:<8}{r.workers:>8}{r.tiles:>8}{r.wall_s:>10.3f}"
            f"{r.fps:>12.2f}{r.mpx_per_s:>12.2f}"
        )
    print(
        f"\nreference (GTX 1080Ti, 512x512, no I/O): "
        f"fixed 1x1-conv network {REFERENCE_GPU_FPS['stainnet']} FPS, "
        f"dynamic-parameter network {REFERENCE_GPU_FPS['paramnet']} FPS"
    )
    return EXIT_OK


# ------------------------------------------------------------------ metrics


def cmd_metrics(args) -> int:
    dirs = {"normalized": args.normalized, "target": args.target, "source": args.source}
    names: dict[str, set[str]] = {}
    for label, d in dirs.items():
        if not os.path.isdir(d):
            print(f"error: {label} directory {d} does not exist", file=sys.stderr)
            return EXIT_CONFIG
        names[label] = {os.path.basename(p) for p in _list_images(d)}

    common = sorted(names["normalized"] & names["target"] & names["source"])
    skipped = sorted(set().union(*names.values()) - set(common))
    for name in skipped:
        print(f"warning: {name} missing from some directories, skipped", file=sys.stderr)
    if not common:
        print("error: no filenames common to all three directories", file=sys.stderr)
        return EXIT_CONFIG

    normalized, targets, sources = [], [], []
    for name in common:
        normalized.append(read_image_u8(os.path.join(args.normalized, name)))
        targets.append(read_image_u8(os.path.join(args.target, name)))
        sources.append(read_image_u8(os.path.join(args.source, name)))
    report = evaluate_set(normalized, targets, sources)

    if args.json:
        blob = report.to_json()
        blob["files"] = common
        print(json.dumps(blob, indent=2))
        return EXIT_OK

    _print_metric_table(report, len(common))
    return EXIT_OK


def _fmt_pm(mean: float, std: float, digits: int = 3) -> str:
    if math.isinf(mean):
        return "inf"
    return f"{mean:.{digits}f}±{std:.{digits}f}"


def _print_metric_table(report: MetricReport, n: int) -> None:
    s = report.summary()
    print(f"{'images':<10}{'QSSIM Target':>16}{'SSIM Target':>16}{'PSNR Target':>16}{'SSIM Source':>16}")
    print(
        f"{n:<10}"
        f"{_fmt_pm(*s['qssim_target']):>16}"
        f"{_fmt_pm(*s['ssim_target']):>16}"
        f"{_fmt_pm(*s['psnr_target'], 1):>16}"
        f"{_fmt_pm(*s['ssim_source']):>16}"
    )


# ------------------------------------------------------------- train-mapper


def cmd_train_mapper(args) -> int:
    src_files = {os.path.basename(p): p for p in _list_images(args.source)}
    tgt_files = {os.path.basename(p): p for p in _list_images(args.target)}
    common = sorted(set(src_files) & set(tgt_files))
    if not common:
        print("error: no filename-matched image pairs", file=sys.stderr)
        return EXIT_CONFIG

    xs, ys = [], []
    for name in common:
        a = read_image_u8(src_files[name])
        b = read_image_u8(tgt_files[name])
        if a.shape != b.shape:
            print(f"warning: {name} shapes differ, skipped", file=sys.stderr)
            continue
        xs.append(decode_u8(a).data.reshape(-1, 3))
        ys.append(decode_u8(b).data.reshape(-1, 3))
    if not xs:
        print("error: no usable pairs", file=sys.stderr)
        return EXIT_CONFIG

    source_px = np.concatenate(xs)
    target_px = np.concatenate(ys)
    sched = LrSchedule(total_iters=args.iters, peak=args.peak_lr, warmup_iters=args.warmup)
    params, curve = fit_mapper(source_px, target_px, sched, seed=args.seed)

    with open(args.params_out, "w", encoding="utf-8") as fh:
        fh.write(params_to_json(params))
    with open(args.curve_out, "w", encoding="utf-8") as fh:
        fh.write("iter,lr,mse\n")
        for it, lr, mse in curve:
            fh.write(f"{it},{lr:.10g},{mse:.10g}\n")
    print(
        f"fit {source_px.shape[0]} pixel pairs over {args.iters} iters; "
        f"final batch mse {curve[-1][2]:.3e}; wrote {args.params_out}, {args.curve_out}"
    )
    return EXIT_OK


# ------------------------------------------------------------ fit-reference


def cmd_fit_reference(args) -> int:
    try:
        img = decode_u8(read_image_u8(args.reference))
        if args.method == "reinhard":
            payload = reinhard_fit(img).to_json()
        else:
            payload = macenko_fit(img).to_json()
    except (StainforgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(payload)
    print(f"wrote {args.method} reference statistics to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------- inspect-weights


def cmd_inspect_weights(args) -> int:
    expected = expected_tensors()
    if args.expected:
        for name, shape in expected.items():
            print(f"{name:<34}{list(shape)}")
        return EXIT_OK
    if not args.file:
        print("error: weights file required (or use --expected)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        store = _load_store(args.file)
    except (StainforgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in store.names():
        arr = store.get(name)
        marker = ""
        if name not in expected:
            marker = "  (unexpected)"
        elif expected[name] != arr.shape:
            marker = f"  (expected {list(expected[name])})"
        print(f"{name:<34}{list(arr.shape)}{marker}")
    missing = [n for n in expected if n not in store]
    for name in missing:
        print(f"{name:<34}MISSING")
    return EXIT_PARTIAL if missing else EXIT_OK


# ------------------------------------------------------------------ montage


_LABEL_HEIGHT = 16
_GUTTER = 4


def cmd_montage(args) -> int:
    if not args.inputs:
        print("error: need at least one image", file=sys.stderr)
        return EXIT_CONFIG
    try:
        images = [read_image_u8(p) for p in args.inputs]
    except (StainforgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    target_h = min(im.shape[0] for im in images)
    scaled = []
    for im in images:
        if im.shape[0] != target_h:
            w = max(1, round(im.shape[1] * target_h / im.shape[0]))
            im = encode_u8(PixelImage(resize_bilinear(decode_u8(im).data, target_h, w)))
        scaled.append(im)

    labels = args.labels.split(",") if args.labels else [
        os.path.splitext(os.path.basename(p))[0] for p in args.inputs
    ]
    if len(labels) != len(scaled):
        print("error: label count must match image count", file=sys.stderr)
        return EXIT_CONFIG

    total_w = sum(im.shape[1] for im in scaled) + _GUTTER * (len(scaled) - 1)
    canvas = np.full((target_h + _LABEL_HEIGHT, total_w, 3), 255, dtype=np.uint8)
    x = 0
    spans = []
    for im in scaled:
        canvas[:target_h, x : x + im.shape[1]] = im
        spans.append((x, im.shape[1]))
        x += im.shape[1] + _GUTTER

    pil = Image.fromarray(canvas)
    draw = ImageDraw.Draw(pil)
    font = ImageFont.load_default()
    for (x0, w), label in zip(spans, labels):
        draw.text((x0 + 2, target_h + 2), label[: max(1, w // 6)], fill=(0, 0, 0), font=font)
    write_image_u8(args.out, np.asarray(pil, dtype=np.uint8))
    print(f"wrote {args.out} ({total_w}x{target_h + _LABEL_HEIGHT})")
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stainforge",
        description="Dynamic-parameter stain normalization toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize images with paramnet or a baseline")
    p.add_argument("input", help="image file or directory")
    p.add_argument("output", help="output file (single input) or directory")
    p.add_argument("--method", choices=("paramnet", "reinhard", "macenko"), default="paramnet")
    p.add_argument("--weights", help="PNWT weights file (paramnet)")
    p.add_argument("--reference", help="reference image to fit (baselines)")
    p.add_argument("--stats", help="previously fitted reference JSON (baselines)")
    p.set_defaults(fn=cmd_normalize)

    p = sub.add_parser("normalize-wsi", help="tiled whole-slide normalization")
    p.add_argument("input", help="slide directory (index.json) or large PNG/PPM")
    p.add_argument("output", help="output slide directory or PNG/PPM file")
    p.add_argument("--weights", required=True)
    p.add_argument("--tile", type=int, default=512)
    p.add_argument("--workers", type=int, default=_default_workers())
    lut = p.add_mutually_exclusive_group()
    lut.add_argument("--lut", dest="lut", action="store_true", default=True)
    lut.add_argument("--no-lut", dest="lut", action="store_false")
    p.set_defaults(fn=cmd_normalize_wsi)

    p = sub.add_parser("benchmark", help="mapping throughput, I/O excluded")
    p.add_argument("--weights", required=True)
    p.add_argument("--tile", type=int, default=512)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--workers", default=str(_default_workers()), help="comma list, e.g. 1,4,8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("metrics", help="similarity tables over aligned directories")
    p.add_argument("--normalized", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("train-mapper", help="fit mapper params to paired images")
    p.add_argument("--source", required=True, help="source image directory")
    p.add_argument("--target", required=True, help="aligned target image directory")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--peak-lr", type=float, default=2e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params-out", default="mapper_params.json")
    p.add_argument("--curve-out", default="loss_curve.csv")
    p.set_defaults(fn=cmd_train_mapper)

    p = sub.add_parser("fit-reference", help="fit baseline statistics to a reference image")
    p.add_argument("--method", choices=("reinhard", "macenko"), required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fit_reference)

    p = sub.add_parser("inspect-weights", help="list tensors in a PNWT file")
    p.add_argument("file", nargs="?")
    p.add_argument("--expected", action="store_true", help="print the required tensor list")
    p.set_defaults(fn=cmd_inspect_weights)

    p = sub.add_parser("montage", help="horizontal labeled strip of images")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="comma-separated labels (default: file names)")
    p.set_defaults(fn=cmd_montage)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StainforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
