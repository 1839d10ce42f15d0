"""Command-line surface.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. All randomness
is controlled by --seed; evaluation reports omit wall-clock timing unless
--timing is passed so that repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import augment, bench, report
from .config import ConfigError, DetectorSpec, RunConfig, build_detector
from .detector import DetectorError
from .ensemble import EnsembleConfig, EnsembleMemberError, select_best_subset
from .formats import (
    DatasetManifest,
    DetectionParseError,
    DetectionRecord,
    ImageEntry,
    LabelParseError,
    ManifestError,
    class_distribution,
    format_label_file,
    load_ground_truth,
    load_manifest,
    read_detections,
    read_pgm,
    save_manifest,
    write_detections,
    write_pgm,
)
from .metrics import EvalConfig, EvaluationError, evaluate, pr_curve
from .protocols import TTA, TTME, TTNA
from .rng import SplitMix64, derive_stream_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2

_VALIDATION_ERRORS = (
    ConfigError,
    DetectorError,
    DetectionParseError,
    EnsembleMemberError,
    EvaluationError,
    LabelParseError,
    ManifestError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument(
        "--detections",
        action="append",
        default=[],
        help="detection file (repeatable; multiple files become ensemble members)",
    )
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--iou-thresh", type=float, default=None)
    p.add_argument("--conf-thresh", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="write the report to this path")
    p.add_argument("--format", choices=("json", "table", "csv"), default="table")
    p.add_argument(
        "--timing",
        action="store_true",
        help="include wall-clock latency in the report (non-reproducible)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermeval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="export manifest ground truth as a detection file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--score", type=float, default=1.0)

    p = sub.add_parser("stats", help="class distribution of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")

    for name, help_text in (
        ("evaluate", "run a test protocol and report metrics"),
        ("tta-eval", "evaluate with test-time augmentation"),
        ("ensemble-eval", "evaluate a detector ensemble"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common_eval_flags(p)
        if name == "evaluate":
            p.add_argument("--protocol", choices=("ttna", "tta", "ttme"), default=None)

    p = sub.add_parser("select-ensemble", help="exhaustive best-subset search")
    _add_common_eval_flags(p)
    p.add_argument("--max-size", type=int, default=None)

    p = sub.add_parser("mosaic", help="compose 4-sample mosaics with remapped labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=None, help="default: images // 4")
    p.add_argument("--size", type=int, default=640)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-visible", type=float, default=0.10)
    p.add_argument("--write-images", action="store_true")

    p = sub.add_parser("bench", help="latency benchmark / protocol comparison")
    _add_common_eval_flags(p)
    p.add_argument("--stub-ms", type=float, default=None, help="benchmark a sleeping stub")
    p.add_argument("--images", type=int, default=8, help="synthetic image count for --stub-ms")
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument(
        "--compare",
        help="comma-separated protocols to compare (e.g. ttna,tta,ttme)",
    )

    p = sub.add_parser("pr-plot", help="per-class PR curves as CSV and SVG")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--iou-thresh", type=float, default=0.5)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg")

    return parser


def _load_run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    if getattr(args, "manifest", None):
        overrides["manifest_path"] = args.manifest
    if getattr(args, "detections", None):
        overrides["detectors"] = tuple(
            DetectorSpec("file", {"path": p, "name": Path(p).stem}) for p in args.detections
        )
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None):
        overrides["out_path"] = args.out
    if getattr(args, "warmup", None) is not None:
        overrides["warmup"] = args.warmup
    if getattr(args, "iters", None) is not None:
        overrides["iters"] = args.iters
    eval_kwargs = {
        "iou_threshold": cfg.eval_cfg.iou_threshold,
        "confidence_threshold": cfg.eval_cfg.confidence_threshold,
        "ap_mode": cfg.eval_cfg.ap_mode,
        "report_percent": cfg.eval_cfg.report_percent,
    }
    if getattr(args, "iou_thresh", None) is not None:
        eval_kwargs["iou_threshold"] = args.iou_thresh
    if getattr(args, "conf_thresh", None) is not None:
        eval_kwargs["confidence_threshold"] = args.conf_thresh
    overrides["eval_cfg"] = EvalConfig(**eval_kwargs)
    from dataclasses import replace

    return replace(cfg, **overrides)


def _require_manifest(cfg: RunConfig) -> DatasetManifest:
    if not cfg.manifest_path:
        raise ConfigError("a manifest is required (--manifest or config file)")
    return load_manifest(cfg.manifest_path)


def _build_detectors(cfg: RunConfig, manifest: DatasetManifest, ground_truth):
    if not cfg.detectors:
        raise ConfigError("at least one detector is required (--detections or config)")
    return [
        build_detector(spec, manifest, ground_truth, seed=cfg.seed, default_name=f"det{i}")
        for i, spec in enumerate(cfg.detectors)
    ]


def _protocol_for(name: str, cfg: RunConfig, detectors):
    if name == "ttna":
        return TTNA()
    if name == "tta":
        return TTA(cfg.tta)
    if name == "ttme":
        weights = tuple(float(s.options.get("weight", 1.0)) for s in cfg.detectors)
        if len(weights) != len(detectors) or all(w == 1.0 for w in weights):
            weights = None
        return TTME(
            EnsembleConfig(members=tuple(detectors), merge=cfg.merge, weights=weights)
        )
    raise ConfigError(f"unknown protocol: {name!r}")


def _emit(text: str, out_path: str | None) -> None:
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")


def _report_text(rep, fmt: str, include_timing: bool) -> str:
    if fmt == "json":
        return rep.to_json(include_timing=include_timing)
    if fmt == "csv":
        scale = 100.0 if rep.config.report_percent else 1.0
        lines = ["class,gt,tp,fp,fn,precision,recall,ap"]
        for c in rep.per_class:
            ap = "" if c.ap is None else repr(c.ap * scale)
            lines.append(
                f"{c.name},{c.gt_count},{c.counts.tp},{c.counts.fp},{c.counts.fn},"
                f"{c.precision * scale!r},{c.recall * scale!r},{ap}"
            )
        lines.append(f"overall,,,,,{rep.precision * scale!r},{rep.recall * scale!r},"
                     f"{rep.mean_ap * scale!r}")
        return "\n".join(lines) + "\n"
    return report.render_metrics_report(rep, include_timing=include_timing)


def cmd_convert(args) -> int:
    manifest = load_manifest(args.manifest)
    gt = load_ground_truth(manifest)
    records = [
        DetectionRecord(image_id, gt_box.class_id, args.score, gt_box.bbox)
        for image_id in manifest.image_ids()
        for gt_box in gt[image_id]
    ]
    write_detections(records, args.out)
    sys.stdout.write(f"wrote {len(records)} records to {args.out}\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    counts, total = class_distribution(manifest)
    names = manifest.class_map.names
    if args.format == "json":
        doc = {name: counts.get(i, 0) for i, name in enumerate(names)}
        doc["total"] = total
        text = json.dumps(doc, indent=2) + "\n"
    else:
        rows = [[name, counts.get(i, 0)] for i, name in enumerate(names)]
        rows.append(["total", total])
        text = report.render_table(rows, ["class", "annotations"])
    _emit(text, args.out)
    return EXIT_OK


def cmd_evaluate(args, protocol_name: str | None = None) -> int:
    cfg = _load_run_config(args)
    name = protocol_name or getattr(args, "protocol", None) or cfg.protocol
    manifest = _require_manifest(cfg)
    ground_truth = load_ground_truth(manifest)
    detectors = _build_detectors(cfg, manifest, ground_truth)
    protocol = _protocol_for(name, cfg, detectors)
    detector = None if name == "ttme" else detectors[0]
    if name != "ttme" and len(detectors) > 1:
        raise ConfigError(f"protocol {name!r} takes a single detector; got {len(detectors)}")
    rep = evaluate(
        manifest,
        detector,
        protocol,
        cfg.eval_cfg,
        ground_truth=ground_truth,
        n_threads=args.threads,
    )
    _emit(_report_text(rep, args.format, include_timing=args.timing), cfg.out_path)
    return EXIT_OK


def cmd_select_ensemble(args) -> int:
    cfg = _load_run_config(args)
    manifest = _require_manifest(cfg)
    ground_truth = load_ground_truth(manifest)
    candidates = _build_detectors(cfg, manifest, ground_truth)
    result = select_best_subset(
        candidates,
        manifest,
        cfg.eval_cfg,
        args.max_size,
        merge=cfg.merge,
        ground_truth=ground_truth,
    )
    scale = 100.0 if cfg.eval_cfg.report_percent else 1.0
    if args.format == "json":
        doc = {
            "best": {
                "members": [m.name for m in result.best.members],
                "map": result.best.mean_ap * scale,
            },
            "ranking": [
                {"members": [m.name for m in s.members], "map": s.mean_ap * scale}
                for s in result.ranking
            ],
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        rows = [
            ["+".join(m.name for m in s.members), s.mean_ap * scale] for s in result.ranking
        ]
        text = report.render_table(rows, ["subset", "mAP"])
        text += f"best: {'+'.join(m.name for m in result.best.members)}\n"
    _emit(text, cfg.out_path)
    return EXIT_OK


def cmd_mosaic(args) -> int:
    manifest = load_manifest(args.manifest)
    ground_truth = load_ground_truth(manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = list(manifest.images)
    if len(entries) < 4:
        raise ConfigError("mosaic needs a manifest with at least 4 images")
    count = args.count if args.count is not None else len(entries) // 4
    params = augment.MosaicParams(
        output_size=args.size, min_visible_fraction=args.min_visible
    )
    drop_lines: list[str] = []
    out_entries: list[ImageEntry] = []
    for k in range(count):
        rng = SplitMix64(derive_stream_seed(args.seed, "mosaic-select", str(k)))
        chosen = []
        pool = list(range(len(entries)))
        for _ in range(4):
            chosen.append(pool.pop(int(rng.uniform() * len(pool))))
        samples = []
        for idx in chosen:
            entry = entries[idx]
            pixels = None
            if args.write_images and entry.image_path:
                pixels = read_pgm(manifest.resolve(entry.image_path))
            samples.append(
                augment.LabeledSample(
                    image_id=entry.id,
                    width=entry.width,
                    height=entry.height,
                    boxes=tuple(ground_truth[entry.id]),
                    pixels=pixels,
                )
            )
        result = augment.mosaic(samples, params, seed=args.seed + k)
        stem = f"mosaic_{k:04d}"
        label_path = out_dir / f"{stem}.txt"
        label_path.write_text(
            format_label_file(result.sample.boxes, args.size, args.size),
            encoding="utf-8",
        )
        image_rel = None
        if result.sample.pixels is not None:
            write_pgm(result.sample.pixels, out_dir / f"{stem}.pgm")
            image_rel = f"{stem}.pgm"
        out_entries.append(
            ImageEntry(
                id=stem,
                width=args.size,
                height=args.size,
                label_path=f"{stem}.txt",
                image_path=image_rel,
            )
        )
        for d in result.dropped:
            drop_lines.append(
                json.dumps(
                    {
                        "mosaic": stem,
                        "source_image_id": d.source_image_id,
                        "source_index": d.source_index,
                        "class_id": d.class_id,
                        "visible_fraction": d.visible_fraction,
                        "reason": d.reason,
                    },
                    separators=(",", ":"),
                )
            )
    (out_dir / "droplog.jsonl").write_text(
        "\n".join(drop_lines) + ("\n" if drop_lines else ""), encoding="utf-8"
    )
    save_manifest(
        DatasetManifest(manifest.class_map, tuple(out_entries), base_dir=out_dir),
        out_dir / "manifest.json",
    )
    sys.stdout.write(
        f"wrote {count} mosaics to {out_dir} ({len(drop_lines)} boxes dropped)\n"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_run_config(args)
    if args.compare:
        manifest = _require_manifest(cfg)
        ground_truth = load_ground_truth(manifest)
        detectors = _build_detectors(cfg, manifest, ground_truth)
        runs = []
        for mode in [m.strip() for m in args.compare.split(",") if m.strip()]:
            if mode == "ttme":
                runs.append((mode, None, _protocol_for(mode, cfg, detectors)))
            else:
                for det in detectors:
                    runs.append((mode, det, _protocol_for(mode, cfg, [det])))
        comparison = bench.compare_modes(
            runs, manifest, cfg.eval_cfg, ground_truth=ground_truth, n_threads=args.threads
        )
        if args.format == "json":
            text = json.dumps(report.comparison_to_dict(comparison), indent=2) + "\n"
        else:
            text = report.render_comparison(comparison)
        _emit(text, cfg.out_path)
        return EXIT_OK

    if args.stub_ms is not None:
        from .detector import StubDetector

        detector = StubDetector(args.stub_ms, name=f"stub-{args.stub_ms}ms")
        images = [(f"img{i}", (640.0, 480.0)) for i in range(args.images)]
    else:
        manifest = _require_manifest(cfg)
        ground_truth = load_ground_truth(manifest)
        detector = _build_detectors(cfg, manifest, ground_truth)[0]
        images = [(e.id, (float(e.width), float(e.height))) for e in manifest.images]
    stats = bench.bench_detector(detector, images, warmup=cfg.warmup, iters=cfg.iters)
    if args.format == "json":
        text = (
            json.dumps(
                {
                    "detector": detector.name,
                    "n": stats.n,
                    "mean_ms": stats.mean_ms,
                    "median_ms": stats.median_ms,
                    "p95_ms": stats.p95_ms,
                    "fps": stats.fps,
                    "throughput_ips": stats.throughput_ips,
                },
                indent=2,
            )
            + "\n"
        )
    else:
        text = report.render_latency_stats(stats, detector.name)
    _emit(text, cfg.out_path)
    return EXIT_OK


def cmd_pr_plot(args) -> int:
    manifest = load_manifest(args.manifest)
    ground_truth = load_ground_truth(manifest)
    records = read_detections(args.detections, manifest)
    from .geometry import Detection

    dets_by_image: dict[str, list[Detection]] = {i: [] for i in manifest.image_ids()}
    for rec in records:
        if rec.view_id == "identity":
            dets_by_image[rec.image_id].append(
                Detection(rec.bbox, rec.class_id, rec.score)
            )
    curves = {}
    for class_id, name in enumerate(manifest.class_map.names):
        curve = pr_curve(dets_by_image, ground_truth, class_id, args.iou_thresh)
        if curve:
            curves[name] = curve
    Path(args.out_csv).write_text(report.pr_curves_to_csv(curves), encoding="utf-8")
    written = [args.out_csv]
    if args.out_svg:
        Path(args.out_svg).write_text(report.pr_curves_to_svg(curves), encoding="utf-8")
        written.append(args.out_svg)
    sys.stdout.write(f"wrote {', '.join(written)}\n")
    return EXIT_OK


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "convert":
            return cmd_convert(args)
        if args.command == "stats":
            return cmd_stats(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "tta-eval":
            return cmd_evaluate(args, protocol_name="tta")
        if args.command == "ensemble-eval":
            return cmd_evaluate(args, protocol_name="ttme")
        if args.command == "select-ensemble":
            return cmd_select_ensemble(args)
        if args.command == "mosaic":
            return cmd_mosaic(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "pr-plot":
            return cmd_pr_plot(args)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except _VALIDATION_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


def main() -> None:
    raise SystemExit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
