"""detexport command line: export detections, build the demo model."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportJob, export_detections
from .model import save_demo_model


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detexport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run a TorchScript detector over a manifest")
    p.add_argument("--model", required=True, help="TorchScript checkpoint path")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="detection file to write (JSONL)")
    p.add_argument(
        "--views",
        default="identity",
        help="comma-separated views: identity,hflip,vflip",
    )
    p.add_argument("--conf-floor", type=float, default=0.001)

    p = sub.add_parser("demo-model", help="write the bundled grid-blob demo detector")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=8)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--class-id", type=int, default=3)

    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        if args.command == "export":
            job = ExportJob(
                model_path=args.model,
                manifest_path=args.manifest,
                out_path=args.out,
                conf_floor=args.conf_floor,
                views=tuple(v.strip() for v in args.views.split(",") if v.strip()),
            )
            written = export_detections(job)
            sys.stdout.write(f"wrote {written} records to {args.out}\n")
            return 0
        if args.command == "demo-model":
            save_demo_model(args.out, args.grid, args.threshold, args.class_id)
            sys.stdout.write(f"wrote demo model to {args.out}\n")
            return 0
        return 1
    except (ExportError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 2


def main() -> None:
    raise SystemExit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
