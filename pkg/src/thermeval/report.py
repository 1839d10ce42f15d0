"""Human-readable tables, CSV export, and the standalone PR-curve SVG."""

from __future__ import annotations

import csv
import io
from typing import Mapping, Sequence

from .bench import LatencyStats, ModeComparison
from .metrics import MetricsReport, PRPoint

_SVG_COLORS = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)


def _fmt_cell(value, width: int) -> str:
    if value is None:
        text = "-"
    elif isinstance(value, float):
        text = f"{value:.2f}"
    else:
        text = str(value)
    return text.rjust(width)


def render_table(rows: Sequence[Sequence], headers: Sequence[str]) -> str:
    """Right-aligned fixed-width text table."""
    cells = [[_fmt_cell(v, 0).strip() for v in row] for row in rows]
    widths = [
        max(len(h), *(len(row[i]) for row in cells)) if cells else len(h)
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in cells:
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def render_metrics_report(report: MetricsReport, include_timing: bool = True) -> str:
    unit = "%" if report.config.report_percent else ""
    scale = 100.0 if report.config.report_percent else 1.0
    rows = []
    for c in report.per_class:
        rows.append(
            [
                c.name,
                c.gt_count,
                c.counts.tp,
                c.counts.fp,
                c.counts.fn,
                c.precision * scale,
                c.recall * scale,
                None if c.ap is None else c.ap * scale,
            ]
        )
    table = render_table(
        rows,
        ["class", "gt", "tp", "fp", "fn", f"prec{unit}", f"rec{unit}", f"ap{unit}"],
    )
    lines = [
        f"detector: {report.detector_name}   protocol: {report.protocol_name}   "
        f"images: {report.images_evaluated}",
        table.rstrip("\n"),
        f"overall: precision {report.precision * scale:.2f}{unit}  "
        f"recall {report.recall * scale:.2f}{unit}  mAP {report.mean_ap * scale:.2f}{unit}",
    ]
    if include_timing and report.latency is not None:
        lines.append(
            f"latency (detect only): mean {report.latency.mean_ms:.3f} ms  "
            f"median {report.latency.median_ms:.3f} ms  p95 {report.latency.p95_ms:.3f} ms"
        )
    return "\n".join(lines) + "\n"


def render_latency_stats(stats: LatencyStats, label: str) -> str:
    return (
        f"{label}: n={stats.n}  mean {stats.mean_ms:.3f} ms  "
        f"median {stats.median_ms:.3f} ms  p95 {stats.p95_ms:.3f} ms  "
        f"fps {stats.fps:.1f}  end-to-end {stats.throughput_ips:.1f} img/s\n"
    )


def render_comparison(comparison: ModeComparison) -> str:
    """One row per (mode, detector); best value per metric marked with '*'."""
    headers = ["mode", "detector", "precision", "recall", "mAP", "mean ms"]
    rows = []
    for i, r in enumerate(comparison.rows):
        def mark(metric: str, value: float) -> str:
            flagged = i in comparison.best[metric]
            return f"{value:.2f}{'*' if flagged else ''}"

        rows.append(
            [
                r.mode,
                r.detector,
                mark("precision", r.precision),
                mark("recall", r.recall),
                mark("map", r.mean_ap),
                mark("mean_latency_ms", r.mean_latency_ms),
            ]
        )
    return render_table(rows, headers)


def comparison_to_dict(comparison: ModeComparison) -> dict:
    return {
        "rows": [
            {
                "mode": r.mode,
                "detector": r.detector,
                "precision": r.precision,
                "recall": r.recall,
                "map": r.mean_ap,
                "mean_latency_ms": r.mean_latency_ms,
            }
            for r in comparison.rows
        ],
        "best": {k: list(v) for k, v in comparison.best.items()},
    }


def pr_curves_to_csv(curves: Mapping[str, Sequence[PRPoint]]) -> str:
    """CSV with one row per (class, cutoff) point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "score_cutoff", "recall", "precision"])
    for name in sorted(curves):
        for p in curves[name]:
            writer.writerow([name, repr(p.score_cutoff), repr(p.recall), repr(p.precision)])
    return buf.getvalue()


def pr_curves_to_svg(
    curves: Mapping[str, Sequence[PRPoint]],
    width: int = 640,
    height: int = 480,
) -> str:
    """Standalone SVG of per-class PR curves (recall on x, precision on y)."""
    margin = 50.0
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin

    def sx(recall: float) -> float:
        return margin + recall * plot_w

    def sy(precision: float) -> float:
        return height - margin - precision * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i in range(6):
        frac = i / 5.0
        x = sx(frac)
        y = sy(frac)
        parts.append(
            f'<line x1="{x:.1f}" y1="{margin}" x2="{x:.1f}" y2="{height - margin}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{margin}" y1="{y:.1f}" x2="{width - margin}" y2="{y:.1f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{height - margin + 18:.1f}" font-size="11" '
            f'text-anchor="middle">{frac:.1f}</text>'
        )
        parts.append(
            f'<text x="{margin - 8:.1f}" y="{y + 4:.1f}" font-size="11" '
            f'text-anchor="end">{frac:.1f}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.1f}" y="{height - 12:.1f}" font-size="13" '
        f'text-anchor="middle">recall</text>'
    )
    parts.append(
        f'<text x="14" y="{height / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2:.1f})">precision</text>'
    )
    for idx, name in enumerate(sorted(curves)):
        points = curves[name]
        if not points:
            continue
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(p.recall):.2f},{sy(p.precision):.2f}" for p in points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = margin + 16 * idx + 12
        parts.append(
            f'<rect x="{width - margin - 120:.1f}" y="{ly - 9:.1f}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{width - margin - 105:.1f}" y="{ly:.1f}" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
