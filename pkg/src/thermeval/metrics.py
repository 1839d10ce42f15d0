"""Detection-to-ground-truth matching, PR curves, AP/mAP, and full evaluation.

Matching is greedy in score order: detections are processed by descending
score (ties by lower input index) and claim their best-IoU unmatched same-class
ground-truth box when that IoU reaches the threshold. Greedy matching is
prefix-stable, so one pass over all detections yields the verdicts for every
score cutoff at once. Metrics are fractions internally; reports multiply by
100 when configured to.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .formats import DatasetManifest, load_ground_truth
from .geometry import (
    Detection,
    GroundTruthBox,
    boxes_to_array,
    score_descending_order,
)

AP_ENVELOPE = "envelope"
AP_TRAPEZOID = "trapezoid"


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    confidence_threshold: float = 0.5
    ap_mode: str = AP_ENVELOPE
    report_percent: bool = True

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in [0, 1]")
        if self.ap_mode not in (AP_ENVELOPE, AP_TRAPEZOID):
            raise ValueError(f"unknown ap_mode: {self.ap_mode!r}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class PRPoint:
    score_cutoff: float
    recall: float
    precision: float


@dataclass(frozen=True)
class MatchVerdict:
    """Verdict for one detection: matched ground-truth index, or None for FP."""

    gt_index: Optional[int]

    @property
    def is_tp(self) -> bool:
        return self.gt_index is not None


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    iou_threshold: float,
) -> tuple[list[MatchVerdict], list[int]]:
    """Greedy score-ordered matching within one image.

    Returns per-detection verdicts aligned with the input order, plus the
    indices of ground-truth boxes left unmatched (the false negatives).
    Cross-class matches never occur; each ground truth matches at most once.
    """
    verdicts = [MatchVerdict(None)] * len(dets)
    if not dets:
        return verdicts, list(range(len(gts)))
    order = score_descending_order([d.score for d in dets])
    det_boxes = boxes_to_array([dets[i].bbox for i in order])
    det_classes = np.asarray([dets[i].class_id for i in order], dtype=np.int64)
    gt_boxes = boxes_to_array([g.bbox for g in gts])
    gt_classes = np.asarray([g.class_id for g in gts], dtype=np.int64)
    matched = _kernels.match_sorted(
        det_boxes, det_classes, gt_boxes, gt_classes, float(iou_threshold)
    )
    taken = set()
    for pos, det_idx in enumerate(order):
        j = int(matched[pos])
        if j >= 0:
            verdicts[det_idx] = MatchVerdict(j)
            taken.add(j)
    unmatched = [j for j in range(len(gts)) if j not in taken]
    return verdicts, unmatched


def precision_recall(counts: ConfusionCounts) -> tuple[float, float]:
    """Precision and recall in percent; 0 when a denominator is 0."""
    precision = 100.0 * counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = 100.0 * counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return precision, recall


def pr_curve(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[GroundTruthBox]],
    class_id: int,
    iou_threshold: float,
) -> list[PRPoint]:
    """Precision-recall points for one class at every distinct score cutoff.

    Greedy matching is prefix-stable in score order, so verdicts computed once
    over all detections equal a from-scratch match at each cutoff.
    """
    n_gt = sum(
        sum(1 for g in boxes if g.class_id == class_id)
        for boxes in gts_by_image.values()
    )
    scored: list[tuple[float, bool]] = []
    for image_id in sorted(dets_by_image):
        dets = [d for d in dets_by_image[image_id] if d.class_id == class_id]
        if not dets:
            continue
        gts = [g for g in gts_by_image.get(image_id, ()) if g.class_id == class_id]
        verdicts, _ = match_detections(dets, gts, iou_threshold)
        scored.extend((d.score, v.is_tp) for d, v in zip(dets, verdicts))
    if not scored:
        return []
    scored.sort(key=lambda sv: -sv[0])
    points: list[PRPoint] = []
    tp = fp = 0
    for i, (score, is_tp) in enumerate(scored):
        if is_tp:
            tp += 1
        else:
            fp += 1
        last_of_cutoff = i + 1 == len(scored) or scored[i + 1][0] != score
        if last_of_cutoff:
            recall = tp / n_gt if n_gt else 0.0
            precision = tp / (tp + fp)
            points.append(PRPoint(score, recall, precision))
    return points


def average_precision(curve: Sequence[PRPoint], mode: str = AP_ENVELOPE) -> float:
    """Area under the PR curve.

    Envelope mode (default) integrates the monotone precision envelope
    p(r) = max precision over points with recall >= r, exactly, as a
    piecewise-constant sum. Trapezoid mode integrates the raw polyline
    through the points, anchored at (recall 0, precision 0).
    """
    if not curve:
        return 0.0
    rec = np.asarray([p.recall for p in curve], dtype=np.float64)
    prec = np.asarray([p.precision for p in curve], dtype=np.float64)
    if mode == AP_ENVELOPE:
        env = np.maximum.accumulate(prec[::-1])[::-1]
        ap = 0.0
        prev = 0.0
        for r, e in zip(rec, env):
            ap += (r - prev) * e
            prev = r
        return float(ap)
    if mode == AP_TRAPEZOID:
        ap = 0.0
        prev_r, prev_p = 0.0, 0.0
        for r, p in zip(rec, prec):
            ap += (r - prev_r) * (p + prev_p) / 2.0
            prev_r, prev_p = r, p
        return float(ap)
    raise ValueError(f"unknown ap mode: {mode!r}")


def mean_average_precision(per_class_ap: Mapping[int, Optional[float]]) -> float:
    """Arithmetic mean of APs over classes that have ground truth.

    Classes without ground truth carry None and are excluded; raises when no
    class has any ground-truth box.
    """
    values = [v for v in per_class_ap.values() if v is not None]
    if not values:
        raise EvaluationError("mAP undefined: no class has any ground-truth box")
    return float(sum(values) / len(values))


@dataclass(frozen=True)
class ClassMetrics:
    class_id: int
    name: str
    gt_count: int
    counts: ConfusionCounts
    ap: Optional[float]  # None when the class has no ground truth

    @property
    def precision(self) -> float:
        return precision_recall(self.counts)[0] / 100.0

    @property
    def recall(self) -> float:
        return precision_recall(self.counts)[1] / 100.0


@dataclass(frozen=True)
class LatencySummary:
    mean_ms: float
    median_ms: float
    p95_ms: float


@dataclass(frozen=True)
class MetricsReport:
    detector_name: str
    protocol_name: str
    config: EvalConfig
    per_class: tuple[ClassMetrics, ...]
    mean_ap: float
    micro_counts: ConfusionCounts
    images_evaluated: int
    latency: Optional[LatencySummary] = None

    @property
    def precision(self) -> float:
        return precision_recall(self.micro_counts)[0] / 100.0

    @property
    def recall(self) -> float:
        return precision_recall(self.micro_counts)[1] / 100.0

    def _scaled(self, value: Optional[float]) -> Optional[float]:
        if value is None:
            return None
        return value * 100.0 if self.config.report_percent else value

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "detector": self.detector_name,
            "protocol": self.protocol_name,
            "config": {
                "iou_threshold": self.config.iou_threshold,
                "confidence_threshold": self.config.confidence_threshold,
                "ap_mode": self.config.ap_mode,
                "units": "percent" if self.config.report_percent else "fraction",
            },
            "images_evaluated": self.images_evaluated,
            "precision": self._scaled(self.precision),
            "recall": self._scaled(self.recall),
            "map": self._scaled(self.mean_ap),
            "classes": [
                {
                    "id": c.class_id,
                    "name": c.name,
                    "gt": c.gt_count,
                    "tp": c.counts.tp,
                    "fp": c.counts.fp,
                    "fn": c.counts.fn,
                    "precision": self._scaled(c.precision),
                    "recall": self._scaled(c.recall),
                    "ap": self._scaled(c.ap),
                }
                for c in self.per_class
            ],
        }
        if include_timing and self.latency is not None:
            doc["latency"] = {
                "mean_ms": self.latency.mean_ms,
                "median_ms": self.latency.median_ms,
                "p95_ms": self.latency.p95_ms,
            }
        return doc

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"


def _latency_summary(samples_ms: Sequence[float]) -> LatencySummary:
    arr = np.asarray(samples_ms, dtype=np.float64)
    return LatencySummary(
        mean_ms=float(arr.mean()),
        median_ms=float(np.percentile(arr, 50)),
        p95_ms=float(np.percentile(arr, 95)),
    )


def evaluate(
    manifest: DatasetManifest,
    detector,
    protocol,
    eval_cfg: EvalConfig = EvalConfig(),
    *,
    ground_truth: Optional[Mapping[str, Sequence[GroundTruthBox]]] = None,
    n_threads: int = 1,
) -> MetricsReport:
    """Run a test protocol over a manifest and aggregate the metrics report.

    The protocol object supplies detections_for(detector, image_id, canvas) in
    the original image frame (TTNA / TTA / TTME all fit this shape). Point
    precision/recall uses detections at or above the confidence threshold; AP
    uses the full score range. Aggregation is an ordered reduction by image
    id, so results are independent of iteration order and thread count.
    """
    gt_by_image = (
        {k: list(v) for k, v in ground_truth.items()}
        if ground_truth is not None
        else load_ground_truth(manifest)
    )
    entries = sorted(manifest.images, key=lambda e: e.id)

    def run_one(entry):
        start = time.perf_counter()
        try:
            dets = protocol.detections_for(detector, entry.id, (entry.width, entry.height))
        except Exception as exc:
            raise EvaluationError(f"image {entry.id!r}: {exc}") from exc
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return entry.id, dets, elapsed_ms

    results: dict[str, list[Detection]] = {}
    latencies: dict[str, float] = {}
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for image_id, dets, ms in pool.map(run_one, entries):
                results[image_id] = dets
                latencies[image_id] = ms
    else:
        for entry in entries:
            image_id, dets, ms = run_one(entry)
            results[image_id] = dets
            latencies[image_id] = ms

    # ordered reduction by image id
    class_ids = range(len(manifest.class_map))
    gt_counts = {c: 0 for c in class_ids}
    counts = {c: ConfusionCounts() for c in class_ids}
    for entry in entries:
        gts = gt_by_image.get(entry.id, [])
        for g in gts:
            gt_counts[g.class_id] += 1
        point_dets = [
            d for d in results[entry.id] if d.score >= eval_cfg.confidence_threshold
        ]
        verdicts, unmatched = match_detections(point_dets, gts, eval_cfg.iou_threshold)
        for det, verdict in zip(point_dets, verdicts):
            inc = ConfusionCounts(tp=1) if verdict.is_tp else ConfusionCounts(fp=1)
            counts[det.class_id] = counts[det.class_id] + inc
        for j in unmatched:
            c = gts[j].class_id
            counts[c] = counts[c] + ConfusionCounts(fn=1)

    per_class_ap: dict[int, Optional[float]] = {}
    for c in class_ids:
        if gt_counts[c] == 0:
            per_class_ap[c] = None
            continue
        curve = pr_curve(results, gt_by_image, c, eval_cfg.iou_threshold)
        per_class_ap[c] = average_precision(curve, eval_cfg.ap_mode)

    rows = tuple(
        ClassMetrics(
            class_id=c,
            name=manifest.class_map.name(c),
            gt_count=gt_counts[c],
            counts=counts[c],
            ap=per_class_ap[c],
        )
        for c in class_ids
    )
    micro = ConfusionCounts()
    for c in class_ids:
        micro = micro + counts[c]

    if detector is not None and hasattr(detector, "name"):
        detector_name = detector.name
    elif hasattr(protocol, "detector_label"):
        detector_name = protocol.detector_label()
    else:
        detector_name = "unknown"
    return MetricsReport(
        detector_name=detector_name,
        protocol_name=getattr(protocol, "name", type(protocol).__name__.lower()),
        config=eval_cfg,
        per_class=rows,
        mean_ap=mean_average_precision(per_class_ap),
        micro_counts=micro,
        images_evaluated=len(entries),
        latency=_latency_summary(list(latencies.values())) if entries else None,
    )
