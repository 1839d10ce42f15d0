"""Latency/FPS benchmark harness and the protocol comparison table.

Timing covers detect() only (pre/post-processing is not included and the
report says so); the clock must be monotonic. FPS is defined as 1000 / mean
latency in ms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .detector import DetectorHandle, ViewKey
from .formats import DatasetManifest
from .geometry import AffineTransform
from .metrics import EvalConfig, MetricsReport, evaluate


@dataclass(frozen=True)
class LatencyStats:
    n: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    wall_s: float = 0.0  # whole measured phase including loop overhead

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one measured run")
        if min(self.mean_ms, self.median_ms, self.p95_ms) <= 0:
            raise ValueError("latency stats must be positive")
        if self.median_ms > self.p95_ms:
            raise ValueError("median cannot exceed p95")

    @property
    def fps(self) -> float:
        """Compute-only rate: 1000 / mean detect latency."""
        return 1000.0 / self.mean_ms

    @property
    def throughput_ips(self) -> float:
        """End-to-end images per wall second, loop overhead included."""
        return self.n / self.wall_s if self.wall_s > 0 else self.fps


class BenchAborted(RuntimeError):
    """Detector failed mid-run; carries whatever was measured so far."""

    def __init__(self, message: str, partial: Optional[LatencyStats]):
        super().__init__(message)
        self.partial = partial


def _stats_from_samples(samples_ms: Sequence[float], wall_s: float = 0.0) -> LatencyStats:
    arr = np.asarray(samples_ms, dtype=np.float64)
    return LatencyStats(
        n=len(samples_ms),
        mean_ms=float(arr.mean()),
        median_ms=float(np.percentile(arr, 50)),
        p95_ms=float(np.percentile(arr, 95)),
        wall_s=wall_s,
    )


def bench_detector(
    detector: DetectorHandle,
    images: Sequence[tuple[str, tuple[float, float]]],
    warmup: int = 10,
    iters: int = 50,
    clock: Callable[[], float] = time.perf_counter,
) -> LatencyStats:
    """Time identity-view detect calls over the image list, cycling as needed.

    Runs ``warmup`` unmeasured calls first, then ``iters`` measured ones. A
    detector failure aborts with partial stats attached for diagnosis.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not images:
        raise ValueError("need at least one image to benchmark")
    identity = AffineTransform.identity()

    def call(i: int) -> None:
        image_id, canvas = images[i % len(images)]
        detector.detect(ViewKey(image_id), identity, canvas)

    samples: list[float] = []
    phase_start = clock()
    try:
        for i in range(warmup):
            call(i)
        phase_start = clock()
        for i in range(iters):
            start = clock()
            call(i)
            samples.append((clock() - start) * 1000.0)
    except Exception as exc:
        partial = _stats_from_samples(samples, clock() - phase_start) if samples else None
        done = len(samples)
        raise BenchAborted(
            f"detector {detector.name!r} failed after {done}/{iters} measured runs: {exc}",
            partial,
        ) from exc
    return _stats_from_samples(samples, clock() - phase_start)


@dataclass(frozen=True)
class ModeRow:
    mode: str
    detector: str
    precision: float
    recall: float
    mean_ap: float
    mean_latency_ms: float


@dataclass(frozen=True)
class ModeComparison:
    rows: tuple[ModeRow, ...]
    # metric name -> row indices holding the best value (ties all flagged)
    best: dict[str, tuple[int, ...]]


def compare_modes(
    runs: Sequence[tuple[str, DetectorHandle, object]],
    manifest: DatasetManifest,
    eval_cfg: EvalConfig = EvalConfig(),
    *,
    ground_truth=None,
    n_threads: int = 1,
) -> ModeComparison:
    """Evaluate each (label, detector, protocol) run and flag the best values.

    Accuracy metrics flag the maximum, latency the minimum; ties are all
    flagged. Every run shares the manifest and eval config.
    """
    rows: list[ModeRow] = []
    for label, detector, protocol in runs:
        report: MetricsReport = evaluate(
            manifest,
            detector,
            protocol,
            eval_cfg,
            ground_truth=ground_truth,
            n_threads=n_threads,
        )
        scale = 100.0 if eval_cfg.report_percent else 1.0
        rows.append(
            ModeRow(
                mode=label,
                detector=report.detector_name,
                precision=report.precision * scale,
                recall=report.recall * scale,
                mean_ap=report.mean_ap * scale,
                mean_latency_ms=report.latency.mean_ms if report.latency else 0.0,
            )
        )

    def flag(values: Sequence[float], minimize: bool = False) -> tuple[int, ...]:
        target = min(values) if minimize else max(values)
        return tuple(i for i, v in enumerate(values) if v == target)

    best = {
        "precision": flag([r.precision for r in rows]),
        "recall": flag([r.recall for r in rows]),
        "map": flag([r.mean_ap for r in rows]),
        "mean_latency_ms": flag([r.mean_latency_ms for r in rows], minimize=True),
    }
    return ModeComparison(rows=tuple(rows), best=best)
