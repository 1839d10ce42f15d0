"""Detector handles: file-backed replay, seeded noisy mock, and timing stubs.

Every downstream module (metrics, TTA, ensembling, benchmarks) talks to a
DetectorHandle, so the whole pipeline is testable without any trained network.
Mock randomness follows the documented draw-order contract in docs/FORMATS.md
and is fully determined by (noise settings, global seed, image id, view id).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from .formats import DetectionRecord
from .geometry import AffineTransform, BBox, Detection, GroundTruthBox, transform_box
from .rng import SplitMix64, derive_stream_seed

IDENTITY_VIEW = "identity"


class DetectorError(Exception):
    pass


class DetectionLookupError(DetectorError):
    """File-backed store has never seen this image."""


class CapabilityError(DetectorError):
    """Detector cannot serve the requested view."""


@dataclass(frozen=True)
class ViewKey:
    image_id: str
    view_id: str = IDENTITY_VIEW


class DetectorHandle(Protocol):
    name: str

    def supports_view(self, view_id: str) -> bool: ...

    def detect(
        self, view: ViewKey, view_transform: AffineTransform, canvas: tuple[float, float]
    ) -> list[Detection]: ...


@dataclass(frozen=True)
class MockNoise:
    """Noise model for the seeded mock detector.

    p_miss drops each ground-truth box independently per view; jitter_sigma is
    the per-coordinate normal noise in pixels; fp_rate is the Poisson mean of
    false positives per view. Matched boxes score uniform in
    [score_lo, score_hi], false positives in [fp_lo, fp_hi].
    """

    p_miss: float = 0.0
    jitter_sigma: float = 0.0
    fp_rate: float = 0.0
    score_lo: float = 1.0
    score_hi: float = 1.0
    fp_lo: float = 0.5
    fp_hi: float = 1.0
    global_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError("p_miss must be in [0, 1]")
        if not (math.isfinite(self.jitter_sigma) and self.jitter_sigma >= 0.0):
            raise ValueError("jitter_sigma must be finite and non-negative")
        if not (math.isfinite(self.fp_rate) and self.fp_rate >= 0.0):
            raise ValueError("fp_rate must be finite and non-negative")
        for lo, hi, what in (
            (self.score_lo, self.score_hi, "score"),
            (self.fp_lo, self.fp_hi, "fp score"),
        ):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{what} range must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def noiseless(cls, global_seed: int = 0) -> "MockNoise":
        return cls(global_seed=global_seed)


def mock_detect(
    gt: Sequence[GroundTruthBox],
    view_transform: AffineTransform,
    canvas: tuple[float, float],
    noise: MockNoise,
    view: ViewKey,
) -> list[Detection]:
    """Simulate a detector on one view. Deterministic given (noise, view).

    Draw order (fixed contract, see docs/FORMATS.md):
      1. one miss uniform per input box, in input order;
      2. per surviving box in order: four jitter normals
         (dx_min, dy_min, dx_max, dy_max), then one score uniform;
      3. one Poisson draw for the false-positive count, then per false
         positive four box uniforms (x1, y1, x2, y2 scaled to the canvas)
         and one score uniform.
    Draws happen regardless of parameter values or box visibility; geometry
    (view mapping, corner renormalization, canvas clipping) is applied after.
    """
    rng = SplitMix64(derive_stream_seed(noise.global_seed, view.image_id, view.view_id))
    canvas_w, canvas_h = float(canvas[0]), float(canvas[1])

    survivors = [gt_box for gt_box in gt if rng.uniform() >= noise.p_miss]

    out: list[Detection] = []
    for gt_box in survivors:
        mapped = transform_box(view_transform, gt_box.bbox)
        jit = [rng.normal() * noise.jitter_sigma for _ in range(4)]
        score = rng.uniform_in(noise.score_lo, noise.score_hi)
        x0 = mapped.x_min + jit[0]
        y0 = mapped.y_min + jit[1]
        x1 = mapped.x_max + jit[2]
        y1 = mapped.y_max + jit[3]
        if x0 > x1:
            x0, x1 = x1, x0
        if y0 > y1:
            y0, y1 = y1, y0
        x0, x1 = max(x0, 0.0), min(x1, canvas_w)
        y0, y1 = max(y0, 0.0), min(y1, canvas_h)
        if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
            continue
        out.append(Detection(BBox(x0, y0, x1, y1), gt_box.class_id, score))

    n_fp = rng.poisson(noise.fp_rate)
    for _ in range(n_fp):
        x1 = rng.uniform() * canvas_w
        y1 = rng.uniform() * canvas_h
        x2 = rng.uniform() * canvas_w
        y2 = rng.uniform() * canvas_h
        score = rng.uniform_in(noise.fp_lo, noise.fp_hi)
        # false positives carry class id 0 (contract: no class draw)
        out.append(
            Detection(BBox(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2)), 0, score)
        )
    return out


class MockDetector:
    """Seeded noisy detector over a fixed ground-truth table."""

    def __init__(
        self,
        ground_truth: Mapping[str, Sequence[GroundTruthBox]],
        noise: MockNoise,
        name: str = "mock",
        sleep_ms: float = 0.0,
    ):
        self._gt = {k: list(v) for k, v in ground_truth.items()}
        self.noise = noise
        self.name = name
        self.sleep_ms = sleep_ms

    def supports_view(self, view_id: str) -> bool:
        return True

    def detect(
        self, view: ViewKey, view_transform: AffineTransform, canvas: tuple[float, float]
    ) -> list[Detection]:
        if view.image_id not in self._gt:
            raise DetectionLookupError(f"{self.name}: unknown image {view.image_id!r}")
        if self.sleep_ms > 0:
            time.sleep(self.sleep_ms / 1000.0)
        return mock_detect(self._gt[view.image_id], view_transform, canvas, self.noise, view)


class FileDetector:
    """Replays detection records grouped by (image_id, view_id).

    Images passed as ``image_ids`` exist with possibly zero detections; ids
    outside that set raise a lookup error. Non-identity views must have been
    declared (by a stored record or ``extra_views``), otherwise the handle
    reports no capability for them - there is no silent identity fallback.
    """

    def __init__(
        self,
        records: Iterable[DetectionRecord],
        image_ids: Iterable[str],
        name: str = "file",
        extra_views: Iterable[str] = (),
    ):
        self.name = name
        self._images = set(image_ids)
        self._views = {IDENTITY_VIEW, *extra_views}
        self._store: dict[tuple[str, str], list[Detection]] = {}
        for rec in records:
            if rec.image_id not in self._images:
                raise DetectionLookupError(
                    f"{name}: record for unknown image {rec.image_id!r}"
                )
            self._views.add(rec.view_id)
            self._store.setdefault((rec.image_id, rec.view_id), []).append(
                Detection(rec.bbox, rec.class_id, rec.score)
            )

    def supports_view(self, view_id: str) -> bool:
        return view_id in self._views

    def detect(
        self, view: ViewKey, view_transform: AffineTransform, canvas: tuple[float, float]
    ) -> list[Detection]:
        if not self.supports_view(view.view_id):
            raise CapabilityError(
                f"{self.name}: no stored detections for view {view.view_id!r}"
            )
        if view.image_id not in self._images:
            raise DetectionLookupError(f"{self.name}: unknown image {view.image_id!r}")
        return list(self._store.get((view.image_id, view.view_id), []))


def _precise_wait(seconds: float) -> None:
    """Sleep most of the interval, spin the last millisecond.

    Plain time.sleep overshoots by scheduler granularity, which would skew
    constant-cost stubs used to calibrate FPS arithmetic.
    """
    deadline = time.perf_counter() + seconds
    if seconds > 0.004:
        time.sleep(seconds - 0.003)
    while time.perf_counter() < deadline:
        pass


class StubDetector:
    """Constant-cost detector for latency benchmarks: waits, returns canned boxes."""

    def __init__(
        self,
        sleep_ms: float,
        detections: Optional[Mapping[str, Sequence[Detection]]] = None,
        name: str = "stub",
    ):
        if sleep_ms < 0:
            raise ValueError("sleep_ms must be non-negative")
        self.sleep_ms = sleep_ms
        self._dets = {k: list(v) for k, v in (detections or {}).items()}
        self.name = name

    def supports_view(self, view_id: str) -> bool:
        return True

    def detect(
        self, view: ViewKey, view_transform: AffineTransform, canvas: tuple[float, float]
    ) -> list[Detection]:
        if self.sleep_ms > 0:
            _precise_wait(self.sleep_ms / 1000.0)
        return list(self._dets.get(view.image_id, []))
