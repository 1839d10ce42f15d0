"""Test-time augmentation: build views, inverse-map detections, fuse.

A TransformSpec describes one augmented view declaratively; view_transform
turns it into the source->view affine for a given canvas. tta_detect runs the
detector on every configured view, maps each view's detections back into the
original frame and fuses the pooled boxes with NMS or weighted fusion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .detector import CapabilityError, DetectorHandle, ViewKey
from .geometry import (
    AffineTransform,
    BBox,
    Detection,
    boxes_to_array,
    clip_box,
    score_descending_order,
    transform_box,
)


def _fmt(value: float) -> str:
    """Canonical float rendering for view fingerprints (shortest round-trip)."""
    return repr(float(value))


@dataclass(frozen=True)
class Identity:
    def fingerprint(self) -> str:
        return "identity"


@dataclass(frozen=True)
class HFlip:
    def fingerprint(self) -> str:
        return "hflip"


@dataclass(frozen=True)
class VFlip:
    def fingerprint(self) -> str:
        return "vflip"


@dataclass(frozen=True)
class Shift:
    dx: float
    dy: float

    def fingerprint(self) -> str:
        return f"shift:{_fmt(self.dx)},{_fmt(self.dy)}"


@dataclass(frozen=True)
class Scale:
    sx: float
    sy: float

    def __post_init__(self):
        if self.sx <= 0 or self.sy <= 0:
            raise ValueError("scale factors must be positive")

    def fingerprint(self) -> str:
        return f"scale:{_fmt(self.sx)},{_fmt(self.sy)}"


@dataclass(frozen=True)
class Crop:
    """Crop to a source-pixel rect, optionally rescaled back to the canvas size."""

    rect: tuple[float, float, float, float]
    rescale: bool = True

    def __post_init__(self):
        x0, y0, x1, y1 = self.rect
        if x1 <= x0 or y1 <= y0:
            raise ValueError("crop rect must have positive area")

    def fingerprint(self) -> str:
        x0, y0, x1, y1 = self.rect
        kind = "rescaled" if self.rescale else "native"
        return f"crop:{_fmt(x0)},{_fmt(y0)},{_fmt(x1)},{_fmt(y1)}:{kind}"


TransformSpec = Union[Identity, HFlip, VFlip, Shift, Crop, Scale]


# Canvas-relative templates: resolve to concrete pixel specs per image so one
# config can serve mixed-resolution datasets.
@dataclass(frozen=True)
class RelativeShift:
    fx: float
    fy: float

    def resolve(self, canvas: tuple[float, float]) -> Shift:
        return Shift(self.fx * canvas[0], self.fy * canvas[1])


@dataclass(frozen=True)
class CentralCrop:
    fraction: float
    rescale: bool = True

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("crop fraction must be in (0, 1]")

    def resolve(self, canvas: tuple[float, float]) -> Crop:
        w, h = canvas
        mx = w * (1.0 - self.fraction) / 2.0
        my = h * (1.0 - self.fraction) / 2.0
        return Crop((mx, my, w - mx, h - my), rescale=self.rescale)


ViewSpec = Union[TransformSpec, RelativeShift, CentralCrop]


@dataclass(frozen=True)
class NmsMerge:
    """Keep the max-score representative of each overlap cluster."""

    iou: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError("merge iou must be in [0, 1]")


@dataclass(frozen=True)
class WeightedMerge:
    """Replace each cluster with its score-weighted mean box and mean score."""

    iou: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.iou <= 1.0:
            raise ValueError("merge iou must be in [0, 1]")


MergeStrategy = Union[NmsMerge, WeightedMerge]


@dataclass(frozen=True)
class TtaConfig:
    views: tuple[ViewSpec, ...] = (
        Identity(),
        HFlip(),
        RelativeShift(0.05, 0.0),
        CentralCrop(0.9, rescale=True),
    )
    merge: MergeStrategy = NmsMerge(0.5)
    min_visible_fraction: float = 0.25

    def __post_init__(self):
        if Identity() not in self.views:
            raise ValueError("TTA view list must contain the identity view")
        if not 0.0 < self.min_visible_fraction <= 1.0:
            raise ValueError("min_visible_fraction must be in (0, 1]")

    def resolved_views(self, canvas: tuple[float, float]) -> list[TransformSpec]:
        return [resolve_spec(v, canvas) for v in self.views]


def resolve_spec(spec: ViewSpec, canvas: tuple[float, float]) -> TransformSpec:
    if isinstance(spec, (RelativeShift, CentralCrop)):
        return spec.resolve(canvas)
    return spec


def view_transform(spec: TransformSpec, canvas: tuple[float, float]) -> AffineTransform:
    """Source->view coordinate map for the spec on the given canvas."""
    w, h = float(canvas[0]), float(canvas[1])
    if isinstance(spec, Identity):
        return AffineTransform.identity()
    if isinstance(spec, HFlip):
        return AffineTransform.hflip(w)
    if isinstance(spec, VFlip):
        return AffineTransform.vflip(h)
    if isinstance(spec, Shift):
        return AffineTransform.translation(spec.dx, spec.dy)
    if isinstance(spec, Scale):
        return AffineTransform.scaling(spec.sx, spec.sy)
    if isinstance(spec, Crop):
        x0, y0, x1, y1 = spec.rect
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
            raise ValueError(f"crop rect {spec.rect} exceeds canvas {canvas}")
        move = AffineTransform.translation(-x0, -y0)
        if not spec.rescale:
            return move
        return AffineTransform.scaling(w / (x1 - x0), h / (y1 - y0)).compose(move)
    raise TypeError(f"unsupported view spec: {spec!r}")


def view_canvas(spec: TransformSpec, canvas: tuple[float, float]) -> tuple[float, float]:
    """Size of the view frame produced by the spec."""
    w, h = float(canvas[0]), float(canvas[1])
    if isinstance(spec, Crop) and not spec.rescale:
        x0, y0, x1, y1 = spec.rect
        return (x1 - x0, y1 - y0)
    if isinstance(spec, Scale):
        return (spec.sx * w, spec.sy * h)
    return (w, h)


def inverse_map(
    dets: Sequence[Detection],
    spec: TransformSpec,
    canvas: tuple[float, float],
    min_visible_fraction: float = 0.25,
) -> list[Detection]:
    """Map view-frame detections back to the original frame.

    Boxes are clipped to the original canvas; crop-view boxes additionally
    need visible fraction >= min_visible_fraction to survive (boxes the crop
    could not see are recoverable only from other views).
    """
    inv = view_transform(spec, canvas).inverse()
    is_crop = isinstance(spec, Crop)
    out: list[Detection] = []
    for det in dets:
        mapped = transform_box(inv, det.bbox)
        clipped = clip_box(mapped, canvas[0], canvas[1])
        if clipped is None:
            continue
        box, fraction = clipped
        if is_crop and fraction < min_visible_fraction:
            continue
        out.append(Detection(box, det.class_id, det.score))
    return out


def fuse_detections(dets: Sequence[Detection], merge: MergeStrategy) -> list[Detection]:
    """Fuse pooled detections with the configured strategy.

    Clustering is greedy and class-aware: the highest-scored unassigned box
    seeds a cluster and absorbs every remaining same-class box with
    IoU >= merge.iou against the seed (ties in score keep the lower pooled
    index as seed, making fusion a deterministic ordered reduction).
    """
    if len(dets) <= 1:
        return list(dets)
    order = score_descending_order([d.score for d in dets])
    boxes = boxes_to_array([dets[i].bbox for i in order])
    classes = np.asarray([dets[i].class_id for i in order], dtype=np.int64)
    if isinstance(merge, NmsMerge):
        alive = _kernels.suppress_sorted(boxes, classes, float(merge.iou), True)
        return [dets[order[i]] for i in range(len(order)) if alive[i]]

    # weighted fusion: same clustering, cluster replaced by weighted mean box
    n = len(order)
    assigned = np.zeros(n, dtype=bool)
    fused: list[Detection] = []
    for i in range(n):
        if assigned[i]:
            continue
        member_rows = [i]
        assigned[i] = True
        if i + 1 < n:
            row = _kernels.iou_matrix(boxes[i : i + 1], boxes[i + 1 :])[0]
            for off, v in enumerate(row):
                j = i + 1 + off
                if not assigned[j] and classes[j] == classes[i] and v >= merge.iou:
                    member_rows.append(j)
                    assigned[j] = True
        members = [dets[order[j]] for j in member_rows]
        weight = sum(m.score for m in members)
        if weight > 0:
            coords = [
                sum(m.score * getattr(m.bbox, f) for m in members) / weight
                for f in ("x_min", "y_min", "x_max", "y_max")
            ]
        else:
            coords = list(members[0].bbox.as_tuple())
        mean_score = sum(m.score for m in members) / len(members)
        fused.append(Detection(BBox(*coords), members[0].class_id, mean_score))
    fused.sort(key=lambda d: -d.score)
    return fused


def tta_detect(
    detector: DetectorHandle,
    image_id: str,
    canvas: tuple[float, float],
    cfg: TtaConfig,
) -> list[Detection]:
    """Detect on every configured view, inverse-map, pool, and fuse."""
    pooled: list[Detection] = []
    for spec in cfg.resolved_views(canvas):
        fp = spec.fingerprint()
        if not detector.supports_view(fp):
            raise CapabilityError(
                f"detector {detector.name!r} cannot serve view {fp!r}"
            )
        vt = view_transform(spec, canvas)
        dets = detector.detect(ViewKey(image_id, fp), vt, view_canvas(spec, canvas))
        pooled.extend(inverse_map(dets, spec, canvas, cfg.min_visible_fraction))
    return fuse_detections(pooled, cfg.merge)
