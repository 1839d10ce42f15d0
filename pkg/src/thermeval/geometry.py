"""Axis-aligned box arithmetic: IoU, NMS, affine corner mapping, clipping.

Coordinates are continuous pixels in corner form (x_min, y_min, x_max, y_max);
area is (x_max - x_min) * (y_max - y_min) with no +1 correction. Zero-area
boxes are legal and have IoU 0 against everything. All operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, corner form, pixel units."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            _require_finite(name, getattr(self, name))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"box corners out of order: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> list[tuple[float, float]]:
        return [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Detection:
    """A predicted box with class id and confidence score in [0, 1]."""

    bbox: BBox
    class_id: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}")


@dataclass(frozen=True)
class GroundTruthBox:
    bbox: BBox
    class_id: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}")


@dataclass(frozen=True)
class AffineTransform:
    """2x3 map applied as x' = a*x + b*y + tx, y' = c*x + d*y + ty."""

    a: float
    b: float
    tx: float
    c: float
    d: float
    ty: float

    def __post_init__(self):
        for name in ("a", "b", "tx", "c", "d", "ty"):
            _require_finite(name, getattr(self, name))
        if self.determinant == 0.0:
            raise ValueError("affine transform must be invertible (det != 0)")

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.a * x + self.b * y + self.tx, self.c * x + self.d * y + self.ty)

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        ia = self.d / det
        ib = -self.b / det
        ic = -self.c / det
        id_ = self.a / det
        return AffineTransform(
            a=ia,
            b=ib,
            tx=-(ia * self.tx + ib * self.ty),
            c=ic,
            d=id_,
            ty=-(ic * self.tx + id_ * self.ty),
        )

    def compose(self, inner: "AffineTransform") -> "AffineTransform":
        """Transform equal to applying ``inner`` first, then self."""
        return AffineTransform(
            a=self.a * inner.a + self.b * inner.c,
            b=self.a * inner.b + self.b * inner.d,
            tx=self.a * inner.tx + self.b * inner.ty + self.tx,
            c=self.c * inner.a + self.d * inner.c,
            d=self.c * inner.b + self.d * inner.d,
            ty=self.c * inner.tx + self.d * inner.ty + self.ty,
        )

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineTransform":
        return cls(1.0, 0.0, dx, 0.0, 1.0, dy)

    @classmethod
    def scaling(cls, sx: float, sy: float) -> "AffineTransform":
        return cls(sx, 0.0, 0.0, 0.0, sy, 0.0)

    @classmethod
    def hflip(cls, width: float) -> "AffineTransform":
        return cls(-1.0, 0.0, width, 0.0, 1.0, 0.0)

    @classmethod
    def vflip(cls, height: float) -> "AffineTransform":
        return cls(1.0, 0.0, 0.0, 0.0, -1.0, height)

    @classmethod
    def rotation_deg(cls, degrees: float, cx: float, cy: float) -> "AffineTransform":
        """Rotation about (cx, cy): the standard counter-clockwise matrix
        [cos -sin; sin cos] applied to pixel coordinates, so 90 deg sends
        (x, y) to (cx + cy - y, cy - cx + x)."""
        rad = math.radians(degrees)
        cos_t, sin_t = math.cos(rad), math.sin(rad)
        return cls(
            a=cos_t,
            b=-sin_t,
            tx=cx - cos_t * cx + sin_t * cy,
            c=sin_t,
            d=cos_t,
            ty=cy - sin_t * cx - cos_t * cy,
        )

    @classmethod
    def shear_deg(cls, ax_deg: float, ay_deg: float, cx: float, cy: float) -> "AffineTransform":
        """Shear by horizontal/vertical angles about (cx, cy):
        x' = x + tan(ax) * (y - cy), y' = y + tan(ay) * (x - cx)."""
        kx = math.tan(math.radians(ax_deg))
        ky = math.tan(math.radians(ay_deg))
        return cls(a=1.0, b=kx, tx=-kx * cy, c=ky, d=1.0, ty=-ky * cx)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union has zero area."""
    ix0 = max(a.x_min, b.x_min)
    iy0 = max(a.y_min, b.y_min)
    ix1 = min(a.x_max, b.x_max)
    iy1 = min(a.y_max, b.y_max)
    iw = ix1 - ix0
    ih = iy1 - iy0
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union > 0.0:
        return inter / union
    return 0.0


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    out = np.empty((len(boxes), 4), dtype=np.float64)
    for i, b in enumerate(boxes):
        out[i, 0] = b.x_min
        out[i, 1] = b.y_min
        out[i, 2] = b.x_max
        out[i, 3] = b.y_max
    return out


def score_descending_order(scores: Sequence[float]) -> np.ndarray:
    """Indices by descending score; equal scores keep input order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def nms(dets: Sequence[Detection], iou_thresh: float, class_aware: bool = True) -> list[Detection]:
    """Greedy non-maximum suppression.

    Keeps the highest-scored box of each overlap cluster (score ties broken by
    lower input index) and suppresses remaining boxes with IoU >= iou_thresh,
    same-class only when class_aware. Output is score-descending.
    """
    if not 0.0 <= iou_thresh <= 1.0:
        raise ValueError(f"iou_thresh must be in [0, 1], got {iou_thresh}")
    if len(dets) <= 1:
        return list(dets)
    order = score_descending_order([d.score for d in dets])
    boxes = boxes_to_array([dets[i].bbox for i in order])
    classes = np.asarray([dets[i].class_id for i in order], dtype=np.int64)
    alive = _kernels.suppress_sorted(boxes, classes, float(iou_thresh), bool(class_aware))
    return [dets[order[i]] for i in range(len(order)) if alive[i]]


def transform_box(t: AffineTransform, b: BBox) -> BBox:
    """Axis-aligned hull of the box's four corners mapped through t."""
    xs: list[float] = []
    ys: list[float] = []
    for x, y in b.corners():
        px, py = t.apply(x, y)
        xs.append(px)
        ys.append(py)
    return BBox(min(xs), min(ys), max(xs), max(ys))


def clip_box(b: BBox, canvas_w: float, canvas_h: float) -> Optional[tuple[BBox, float]]:
    """Clip to [0, canvas_w] x [0, canvas_h].

    Returns (clipped box, visible fraction = clipped area / original area), or
    None when the original box has zero area or the overlap is empty (an
    intersection degenerated to a line or point counts as empty).
    """
    if canvas_w <= 0 or canvas_h <= 0:
        raise ValueError("canvas dimensions must be positive")
    original = b.area
    if original <= 0.0:
        return None
    x0 = max(b.x_min, 0.0)
    y0 = max(b.y_min, 0.0)
    x1 = min(b.x_max, float(canvas_w))
    y1 = min(b.y_max, float(canvas_h))
    if x1 - x0 <= 0.0 or y1 - y0 <= 0.0:
        return None
    clipped = BBox(x0, y0, x1, y1)
    return clipped, clipped.area / original
