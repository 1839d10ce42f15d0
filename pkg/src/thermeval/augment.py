"""Training-side label-aware augmentation: affine transforms and mosaic.

Transforms map labels through exact box arithmetic and resample pixel buffers
(when present) by nearest neighbor only, so results are deterministic and
portable. Mosaic composes four samples onto quadrants of one canvas, scaling
each sample to its quadrant (stretch, no aspect preservation - quadrants tile
the output exactly). Boxes falling below the visible-fraction threshold are
dropped with a recorded reason, never silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .geometry import AffineTransform, BBox, GroundTruthBox, transform_box
from .rng import SplitMix64, derive_stream_seed
from .tta import Crop, Scale, TransformSpec, view_transform


@dataclass(frozen=True)
class Rotation:
    """Rotation in degrees about the canvas center (training-only spec)."""

    degrees: float

    def fingerprint(self) -> str:
        return f"rot:{self.degrees!r}"


@dataclass(frozen=True)
class Shear:
    """Shear by horizontal/vertical angles in degrees about the canvas center."""

    ax_deg: float
    ay_deg: float

    def fingerprint(self) -> str:
        return f"shear:{self.ax_deg!r},{self.ay_deg!r}"


AugmentSpec = Union[TransformSpec, Rotation, Shear]


@dataclass(frozen=True)
class LabeledSample:
    image_id: str
    width: int
    height: int
    boxes: tuple[GroundTruthBox, ...]
    pixels: Optional[np.ndarray] = None  # (height, width) uint8 when present

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("canvas must be positive")
        for gt in self.boxes:
            b = gt.bbox
            if b.x_min < 0 or b.y_min < 0 or b.x_max > self.width or b.y_max > self.height:
                raise ValueError(f"box {b} outside canvas {self.width}x{self.height}")
        if self.pixels is not None and self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} does not match canvas "
                f"{(self.height, self.width)}"
            )

    @property
    def canvas(self) -> tuple[float, float]:
        return (float(self.width), float(self.height))


@dataclass(frozen=True)
class DropRecord:
    """Why a box was removed during augmentation."""

    source_image_id: str
    source_index: int
    class_id: int
    visible_fraction: float
    reason: str = "below_min_visible_fraction"


@dataclass(frozen=True)
class MosaicParams:
    output_size: int
    pivot: Optional[tuple[float, float]] = None  # drawn from the clamp region if None
    min_visible_fraction: float = 0.10
    clamp_lo: float = 0.25
    clamp_hi: float = 0.75

    def __post_init__(self):
        if self.output_size <= 0:
            raise ValueError("output size must be positive")
        if not 0.0 < self.min_visible_fraction <= 1.0:
            raise ValueError("min_visible_fraction must be in (0, 1]")
        if not 0.0 <= self.clamp_lo <= self.clamp_hi <= 1.0:
            raise ValueError("clamp region must satisfy 0 <= lo <= hi <= 1")


def _spec_affine(spec: AugmentSpec, canvas: tuple[float, float]) -> AffineTransform:
    if isinstance(spec, Rotation):
        return AffineTransform.rotation_deg(spec.degrees, canvas[0] / 2.0, canvas[1] / 2.0)
    if isinstance(spec, Shear):
        return AffineTransform.shear_deg(
            spec.ax_deg, spec.ay_deg, canvas[0] / 2.0, canvas[1] / 2.0
        )
    return view_transform(spec, canvas)


def _output_canvas(spec: AugmentSpec, canvas: tuple[float, float]) -> tuple[int, int]:
    if isinstance(spec, Crop) and not spec.rescale:
        x0, y0, x1, y1 = spec.rect
        return (int(round(x1 - x0)), int(round(y1 - y0)))
    if isinstance(spec, Scale):
        return (int(round(spec.sx * canvas[0])), int(round(spec.sy * canvas[1])))
    return (int(canvas[0]), int(canvas[1]))


def _resample_nearest(
    pixels: np.ndarray, transform: AffineTransform, out_w: int, out_h: int
) -> np.ndarray:
    """Inverse-map output pixel centers through the transform, nearest source pixel.

    Flips and integer translations are bijections on the visible region under
    this scheme, so pixel mass is conserved there; off-canvas sources fill 0.
    """
    inv = transform.inverse()
    xs = np.arange(out_w, dtype=np.float64) + 0.5
    ys = np.arange(out_h, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    src_x = inv.a * gx + inv.b * gy + inv.tx
    src_y = inv.c * gx + inv.d * gy + inv.ty
    col = np.floor(src_x).astype(np.int64)
    row = np.floor(src_y).astype(np.int64)
    in_h, in_w = pixels.shape
    valid = (col >= 0) & (col < in_w) & (row >= 0) & (row < in_h)
    out = np.zeros((out_h, out_w), dtype=pixels.dtype)
    out[valid] = pixels[row[valid], col[valid]]
    return out


def apply_labeled(
    sample: LabeledSample,
    spec: AugmentSpec,
    seed: Optional[int] = None,
    min_visible_fraction: float = 0.10,
) -> LabeledSample:
    """Apply one transform to a labeled sample.

    Boxes are mapped through the affine, clipped to the output canvas, and
    dropped when their visible fraction falls below the threshold. The seed is
    reserved for randomized batch pipelines; every current spec is fully
    deterministic.
    """
    del seed  # all current specs are parameter-free deterministic
    transform = _spec_affine(spec, sample.canvas)
    out_w, out_h = _output_canvas(spec, sample.canvas)
    boxes: list[GroundTruthBox] = []
    for gt in sample.boxes:
        mapped = transform_box(transform, gt.bbox)
        kept = _clip_to_rect(mapped, 0.0, 0.0, float(out_w), float(out_h))
        if kept is None:
            continue
        box, fraction = kept
        if fraction < min_visible_fraction:
            continue
        boxes.append(GroundTruthBox(box, gt.class_id))
    pixels = None
    if sample.pixels is not None:
        pixels = _resample_nearest(sample.pixels, transform, out_w, out_h)
    return LabeledSample(
        image_id=sample.image_id,
        width=out_w,
        height=out_h,
        boxes=tuple(boxes),
        pixels=pixels,
    )


def _clip_to_rect(
    b: BBox, x0: float, y0: float, x1: float, y1: float
) -> Optional[tuple[BBox, float]]:
    """Clip to an arbitrary rect; fraction is relative to the box's own area."""
    area = b.area
    if area <= 0.0:
        return None
    cx0 = max(b.x_min, x0)
    cy0 = max(b.y_min, y0)
    cx1 = min(b.x_max, x1)
    cy1 = min(b.y_max, y1)
    if cx1 - cx0 <= 0.0 or cy1 - cy0 <= 0.0:
        return None
    clipped = BBox(cx0, cy0, cx1, cy1)
    return clipped, clipped.area / area


@dataclass(frozen=True)
class MosaicResult:
    sample: LabeledSample
    dropped: tuple[DropRecord, ...]


def quadrant_rects(size: float, pivot: tuple[float, float]) -> list[tuple[float, float, float, float]]:
    """Top-left, top-right, bottom-left, bottom-right rects around the pivot."""
    px, py = pivot
    return [
        (0.0, 0.0, px, py),
        (px, 0.0, size, py),
        (0.0, py, px, size),
        (px, py, size, size),
    ]


def clamp_pivot(params: MosaicParams, requested: tuple[float, float]) -> tuple[float, float]:
    lo = params.clamp_lo * params.output_size
    hi = params.clamp_hi * params.output_size
    return (min(max(requested[0], lo), hi), min(max(requested[1], lo), hi))


def mosaic(
    samples: Sequence[LabeledSample],
    params: MosaicParams,
    seed: int = 0,
) -> MosaicResult:
    """Compose exactly four labeled samples onto one square canvas.

    Samples map to quadrants in list order (TL, TR, BL, BR); each is scaled to
    fill its quadrant. Boxes are mapped through the quadrant affine, clipped
    to the quadrant, and dropped below the visible-fraction threshold with a
    DropRecord. When no pivot is supplied one is drawn uniformly from the
    clamp region using the documented seeded generator.
    """
    if len(samples) != 4:
        raise ValueError(f"mosaic needs exactly 4 samples, got {len(samples)}")
    size = float(params.output_size)
    if params.pivot is None:
        rng = SplitMix64(derive_stream_seed(seed, "mosaic", "pivot"))
        lo = params.clamp_lo * size
        hi = params.clamp_hi * size
        pivot = (rng.uniform_in(lo, hi), rng.uniform_in(lo, hi))
    else:
        pivot = clamp_pivot(params, params.pivot)

    rects = quadrant_rects(size, pivot)
    boxes: list[GroundTruthBox] = []
    dropped: list[DropRecord] = []
    transforms: list[AffineTransform] = []
    for sample, rect in zip(samples, rects):
        qx0, qy0, qx1, qy1 = rect
        sx = (qx1 - qx0) / sample.width
        sy = (qy1 - qy0) / sample.height
        t = AffineTransform.translation(qx0, qy0).compose(AffineTransform.scaling(sx, sy))
        transforms.append(t)
        for index, gt in enumerate(sample.boxes):
            mapped = transform_box(t, gt.bbox)
            kept = _clip_to_rect(mapped, qx0, qy0, qx1, qy1)
            fraction = kept[1] if kept is not None else 0.0
            if kept is None or fraction < params.min_visible_fraction:
                dropped.append(
                    DropRecord(
                        source_image_id=sample.image_id,
                        source_index=index,
                        class_id=gt.class_id,
                        visible_fraction=fraction,
                    )
                )
                continue
            boxes.append(GroundTruthBox(kept[0], gt.class_id))

    pixels = None
    if all(s.pixels is not None for s in samples):
        # a pixel belongs to the quadrant containing its center, so the four
        # integer regions tile the output grid exactly
        n = params.output_size
        split_col = min(max(int(np.ceil(pivot[0] - 0.5)), 0), n)
        split_row = min(max(int(np.ceil(pivot[1] - 0.5)), 0), n)
        regions = [
            (0, split_row, 0, split_col),
            (0, split_row, split_col, n),
            (split_row, n, 0, split_col),
            (split_row, n, split_col, n),
        ]
        pixels = np.zeros((n, n), dtype=np.uint8)
        for sample, t, (r0, r1, c0, c1) in zip(samples, transforms, regions):
            if r1 <= r0 or c1 <= c0:
                continue
            patch = _resample_nearest(
                sample.pixels,
                AffineTransform.translation(-c0, -r0).compose(t),
                c1 - c0,
                r1 - r0,
            )
            pixels[r0:r1, c0:c1] = patch

    out = LabeledSample(
        image_id="mosaic(" + ",".join(s.image_id for s in samples) + ")",
        width=params.output_size,
        height=params.output_size,
        boxes=tuple(boxes),
        pixels=pixels,
    )
    return MosaicResult(sample=out, dropped=tuple(dropped))
