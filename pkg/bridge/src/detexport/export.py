"""Batch inference over a manifest, written as toolkit detection files.

The bridge never computes metrics; it only produces detection files (JSON
Lines, one record per box per image per view) for the evaluation toolkit to
consume. Non-identity views carry the view's fingerprint in ``view_id`` and
coordinates in the view frame; the toolkit inverse-maps them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from .manifest import ManifestImage, read_manifest
from .model import load_model

SUPPORTED_VIEWS = ("identity", "hflip", "vflip")


class ExportError(RuntimeError):
    """Export failed; the message names the offending path."""


@dataclass(frozen=True)
class ExportJob:
    model_path: str
    manifest_path: str
    out_path: str
    conf_floor: float = 0.001  # export nearly all boxes so AP sweeps stay valid
    views: tuple[str, ...] = ("identity",)

    def __post_init__(self):
        if not 0.0 <= self.conf_floor <= 1.0:
            raise ValueError("conf_floor must be in [0, 1]")
        unknown = [v for v in self.views if v not in SUPPORTED_VIEWS]
        if unknown:
            raise ValueError(
                f"unsupported views {unknown}; the bridge serves {SUPPORTED_VIEWS}"
            )


def _load_grayscale(entry: ManifestImage) -> np.ndarray:
    if entry.image_path is None:
        raise ExportError(f"image {entry.id!r}: manifest entry has no image path")
    try:
        with Image.open(entry.image_path) as img:
            arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    except OSError as exc:
        raise ExportError(f"cannot read image {entry.image_path}: {exc}") from exc
    return arr


def _view_pixels(pixels: np.ndarray, view: str) -> np.ndarray:
    if view == "identity":
        return pixels
    if view == "hflip":
        return pixels[:, ::-1]
    if view == "vflip":
        return pixels[::-1, :]
    raise ValueError(view)


def export_detections(job: ExportJob) -> int:
    """Run the model over every image and view; returns the record count."""
    try:
        model = load_model(job.model_path)
    except (OSError, RuntimeError, ValueError) as exc:
        raise ExportError(f"cannot load checkpoint {job.model_path}: {exc}") from exc
    images = read_manifest(job.manifest_path)

    written = 0
    with open(job.out_path, "w", encoding="utf-8") as out:
        for entry in images:
            pixels = _load_grayscale(entry)
            for view in job.views:
                view_pixels = np.ascontiguousarray(_view_pixels(pixels, view))
                tensor = torch.from_numpy(view_pixels)[None, None, :, :]
                with torch.no_grad():
                    boxes, scores, labels = model(tensor)
                for box, score, label in zip(
                    boxes.tolist(), scores.tolist(), labels.tolist()
                ):
                    if score < job.conf_floor:
                        continue
                    record = {
                        "image_id": entry.id,
                        "class_id": int(label),
                        "score": float(score),
                        "bbox": [float(v) for v in box],
                    }
                    if view != "identity":
                        record["view_id"] = view
                    out.write(json.dumps(record, separators=(",", ":")))
                    out.write("\n")
                    written += 1
    return written
