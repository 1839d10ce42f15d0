"""Annotation, detection and manifest file handling plus dataset statistics.

File grammars are documented in docs/FORMATS.md:

* label files: one ``class_id x_center y_center width height`` line per box,
  all four geometry fields normalized to [0, 1]
* detection files: JSON Lines with image_id / class_id / score / bbox and an
  optional view_id (default "identity")
* manifest: JSON document with "classes" and "images"; relative paths resolve
  against the manifest's directory
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Union

import numpy as np

from .geometry import BBox, GroundTruthBox

DEFAULT_CLASS_NAMES = ("bicycle", "bike", "bus", "car", "dog", "person", "pole")

# slack for float round-trip noise in normalized label values
_NORMALIZED_SLACK = 1e-6


class LabelParseError(ValueError):
    """Malformed label file; message carries the line number."""


class DetectionParseError(ValueError):
    """Malformed detection file; message carries the line number."""


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ClassMap:
    """Ordered class names; the id of a class is its position."""

    names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self):
        if not self.names:
            raise ValueError("class map must not be empty")
        if any(not n for n in self.names):
            raise ValueError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def name(self, class_id: int) -> str:
        return self.names[class_id]

    def id_of(self, name: str) -> int:
        return self.names.index(name)

    def contains_id(self, class_id: int) -> bool:
        return 0 <= class_id < len(self.names)


@dataclass(frozen=True)
class ImageEntry:
    id: str
    width: int
    height: int
    label_path: Optional[str] = None
    image_path: Optional[str] = None
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.id!r}: width/height must be positive")


@dataclass(frozen=True)
class DatasetManifest:
    class_map: ClassMap
    images: tuple[ImageEntry, ...]
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [e.id for e in self.images]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate image ids: {dupes}")

    def entry(self, image_id: str) -> ImageEntry:
        for e in self.images:
            if e.id == image_id:
                return e
        raise KeyError(image_id)

    def image_ids(self) -> list[str]:
        return [e.id for e in self.images]

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


@dataclass(frozen=True)
class DetectionRecord:
    """One serialized detection; bbox is pixel corners (x_min..y_max)."""

    image_id: str
    class_id: int
    score: float
    bbox: BBox
    view_id: str = "identity"


def parse_label_file(
    text: str, image_w: float, image_h: float, class_map: ClassMap
) -> list[GroundTruthBox]:
    """Parse normalized-center label lines into pixel-corner ground truth.

    Values outside [0, 1] by at most 1e-6 are clamped; anything further is an
    error naming the line. Resulting boxes are clipped to the canvas.
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    boxes: list[GroundTruthBox] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise LabelParseError(
                f"line {lineno}: expected 5 fields, got {len(fields)}"
            )
        try:
            class_id = int(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise LabelParseError(f"line {lineno}: non-numeric field ({exc})") from exc
        if not class_map.contains_id(class_id):
            raise LabelParseError(
                f"line {lineno}: class id out of range: {class_id} "
                f"(map has {len(class_map)} classes)"
            )
        clamped = []
        for v in values:
            if v < -_NORMALIZED_SLACK or v > 1.0 + _NORMALIZED_SLACK:
                raise LabelParseError(
                    f"line {lineno}: normalized value out of [0, 1]: {v}"
                )
            clamped.append(min(max(v, 0.0), 1.0))
        xc, yc, w, h = clamped
        x0 = (xc - w / 2.0) * image_w
        y0 = (yc - h / 2.0) * image_h
        x1 = (xc + w / 2.0) * image_w
        y1 = (yc + h / 2.0) * image_h
        x0, x1 = max(x0, 0.0), min(x1, float(image_w))
        y0, y1 = max(y0, 0.0), min(y1, float(image_h))
        boxes.append(GroundTruthBox(BBox(x0, y0, max(x0, x1), max(y0, y1)), class_id))
    return boxes


def format_label_file(
    boxes: Iterable[GroundTruthBox], image_w: float, image_h: float
) -> str:
    """Inverse of parse_label_file; floats keep full repr precision."""
    lines = []
    for gt in boxes:
        b = gt.bbox
        xc = float((b.x_min + b.x_max) / 2.0 / image_w)
        yc = float((b.y_min + b.y_max) / 2.0 / image_h)
        w = float(b.width / image_w)
        h = float(b.height / image_h)
        lines.append(f"{gt.class_id} {xc!r} {yc!r} {w!r} {h!r}")
    return "\n".join(lines) + ("\n" if lines else "")


def _record_to_json(rec: DetectionRecord) -> str:
    obj: dict = {
        "image_id": rec.image_id,
        "class_id": rec.class_id,
        "score": rec.score,
        "bbox": list(rec.bbox.as_tuple()),
    }
    if rec.view_id != "identity":
        obj["view_id"] = rec.view_id
    return json.dumps(obj, separators=(",", ":"))


def write_detections(records: Iterable[DetectionRecord], dest: Union[IO[str], str, Path]) -> None:
    """Write JSONL detection records; round-trips coordinates exactly."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8") as fh:
            write_detections(records, fh)
        return
    for rec in records:
        dest.write(_record_to_json(rec))
        dest.write("\n")


def read_detections(
    source: Union[IO[str], str, Path],
    manifest: Optional[DatasetManifest] = None,
) -> list[DetectionRecord]:
    """Read JSONL detection records, validating image ids when a manifest is given."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return read_detections(fh, manifest)
    records: list[DetectionRecord] = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DetectionParseError(f"line {lineno}: invalid JSON ({exc})") from exc
        try:
            bbox_vals = obj["bbox"]
            if not isinstance(bbox_vals, list) or len(bbox_vals) != 4:
                raise DetectionParseError(f"line {lineno}: bbox must be 4 floats")
            rec = DetectionRecord(
                image_id=str(obj["image_id"]),
                class_id=int(obj["class_id"]),
                score=float(obj["score"]),
                bbox=BBox(*(float(v) for v in bbox_vals)),
                view_id=str(obj.get("view_id", "identity")),
            )
        except DetectionParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectionParseError(f"line {lineno}: bad record ({exc})") from exc
        if not 0.0 <= rec.score <= 1.0:
            raise DetectionParseError(f"line {lineno}: score out of [0, 1]: {rec.score}")
        records.append(rec)
    if manifest is not None:
        known = set(manifest.image_ids())
        unknown = sorted({r.image_id for r in records} - known)
        if unknown:
            raise DetectionParseError(f"unknown image ids: {unknown}")
    return records


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "images" not in doc:
        raise ManifestError(f"{path}: manifest needs top-level 'images'")
    classes = doc.get("classes", list(DEFAULT_CLASS_NAMES))
    entries = []
    for i, item in enumerate(doc["images"]):
        try:
            entries.append(
                ImageEntry(
                    id=str(item["id"]),
                    width=int(item["width"]),
                    height=int(item["height"]),
                    label_path=item.get("labels"),
                    image_path=item.get("image"),
                    tags=tuple(item.get("tags", ())),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: images[{i}]: {exc}") from exc
    return DatasetManifest(
        class_map=ClassMap(tuple(classes)),
        images=tuple(entries),
        base_dir=path.parent,
    )


def save_manifest(manifest: DatasetManifest, path: Union[str, Path]) -> None:
    doc = {
        "classes": list(manifest.class_map.names),
        "images": [
            {
                "id": e.id,
                "width": e.width,
                "height": e.height,
                **({"labels": e.label_path} if e.label_path else {}),
                **({"image": e.image_path} if e.image_path else {}),
                **({"tags": list(e.tags)} if e.tags else {}),
            }
            for e in manifest.images
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_ground_truth(manifest: DatasetManifest) -> dict[str, list[GroundTruthBox]]:
    """Parse every referenced label file; images without labels get []."""
    out: dict[str, list[GroundTruthBox]] = {}
    for entry in manifest.images:
        if entry.label_path is None:
            out[entry.id] = []
            continue
        path = manifest.resolve(entry.label_path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ManifestError(f"{path}: cannot read label file ({exc})") from exc
        try:
            out[entry.id] = parse_label_file(
                text, entry.width, entry.height, manifest.class_map
            )
        except LabelParseError as exc:
            raise LabelParseError(f"{path}: {exc}") from exc
    return out


def class_distribution(manifest: DatasetManifest) -> tuple[Counter, int]:
    """Ground-truth box count per class id plus the grand total."""
    counts: Counter = Counter()
    for boxes in load_ground_truth(manifest).values():
        for gt in boxes:
            counts[gt.class_id] += 1
    return counts, sum(counts.values())


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) grayscale image as an (H, W) uint8 array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).copy()


def write_pgm(pixels: np.ndarray, path: Union[str, Path]) -> None:
    if pixels.ndim != 2:
        raise ValueError("pixel buffer must be 2-D (H, W)")
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())
