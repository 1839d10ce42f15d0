"""Minimal reader for the evaluation toolkit's manifest format.

Only the fields the bridge needs; the full schema lives with the toolkit
(docs/FORMATS.md there). Intentionally self-contained: the bridge talks to the
toolkit through files, not imports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class ManifestImage:
    id: str
    width: int
    height: int
    image_path: Path | None


def read_manifest(path: str | Path) -> list[ManifestImage]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    base = path.parent
    images = []
    for item in doc.get("images", []):
        rel = item.get("image")
        images.append(
            ManifestImage(
                id=str(item["id"]),
                width=int(item["width"]),
                height=int(item["height"]),
                image_path=(base / rel if rel else None),
            )
        )
    return images
