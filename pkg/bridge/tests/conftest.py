import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

SIZE = 256
GRID = 8
CELL = SIZE // GRID  # 32 px cells; blobs align to the demo detector's grid


def write_blob_image(path: Path, cells) -> None:
    arr = np.zeros((SIZE, SIZE), dtype=np.uint8)
    for cx, cy in cells:
        arr[cy * CELL + 2 : (cy + 1) * CELL - 2, cx * CELL + 2 : (cx + 1) * CELL - 2] = 240
    Image.fromarray(arr, mode="L").save(path)


def write_labels(path: Path, cells, class_id: int = 3) -> None:
    lines = [
        f"{class_id} {(cx + 0.5) * CELL / SIZE} {(cy + 0.5) * CELL / SIZE} "
        f"{CELL / SIZE} {CELL / SIZE}"
        for cx, cy in cells
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def build_dataset(root: Path, cells_per_image: dict) -> Path:
    """Blob images + matching labels + manifest; returns the manifest path."""
    images = []
    for image_id, cells in cells_per_image.items():
        write_blob_image(root / f"{image_id}.png", cells)
        write_labels(root / f"{image_id}.txt", cells)
        images.append(
            {
                "id": image_id,
                "width": SIZE,
                "height": SIZE,
                "labels": f"{image_id}.txt",
                "image": f"{image_id}.png",
            }
        )
    manifest = {
        "classes": ["bicycle", "bike", "bus", "car", "dog", "person", "pole"],
        "images": images,
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


@pytest.fixture()
def demo_model(tmp_path):
    from detexport.model import save_demo_model

    path = tmp_path / "model.pt"
    save_demo_model(path, grid=GRID, threshold=0.2, class_id=3)
    return path
