#!/usr/bin/env python3
"""Regenerate the bundled class-distribution fixture (fixtures/classdist*).

The fixture is a synthetic manifest whose per-class annotation counts match
the reference distribution used by the acceptance suite:
bicycle 848, bike 960, bus 760, car 13456, dog 390, person 12168, pole 4133
(total 32715). Output is deterministic; run from the repo root.
"""

import json
from pathlib import Path

COUNTS = {
    "bicycle": 848,
    "bike": 960,
    "bus": 760,
    "car": 13456,
    "dog": 390,
    "person": 12168,
    "pole": 4133,
}
CLASSES = list(COUNTS)
WIDTH, HEIGHT = 640, 480


def main() -> None:
    root = Path(__file__).resolve().parent.parent
    out_dir = root / "fixtures" / "classdist"
    out_dir.mkdir(parents=True, exist_ok=True)

    state = 0x2545F4914F6CDD1D
    images = []
    for class_id, name in enumerate(CLASSES):
        lines = []
        for _ in range(COUNTS[name]):
            vals = []
            for _ in range(2):
                state = (state * 6364136223846793005 + 1442695040888963407) % 2**64
                vals.append(0.2 + 0.6 * ((state >> 16) % 10_000) / 10_000)
            xc, yc = vals
            lines.append(f"{class_id} {xc:.4f} {yc:.4f} 0.080 0.120")
        (out_dir / f"{name}.txt").write_text("\n".join(lines) + "\n")
        images.append(
            {
                "id": f"frames_{name}",
                "width": WIDTH,
                "height": HEIGHT,
                "labels": f"classdist/{name}.txt",
            }
        )

    manifest = {"classes": CLASSES, "images": images}
    (root / "fixtures" / "classdist.json").write_text(
        json.dumps(manifest, indent=2) + "\n"
    )
    total = sum(COUNTS.values())
    print(f"wrote {total} annotations across {len(CLASSES)} label files")


if __name__ == "__main__":
    main()
