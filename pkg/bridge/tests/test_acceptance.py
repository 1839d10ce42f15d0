"""Bridge acceptance: exported files drive the evaluation toolkit end-to-end.

The toolkit is consumed strictly through its external interfaces (detection
file format + CLI subprocess), never imported.
"""

import json
import subprocess
import sys

from conftest import SIZE, build_dataset
from detexport.export import ExportJob, export_detections


def run_toolkit(*args):
    return subprocess.run(
        [sys.executable, "-m", "thermeval", *map(str, args)],
        capture_output=True,
        text=True,
    )


def test_five_image_export_evaluates_end_to_end(tmp_path, demo_model):
    cells_per_image = {
        "img0": [(1, 1), (5, 2)],
        "img1": [(3, 3)],
        "img2": [(0, 0), (7, 7)],
        "img3": [(4, 6), (2, 5), (6, 1)],
        "img4": [(5, 5)],
    }
    manifest = build_dataset(tmp_path, cells_per_image)
    out = tmp_path / "dets.jsonl"
    written = export_detections(ExportJob(str(demo_model), str(manifest), str(out)))
    assert written == sum(len(v) for v in cells_per_image.values())

    proc = run_toolkit(
        "evaluate", "--manifest", manifest, "--detections", out,
        "--protocol", "ttna", "--format", "json",
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["images_evaluated"] == 5
    assert report["map"] == 100.0
    assert report["precision"] == 100.0
    assert report["recall"] == 100.0
    print("ACCEPTANCE bridge-five-image-roundtrip: PASS")


def test_hflip_export_inverse_maps_consistently(tmp_path, demo_model):
    # mirror-symmetric image: cells (1,3) and (6,3) reflect onto each other
    manifest = build_dataset(tmp_path, {"sym": [(1, 3), (6, 3)]})
    out = tmp_path / "dets.jsonl"
    export_detections(
        ExportJob(str(demo_model), str(manifest), str(out), views=("identity", "hflip"))
    )
    records = [json.loads(line) for line in out.read_text().splitlines()]
    identity = sorted(r["bbox"] for r in records if "view_id" not in r)
    flipped = [r["bbox"] for r in records if r.get("view_id") == "hflip"]
    assert len(identity) == 2 and len(flipped) == 2

    # inverse of the hflip view transform: x' = W - x (corners swap)
    unmapped = sorted(
        [SIZE - b[2], b[1], SIZE - b[0], b[3]] for b in flipped
    )
    for got, want in zip(unmapped, identity):
        for g, w in zip(got, want):
            assert abs(g - w) <= 2.0
    print("ACCEPTANCE bridge-hflip-inverse-consistency: PASS")
