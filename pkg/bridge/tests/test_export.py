import json

import pytest

from conftest import SIZE, build_dataset
from detexport.cli import run_cli
from detexport.export import ExportError, ExportJob, export_detections


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


class TestExport:
    def test_empty_manifest_empty_file(self, tmp_path, demo_model, capsys):
        manifest = build_dataset(tmp_path, {})
        out = tmp_path / "dets.jsonl"
        code = run_cli(
            ["export", "--model", str(demo_model), "--manifest", str(manifest),
             "--out", str(out)]
        )
        assert code == 0
        assert out.read_text() == ""

    def test_detects_blobs_at_their_cells(self, tmp_path, demo_model):
        manifest = build_dataset(tmp_path, {"img0": [(2, 3)]})
        out = tmp_path / "dets.jsonl"
        job = ExportJob(str(demo_model), str(manifest), str(out))
        written = export_detections(job)
        assert written == 1
        [rec] = read_jsonl(out)
        assert rec["image_id"] == "img0"
        assert rec["class_id"] == 3
        assert 0.5 < rec["score"] < 1.0
        assert rec["bbox"] == [64.0, 96.0, 96.0, 128.0]
        assert "view_id" not in rec  # identity is the default

    def test_conf_floor_one_empty_file(self, tmp_path, demo_model):
        manifest = build_dataset(tmp_path, {"img0": [(2, 3)]})
        out = tmp_path / "dets.jsonl"
        job = ExportJob(str(demo_model), str(manifest), str(out), conf_floor=1.0)
        assert export_detections(job) == 0
        assert out.read_text() == ""

    def test_hflip_view_records_tagged(self, tmp_path, demo_model):
        manifest = build_dataset(tmp_path, {"img0": [(1, 1)]})
        out = tmp_path / "dets.jsonl"
        job = ExportJob(str(demo_model), str(manifest), str(out),
                        views=("identity", "hflip"))
        export_detections(job)
        records = read_jsonl(out)
        views = {r.get("view_id", "identity") for r in records}
        assert views == {"identity", "hflip"}
        flipped = next(r for r in records if r.get("view_id") == "hflip")
        # view-frame coordinates: cell 1 mirrors to cell 6 of 8
        assert flipped["bbox"] == [192.0, 32.0, 224.0, 64.0]

    def test_unreadable_checkpoint_names_path(self, tmp_path, capsys):
        manifest = build_dataset(tmp_path, {})
        bad = tmp_path / "nope.pt"
        code = run_cli(
            ["export", "--model", str(bad), "--manifest", str(manifest),
             "--out", str(tmp_path / "out.jsonl")]
        )
        assert code != 0
        assert "nope.pt" in capsys.readouterr().err

    def test_missing_image_names_path(self, tmp_path, demo_model):
        manifest = build_dataset(tmp_path, {"img0": [(2, 2)]})
        (tmp_path / "img0.png").unlink()
        job = ExportJob(str(demo_model), str(manifest), str(tmp_path / "o.jsonl"))
        with pytest.raises(ExportError, match="img0.png"):
            export_detections(job)

    def test_unsupported_view_rejected(self, tmp_path, demo_model):
        with pytest.raises(ValueError, match="rot90"):
            ExportJob(str(demo_model), "m.json", "o.jsonl", views=("identity", "rot90"))

    def test_demo_model_cli(self, tmp_path, capsys):
        out = tmp_path / "demo.pt"
        assert run_cli(["demo-model", "--out", str(out)]) == 0
        assert out.exists()
