"""JSON config document: manifests, detector specs, protocols, thresholds.

Schema documented in docs/FORMATS.md. The CLI accepts the same settings as
flags; flags win over the config file.
"""

from __future__ import annotations

import importlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .detector import FileDetector, MockDetector, MockNoise, StubDetector
from .formats import DatasetManifest, read_detections
from .metrics import EvalConfig
from .tta import (
    CentralCrop,
    Crop,
    HFlip,
    Identity,
    MergeStrategy,
    NmsMerge,
    RelativeShift,
    Scale,
    Shift,
    TtaConfig,
    VFlip,
    ViewSpec,
    WeightedMerge,
)


class ConfigError(ValueError):
    pass


def view_spec_from_dict(obj: Mapping) -> ViewSpec:
    kind = obj.get("kind")
    try:
        if kind == "identity":
            return Identity()
        if kind == "hflip":
            return HFlip()
        if kind == "vflip":
            return VFlip()
        if kind == "shift":
            return Shift(float(obj["dx"]), float(obj["dy"]))
        if kind == "scale":
            return Scale(float(obj["sx"]), float(obj["sy"]))
        if kind == "crop":
            rect = obj["rect"]
            return Crop(tuple(float(v) for v in rect), bool(obj.get("rescale", True)))
        if kind == "relative_shift":
            return RelativeShift(float(obj["fx"]), float(obj["fy"]))
        if kind == "central_crop":
            return CentralCrop(float(obj["fraction"]), bool(obj.get("rescale", True)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad view spec {obj!r}: {exc}") from exc
    raise ConfigError(f"unknown view kind: {kind!r}")


def view_spec_to_dict(spec: ViewSpec) -> dict:
    if isinstance(spec, Identity):
        return {"kind": "identity"}
    if isinstance(spec, HFlip):
        return {"kind": "hflip"}
    if isinstance(spec, VFlip):
        return {"kind": "vflip"}
    if isinstance(spec, Shift):
        return {"kind": "shift", "dx": spec.dx, "dy": spec.dy}
    if isinstance(spec, Scale):
        return {"kind": "scale", "sx": spec.sx, "sy": spec.sy}
    if isinstance(spec, Crop):
        return {"kind": "crop", "rect": list(spec.rect), "rescale": spec.rescale}
    if isinstance(spec, RelativeShift):
        return {"kind": "relative_shift", "fx": spec.fx, "fy": spec.fy}
    if isinstance(spec, CentralCrop):
        return {"kind": "central_crop", "fraction": spec.fraction, "rescale": spec.rescale}
    raise ConfigError(f"unserializable view spec: {spec!r}")


def merge_from_dict(obj: Mapping) -> MergeStrategy:
    kind = obj.get("kind", "nms")
    iou = float(obj.get("iou", 0.5))
    if kind == "nms":
        return NmsMerge(iou)
    if kind == "weighted":
        return WeightedMerge(iou)
    raise ConfigError(f"unknown merge kind: {kind!r}")


def tta_config_from_dict(obj: Mapping) -> TtaConfig:
    kwargs = {}
    if "views" in obj:
        kwargs["views"] = tuple(view_spec_from_dict(v) for v in obj["views"])
    if "merge" in obj:
        kwargs["merge"] = merge_from_dict(obj["merge"])
    if "min_visible_fraction" in obj:
        kwargs["min_visible_fraction"] = float(obj["min_visible_fraction"])
    return TtaConfig(**kwargs)


def eval_config_from_dict(obj: Mapping) -> EvalConfig:
    return EvalConfig(
        iou_threshold=float(obj.get("iou_threshold", 0.5)),
        confidence_threshold=float(obj.get("confidence_threshold", 0.5)),
        ap_mode=str(obj.get("ap_mode", "envelope")),
        report_percent=bool(obj.get("report_percent", True)),
    )


@dataclass(frozen=True)
class DetectorSpec:
    kind: str  # file | mock | stub | plugin
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "DetectorSpec":
        if "kind" not in obj:
            raise ConfigError(f"detector spec needs 'kind': {obj!r}")
        options = {k: v for k, v in obj.items() if k != "kind"}
        return cls(kind=str(obj["kind"]), options=options)


@dataclass(frozen=True)
class RunConfig:
    manifest_path: Optional[str] = None
    detectors: tuple[DetectorSpec, ...] = ()
    protocol: str = "ttna"
    eval_cfg: EvalConfig = EvalConfig()
    tta: TtaConfig = TtaConfig()
    merge: MergeStrategy = NmsMerge(0.5)
    warmup: int = 10
    iters: int = 50
    seed: int = 0
    out_path: Optional[str] = None

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls(
            manifest_path=doc.get("manifest"),
            detectors=tuple(DetectorSpec.from_dict(d) for d in doc.get("detectors", ())),
            protocol=str(doc.get("protocol", "ttna")),
            eval_cfg=eval_config_from_dict(doc.get("eval", {})),
            tta=tta_config_from_dict(doc.get("tta", {})),
            merge=merge_from_dict(doc.get("merge", {"kind": "nms"})),
            warmup=int(doc.get("warmup", 10)),
            iters=int(doc.get("iters", 50)),
            seed=int(doc.get("seed", 0)),
            out_path=doc.get("out"),
        )


def build_detector(
    spec: DetectorSpec,
    manifest: Optional[DatasetManifest],
    ground_truth: Optional[Mapping] = None,
    seed: int = 0,
    default_name: str = "",
):
    """Instantiate a detector handle from its config spec."""
    opts = dict(spec.options)
    opts.pop("weight", None)  # ensemble-level setting, consumed by the caller
    name = opts.pop("name", default_name or spec.kind)
    if spec.kind == "file":
        if manifest is None:
            raise ConfigError("file detector requires a manifest")
        path = opts.pop("path")
        records = read_detections(path, manifest)
        extra_views = tuple(opts.pop("views", ()))
        return FileDetector(records, manifest.image_ids(), name=name, extra_views=extra_views)
    if spec.kind == "mock":
        if ground_truth is None:
            raise ConfigError("mock detector requires ground truth (manifest labels)")
        sleep_ms = float(opts.pop("sleep_ms", 0.0))
        noise = MockNoise(
            p_miss=float(opts.pop("p_miss", 0.0)),
            jitter_sigma=float(opts.pop("jitter_sigma", 0.0)),
            fp_rate=float(opts.pop("fp_rate", 0.0)),
            score_lo=float(opts.pop("score_lo", 1.0)),
            score_hi=float(opts.pop("score_hi", 1.0)),
            fp_lo=float(opts.pop("fp_lo", 0.5)),
            fp_hi=float(opts.pop("fp_hi", 1.0)),
            global_seed=int(opts.pop("seed", seed)),
        )
        if opts:
            raise ConfigError(f"unknown mock options: {sorted(opts)}")
        return MockDetector(ground_truth, noise, name=name, sleep_ms=sleep_ms)
    if spec.kind == "stub":
        return StubDetector(float(opts.pop("sleep_ms", 0.0)), name=name)
    if spec.kind == "plugin":
        target = opts.pop("target")
        module_name, _, attr = target.partition(":")
        if not attr:
            raise ConfigError(f"plugin target must be 'module:factory', got {target!r}")
        factory = getattr(importlib.import_module(module_name), attr)
        return factory(**opts.pop("args", {}))
    raise ConfigError(f"unknown detector kind: {spec.kind!r}")
