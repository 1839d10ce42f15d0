"""Thermal-ADAS object detection evaluation toolkit."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .geometry import AffineTransform, BBox, Detection, GroundTruthBox, clip_box, iou, nms, transform_box
from .formats import ClassMap, DatasetManifest, DetectionRecord, load_manifest, parse_label_file
from .detector import FileDetector, MockDetector, MockNoise, StubDetector, ViewKey, mock_detect
from .metrics import (
    ConfusionCounts,
    EvalConfig,
    MetricsReport,
    PRPoint,
    average_precision,
    evaluate,
    match_detections,
    mean_average_precision,
    pr_curve,
    precision_recall,
)
from .tta import TtaConfig, inverse_map, tta_detect, view_transform
from .ensemble import EnsembleConfig, ensemble_detect, select_best_subset
from .augment import LabeledSample, MosaicParams, apply_labeled, mosaic
from .bench import LatencyStats, bench_detector, compare_modes
from .protocols import TTA, TTME, TTNA

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "BBox",
    "ClassMap",
    "ConfusionCounts",
    "DatasetManifest",
    "Detection",
    "DetectionRecord",
    "EnsembleConfig",
    "EvalConfig",
    "FileDetector",
    "GroundTruthBox",
    "KERNEL_BACKEND",
    "LabeledSample",
    "LatencyStats",
    "MetricsReport",
    "MockDetector",
    "MockNoise",
    "MosaicParams",
    "PRPoint",
    "StubDetector",
    "TTA",
    "TTME",
    "TTNA",
    "TtaConfig",
    "ViewKey",
    "apply_labeled",
    "average_precision",
    "bench_detector",
    "clip_box",
    "compare_modes",
    "ensemble_detect",
    "evaluate",
    "inverse_map",
    "iou",
    "load_manifest",
    "match_detections",
    "mean_average_precision",
    "mock_detect",
    "mosaic",
    "nms",
    "parse_label_file",
    "pr_curve",
    "precision_recall",
    "select_best_subset",
    "transform_box",
    "tta_detect",
    "view_transform",
]
