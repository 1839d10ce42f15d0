"""The three test protocols: plain inference, TTA, and model ensembling.

Each protocol knows how to produce original-frame detections for one image;
metrics.evaluate stays agnostic of which one is running.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .detector import DetectorHandle, ViewKey
from .ensemble import EnsembleConfig, ensemble_detect
from .geometry import AffineTransform, Detection
from .tta import TtaConfig, tta_detect


@dataclass(frozen=True)
class TTNA:
    """Single identity-view inference, no augmentation."""

    name: str = field(default="ttna", init=False)

    def detections_for(
        self, detector: DetectorHandle, image_id: str, canvas: tuple[float, float]
    ) -> list[Detection]:
        return detector.detect(ViewKey(image_id), AffineTransform.identity(), canvas)


@dataclass(frozen=True)
class TTA:
    """Multi-view inference with inverse mapping and fusion."""

    config: TtaConfig = TtaConfig()
    name: str = field(default="tta", init=False)

    def detections_for(
        self, detector: DetectorHandle, image_id: str, canvas: tuple[float, float]
    ) -> list[Detection]:
        return tta_detect(detector, image_id, canvas, self.config)


@dataclass(frozen=True)
class TTME:
    """Fused inference over several detectors; ignores the detector argument."""

    config: EnsembleConfig
    name: str = field(default="ttme", init=False)

    def detections_for(
        self, detector: DetectorHandle, image_id: str, canvas: tuple[float, float]
    ) -> list[Detection]:
        return ensemble_detect(self.config, image_id, canvas)

    def detector_label(self) -> str:
        return "+".join(m.name for m in self.config.members)
