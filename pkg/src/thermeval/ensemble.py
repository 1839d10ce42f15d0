"""Model ensembling: fuse several detectors and pick the best subset.

ensemble_detect pools each member's identity-view detections (optionally
wrapping members in TTA), weights scores, and fuses with the shared merge
strategies. select_best_subset exhaustively evaluates every subset up to
max_size on a validation manifest - the candidate pool is small by contract,
so exactness is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Optional, Sequence

from .detector import DetectorHandle, ViewKey
from .geometry import AffineTransform, Detection, GroundTruthBox
from .tta import MergeStrategy, NmsMerge, TtaConfig, fuse_detections, tta_detect


class EnsembleMemberError(Exception):
    """A member detector failed; the message names it."""


@dataclass(frozen=True)
class EnsembleConfig:
    members: tuple[DetectorHandle, ...]
    merge: MergeStrategy = NmsMerge(0.5)
    weights: Optional[tuple[float, ...]] = None
    tta: Optional[TtaConfig] = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if self.weights is not None:
            if len(self.weights) != len(self.members):
                raise ValueError("one weight per member required")
            if any(w <= 0 for w in self.weights):
                raise ValueError("member weights must be positive")

    def member_weights(self) -> tuple[float, ...]:
        return self.weights if self.weights is not None else (1.0,) * len(self.members)


def ensemble_detect(
    cfg: EnsembleConfig, image_id: str, canvas: tuple[float, float]
) -> list[Detection]:
    """Pool every member's detections for one image and fuse them."""
    pooled: list[Detection] = []
    for member, weight in zip(cfg.members, cfg.member_weights()):
        try:
            if cfg.tta is not None:
                dets = tta_detect(member, image_id, canvas, cfg.tta)
            else:
                dets = member.detect(
                    ViewKey(image_id), AffineTransform.identity(), canvas
                )
        except Exception as exc:
            raise EnsembleMemberError(f"member {member.name!r}: {exc}") from exc
        if weight == 1.0:
            pooled.extend(dets)
        else:
            pooled.extend(
                Detection(d.bbox, d.class_id, min(d.score * weight, 1.0)) for d in dets
            )
    return fuse_detections(pooled, cfg.merge)


@dataclass(frozen=True)
class SubsetScore:
    indices: tuple[int, ...]
    members: tuple[DetectorHandle, ...]
    mean_ap: float


@dataclass(frozen=True)
class SelectionResult:
    best: SubsetScore
    ranking: tuple[SubsetScore, ...]  # every evaluated subset, best first


def select_best_subset(
    candidates: Sequence[DetectorHandle],
    val_manifest,
    eval_cfg=None,
    max_size: Optional[int] = None,
    *,
    merge: MergeStrategy = NmsMerge(0.5),
    ground_truth: Optional[Mapping[str, Sequence[GroundTruthBox]]] = None,
) -> SelectionResult:
    """Exhaustively evaluate every non-empty subset of size <= max_size.

    Returns the subset with maximal validation mAP; ties break toward the
    smaller subset, then the lexicographically first candidate-index tuple.
    """
    from .metrics import EvalConfig, evaluate
    from .protocols import TTME

    if not candidates:
        raise ValueError("candidate list must not be empty")
    if len(candidates) > 8:
        raise ValueError("exhaustive search is capped at 8 candidates")
    if max_size is None:
        max_size = len(candidates)
    if not 1 <= max_size <= len(candidates):
        raise ValueError("max_size must be in [1, len(candidates)]")
    if eval_cfg is None:
        eval_cfg = EvalConfig()

    scores: list[SubsetScore] = []
    for size in range(1, max_size + 1):
        for indices in combinations(range(len(candidates)), size):
            members = tuple(candidates[i] for i in indices)
            report = evaluate(
                val_manifest,
                None,
                TTME(EnsembleConfig(members=members, merge=merge)),
                eval_cfg,
                ground_truth=ground_truth,
            )
            scores.append(SubsetScore(indices, members, report.mean_ap))

    best = scores[0]
    for s in scores[1:]:
        if s.mean_ap > best.mean_ap:
            best = s
    # scores were generated size-ascending then lexicographic, so the first
    # maximal entry already satisfies the tie-break order
    ranking = tuple(
        sorted(scores, key=lambda s: (-s.mean_ap, len(s.indices), s.indices))
    )
    return SelectionResult(best=best, ranking=ranking)
