"""Pure-numpy implementations of the box kernels.

Arithmetic here mirrors the compiled extension expression-for-expression so
both backends produce bit-identical results; keep the two in sync.
"""

from __future__ import annotations

import numpy as np


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (N,4) x (M,4) corner boxes; zero-union pairs give 0."""
    ix0 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy0 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix1 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy1 = np.minimum(a[:, None, 3], b[None, :, 3])
    iw = np.maximum(ix1 - ix0, 0.0)
    ih = np.maximum(iy1 - iy0, 0.0)
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros(union.shape, dtype=np.float64)
    mask = union > 0.0
    out[mask] = inter[mask] / union[mask]
    return out


def _iou_row(box: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    ix0 = np.maximum(box[0], boxes[:, 0])
    iy0 = np.maximum(box[1], boxes[:, 1])
    ix1 = np.minimum(box[2], boxes[:, 2])
    iy1 = np.minimum(box[3], boxes[:, 3])
    iw = np.maximum(ix1 - ix0, 0.0)
    ih = np.maximum(iy1 - iy0, 0.0)
    inter = iw * ih
    area = (box[2] - box[0]) * (box[3] - box[1])
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    union = area + areas - inter
    out = np.zeros(union.shape, dtype=np.float64)
    mask = union > 0.0
    out[mask] = inter[mask] / union[mask]
    return out


def suppress_sorted(
    boxes: np.ndarray,
    classes: np.ndarray,
    iou_thresh: float,
    class_aware: bool,
) -> np.ndarray:
    """Greedy NMS keep mask over score-descending pre-sorted boxes."""
    n = boxes.shape[0]
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        if not alive[i]:
            continue
        if i + 1 == n:
            break
        row = _iou_row(boxes[i], boxes[i + 1 :])
        hit = row >= iou_thresh
        if class_aware:
            hit &= classes[i + 1 :] == classes[i]
        alive[i + 1 :] &= ~hit
    return alive


def match_sorted(
    det_boxes: np.ndarray,
    det_classes: np.ndarray,
    gt_boxes: np.ndarray,
    gt_classes: np.ndarray,
    iou_threshold: float,
) -> np.ndarray:
    """Greedy matching over score-descending pre-sorted detections.

    Returns the matched ground-truth index per detection, -1 for false
    positives. Best-IoU ties go to the lowest ground-truth index; candidates
    with IoU 0 never match.
    """
    n = det_boxes.shape[0]
    m = gt_boxes.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    if m == 0:
        return out
    taken = np.zeros(m, dtype=bool)
    for i in range(n):
        row = _iou_row(det_boxes[i], gt_boxes)
        eligible = ~taken & (gt_classes == det_classes[i])
        cand = np.where(eligible, row, -1.0)
        j = int(np.argmax(cand))
        best = cand[j]
        if best > 0.0 and best >= iou_threshold:
            out[i] = j
            taken[j] = True
    return out
