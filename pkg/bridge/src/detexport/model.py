"""TorchScript checkpoint loading and the bundled demo detector.

Checkpoint contract: a TorchScript module taking a (1, 1, H, W) float tensor
with values in [0, 1] and returning a tuple of

    boxes  : (N, 4) float tensor, pixel corners x_min, y_min, x_max, y_max
    scores : (N,) float tensor in [0, 1]
    labels : (N,) integer tensor of class ids

in the coordinate frame of the input image. Any detector exported to
TorchScript with this head qualifies.
"""

from __future__ import annotations

from pathlib import Path

import torch
import torch.nn.functional as F


def load_model(path: str | Path) -> torch.jit.ScriptModule:
    model = torch.jit.load(str(path), map_location="cpu")
    model.eval()
    return model


class GridBlobDetector(torch.nn.Module):
    """Deterministic demo detector: one box per bright cell of a GxG grid.

    Pools the image onto a coarse grid and emits the cell rectangle wherever
    the pooled intensity clears the threshold, scored by that intensity. Small
    and fully scriptable; used for smoke tests and the demo pipeline.
    """

    def __init__(self, grid: int = 8, threshold: float = 0.2, class_id: int = 3):
        super().__init__()
        self.grid = grid
        self.threshold = threshold
        self.class_id = class_id

    def forward(self, image: torch.Tensor):
        pooled = F.adaptive_avg_pool2d(image, (self.grid, self.grid))[0, 0]
        height = image.shape[2]
        width = image.shape[3]
        cell_h = float(height) / self.grid
        cell_w = float(width) / self.grid
        idx = (pooled > self.threshold).nonzero()
        ys = idx[:, 0].to(torch.float32)
        xs = idx[:, 1].to(torch.float32)
        boxes = torch.stack(
            [xs * cell_w, ys * cell_h, (xs + 1.0) * cell_w, (ys + 1.0) * cell_h], dim=1
        )
        scores = pooled[idx[:, 0], idx[:, 1]].clamp(0.0, 1.0)
        labels = torch.full((idx.shape[0],), self.class_id, dtype=torch.int64)
        return boxes, scores, labels


def save_demo_model(
    path: str | Path, grid: int = 8, threshold: float = 0.2, class_id: int = 3
) -> None:
    module = torch.jit.script(GridBlobDetector(grid, threshold, class_id))
    module.save(str(path))
