"""Scoring against three-class ground truth.

Ground-truth masks use 255=skin, 0=non-skin, 128=undecided; undecided
pixels are excluded from every count. Metrics with an empty denominator
are reported as None ("n/a"), never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prefilter import WindowGrid

GT_VALUES = frozenset((0, 128, 255))


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    undecided_excluded: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn,
            self.fn + other.fn,
            self.undecided_excluded + other.undecided_excluded)


@dataclass
class Metrics:
    precision: float | None
    recall: float | None
    f_score: float | None
    elimination_rate: float | None = None


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Pixel confusion counts; pred is a 0/255 mask, gt a three-class mask."""
    if pred.shape != gt.shape:
        raise ValueError("prediction / ground truth dimension mismatch")
    bad = set(np.unique(gt)) - GT_VALUES
    if bad:
        raise ValueError(f"invalid ground-truth values {sorted(bad)}")
    decided = gt != 128
    p = pred != 0
    g = gt == 255
    return ConfusionCounts(
        tp=int((p & g & decided).sum()),
        fp=int((p & ~g & decided).sum()),
        tn=int((~p & ~g & decided).sum()),
        fn=int((~p & g & decided).sum()),
        undecided_excluded=int((~decided).sum()),
    )


def prf(c: ConfusionCounts) -> Metrics:
    """Precision / recall / F-score, with undefined metrics left as None."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    f_score = None
    if precision is not None and recall is not None and precision + recall > 0:
        f_score = 2 * precision * recall / (precision + recall)
    return Metrics(precision, recall, f_score)


def elimination_rate(g: WindowGrid) -> float:
    """Fraction of tiles that survived the pre-filter as candidates."""
    total = g.rows * g.cols
    if total <= 0:
        raise ValueError("empty window grid")
    return float(g.candidate.sum()) / total


def window_tp_rate(g: WindowGrid, gt: np.ndarray) -> float | None:
    """Fraction of GT-skin tiles (>= 1 skin pixel) that are candidates.

    Returns None when the ground truth contains no skin tile.
    """
    if gt.shape != (g.height, g.width):
        raise ValueError("ground truth dimension mismatch")
    skin_tiles = 0
    hit = 0
    for row in range(g.rows):
        for col in range(g.cols):
            x0, y0, x1, y1 = g.tile_rect(row, col)
            if (gt[y0:y1, x0:x1] == 255).any():
                skin_tiles += 1
                if g.candidate[row, col]:
                    hit += 1
    if skin_tiles == 0:
        return None
    return hit / skin_tiles
