"""Three-step pre-filter: ternary classification, neighbor refinement, window scan.

The pixel stage projects each YCbCr pixel onto the three chroma planes and
tests it against the model's polygon pairs; the neighbor stage rescores
uncertain pixels from their 3x3 / 5x5 rings; the window stage keeps only
tiles that plausibly contain skin, then annexes surrounded holes.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .geometry import convex_mask_grid
from .imgio import BLACK, GRAY, WHITE, Raster
from .model import PLANES, SkinColorModel

# Neighbor-stage label weights: White=2, Gray=1, Black=0, so the total
# score is an integer in [0, 2*K*16 + 32].
_LABEL_WEIGHT = np.zeros(256, dtype=np.int32)
_LABEL_WEIGHT[WHITE] = 2
_LABEL_WEIGHT[GRAY] = 1


@dataclass
class WindowGrid:
    """Per-tile candidacy decision with white/gray counts."""

    tile_w: int
    tile_h: int
    stride_x: int
    stride_y: int
    width: int
    height: int
    candidate: np.ndarray  # (rows, cols) bool
    white: np.ndarray      # (rows, cols) int32
    gray: np.ndarray       # (rows, cols) int32
    annexed: np.ndarray    # (rows, cols) bool

    @property
    def rows(self) -> int:
        return self.candidate.shape[0]

    @property
    def cols(self) -> int:
        return self.candidate.shape[1]

    def tile_rect(self, row: int, col: int) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) of a tile, clipped to the image."""
        x0 = col * self.stride_x
        y0 = row * self.stride_y
        return x0, y0, min(x0 + self.tile_w, self.width), min(y0 + self.tile_h, self.height)

    def candidate_mask(self) -> np.ndarray:
        """(H, W) boolean union of all candidate tile rectangles."""
        mask = np.zeros((self.height, self.width), dtype=bool)
        for row, col in np.argwhere(self.candidate):
            x0, y0, x1, y1 = self.tile_rect(row, col)
            mask[y0:y1, x0:x1] = True
        return mask

    def to_table(self) -> str:
        """Debug text table: ``col row candidate white gray annexed``."""
        lines = ["col row candidate white gray annexed"]
        for row in range(self.rows):
            for col in range(self.cols):
                lines.append(
                    f"{col} {row} {int(self.candidate[row, col])} "
                    f"{self.white[row, col]} {self.gray[row, col]} "
                    f"{int(self.annexed[row, col])}"
                )
        return "\n".join(lines) + "\n"


def plane_masks(m: SkinColorModel):
    """Cached 256x256 inclusive membership grids for all six polygons."""
    masks = m._cache.get("plane_masks")
    if masks is None:
        masks = {
            plane: (
                convex_mask_grid(m.pairs[plane].inner),
                convex_mask_grid(m.pairs[plane].outer),
            )
            for plane in PLANES
        }
        m._cache["plane_masks"] = masks
    return masks


def classify_ternary(img: Raster, m: SkinColorModel) -> np.ndarray:
    """Label every pixel White / Gray / Black from the plane polygons.

    White: inside all three inner polygons. Black: outside any outer
    polygon. Gray: everything else. Returns a (H, W) uint8 image with the
    0/128/255 ternary encoding.
    """
    if img.space != "YCbCr8":
        raise ValueError("expected a YCbCr8 raster")
    y = img.data[..., 0].astype(np.intp)
    cb = img.data[..., 1].astype(np.intp)
    cr = img.data[..., 2].astype(np.intp)
    masks = plane_masks(m)
    in_inner = masks["YCb"][0][y, cb] & masks["YCr"][0][y, cr] & masks["CbCr"][0][cb, cr]
    in_outer = masks["YCb"][1][y, cb] & masks["YCr"][1][y, cr] & masks["CbCr"][1][cb, cr]
    out = np.full(y.shape, GRAY, dtype=np.uint8)
    out[~in_outer] = BLACK
    out[in_inner] = WHITE
    return out


def neighbor_scores(t: np.ndarray, k: float) -> np.ndarray:
    """Score xi = K*T + Phi for every pixel (rings around, center excluded)."""
    w = _LABEL_WEIGHT[t]
    s3 = cv2.boxFilter(w, -1, (3, 3), normalize=False, borderType=cv2.BORDER_CONSTANT)
    s5 = cv2.boxFilter(w, -1, (5, 5), normalize=False, borderType=cv2.BORDER_CONSTANT)
    ring3 = s3 - w
    ring5 = s5 - s3
    return k * ring3.astype(np.float64) + ring5


def neighbor_refine(t: np.ndarray, k: float, th1: float, th2: float) -> np.ndarray:
    """Relabel uncertain pixels from their neighborhood score.

    White input pixels and the 2-pixel border keep their pixel-stage label.
    """
    if not th1 < th2:
        raise ValueError("need th1 < th2")
    xi = neighbor_scores(t, k)
    out = t.copy()
    h, wd = t.shape
    if h <= 4 or wd <= 4:
        return out
    interior = np.zeros_like(t, dtype=bool)
    interior[2:-2, 2:-2] = True
    mutable = interior & (t != WHITE)
    out[mutable & (xi < th1)] = BLACK
    out[mutable & (xi > th2)] = WHITE
    return out


def window_scan(t: np.ndarray, w_min: int, g_min: int, tile: int = 16,
                stride: int | None = None) -> WindowGrid:
    """Mark tiles as candidates from their white/gray counts.

    A tile is a candidate iff white >= w_min, or white >= 1 and
    gray >= g_min; tiles without any white pixel are never candidates.
    Partial edge tiles are counted over their actual pixels.
    """
    if stride is None:
        stride = tile
    h, wd = t.shape
    cols = -(-wd // stride)
    rows = -(-h // stride)
    white_ii = _integral(t == WHITE)
    gray_ii = _integral(t == GRAY)
    y0 = np.arange(rows) * stride
    y1 = np.minimum(y0 + tile, h)
    x0 = np.arange(cols) * stride
    x1 = np.minimum(x0 + tile, wd)
    white = _box_sums(white_ii, x0, y0, x1, y1)
    gray = _box_sums(gray_ii, x0, y0, x1, y1)
    candidate = (white >= w_min) | ((white >= 1) & (gray >= g_min))
    return WindowGrid(tile, tile, stride, stride, wd, h, candidate, white, gray,
                      np.zeros((rows, cols), dtype=bool))


def _integral(mask: np.ndarray) -> np.ndarray:
    ii = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask, axis=0), axis=1, out=ii[1:, 1:])
    return ii


def _box_sum(ii: np.ndarray, x0, y0, x1, y1) -> int:
    return int(ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0])


def _box_sums(ii: np.ndarray, x0, y0, x1, y1) -> np.ndarray:
    """Box sums for the full (y, x) lattice of tile corners."""
    s = (ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)]
         - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)])
    return s.astype(np.int32)


def annex_surrounded(g: WindowGrid, min_neighbors: int = 6) -> WindowGrid:
    """One morphological pass: surrounded non-candidates become candidates.

    A non-candidate tile with at least ``min_neighbors`` candidate tiles
    among its 8 neighbors is annexed; decisions use the pre-pass state only.
    """
    cand = g.candidate.astype(np.int32)
    around = cv2.boxFilter(cand, -1, (3, 3), normalize=False,
                           borderType=cv2.BORDER_CONSTANT) - cand
    newly = (~g.candidate) & (around >= min_neighbors)
    return WindowGrid(g.tile_w, g.tile_h, g.stride_x, g.stride_y, g.width, g.height,
                      g.candidate | newly, g.white.copy(), g.gray.copy(),
                      g.annexed | newly)
