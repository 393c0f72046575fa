"""Frame differencing and its fusion with the ternary image.

An "ambulant" pixel moved between consecutive frames and is not labeled
Black; motion evidence from non-skin-colored regions is discarded.
"""

from __future__ import annotations

import numpy as np

from .imgio import BLACK, Raster


def frame_diff(prev: Raster, cur: Raster, tau: int) -> np.ndarray:
    """Per-channel max-abs difference thresholded at tau (inclusive)."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if prev.space != cur.space or prev.data.shape != cur.data.shape:
        raise ValueError("frame dimensions / color space mismatch")
    diff = np.abs(cur.data.astype(np.int16) - prev.data.astype(np.int16))
    if diff.ndim == 3:
        diff = diff.max(axis=2)
    return diff >= tau


def ambulant_fuse(raw: np.ndarray, ternary: np.ndarray) -> np.ndarray:
    """Keep only moving pixels whose ternary label is White or Gray."""
    if raw.shape != ternary.shape:
        raise ValueError("mask dimensions mismatch")
    return raw & (ternary != BLACK)


def empty_motion_mask(height: int, width: int) -> np.ndarray:
    """All-false mask for the first frame of a stream / still images."""
    return np.zeros((height, width), dtype=bool)
