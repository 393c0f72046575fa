"""Multilevel Otsu homogeneity labeling and the two-level edge maps.

The segmentation core treats pixels falling in the same Otsu class across
several color channels as belonging to the same homogeneous region; the
thresholded Sobel maps act as diffusion barriers.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import cv2
import numpy as np

from . import imgio
from .imgio import Raster

DEFAULT_CHANNELS = ("Cb", "Cr", "I", "Y")


class DegenerateHistogramError(ValueError):
    """Histogram has fewer occupied bins than requested classes."""


def otsu_multilevel(counts: np.ndarray, k: int) -> tuple[int, ...]:
    """Optimal k-class thresholds maximizing between-class variance.

    Returns the strictly increasing (k-1)-tuple; ties are broken by the
    lexicographically smallest tuple. For k <= 3 the search is carried out
    in exact integer arithmetic over the pruned occupied-bin lattice, which
    reproduces a full brute-force scan including its tie-break. Larger k
    uses a float dynamic program over prefix moments.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (256,) or (counts < 0).any():
        raise ValueError("need a 256-bin non-negative histogram")
    total = int(counts.sum())
    if total <= 0:
        raise ValueError("empty histogram")
    if not 2 <= k <= 5:
        raise ValueError("class count must be in [2, 5]")
    occupied = np.flatnonzero(counts)
    if len(occupied) < k:
        raise DegenerateHistogramError(
            f"{len(occupied)} occupied bins cannot form {k} classes")
    cum = np.zeros(257, dtype=np.int64)
    cum[1:] = np.cumsum(counts)
    mom = np.zeros(257, dtype=np.int64)
    mom[1:] = np.cumsum(counts * np.arange(256, dtype=np.int64))
    if k <= 3:
        return _otsu_exact(cum, mom, occupied, k)
    return _otsu_dp(cum, mom, k)


def _score_exact(cum, mom, ts) -> tuple[int, int]:
    """Sum of s_c^2 / w_c over classes, as an exact (num, den) fraction."""
    num, den = 0, 1
    lo = 0
    for hi in (*ts, 255):
        w = int(cum[hi + 1] - cum[lo])
        if w > 0:
            s = int(mom[hi + 1] - mom[lo])
            num = num * w + s * s * den
            den = den * w
        lo = hi + 1
    return num, den


def _otsu_exact(cum, mom, occupied, k) -> tuple[int, ...]:
    # Only the left endpoints of partition-constant threshold intervals can
    # be the lexicographically smallest maximizer: 0 plus the occupied bins.
    cands = sorted({0, *(int(b) for b in occupied if b <= 254)})
    best = None
    best_num, best_den = -1, 1
    for ts in combinations(cands, k - 1):
        num, den = _score_exact(cum, mom, ts)
        if num * best_den > best_num * den:
            best, best_num, best_den = ts, num, den
    return best


def _otsu_dp(cum, mom, k) -> tuple[int, ...]:
    idx = np.arange(256)
    w = cum[None, idx + 1] - cum[idx, None]        # class [i..j]
    s = (mom[None, idx + 1] - mom[idx, None]).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(w > 0, s * s / np.maximum(w, 1), 0.0)
    term[np.tril_indices(256, -1)] = -np.inf       # i > j is invalid
    d = term[0].copy()                             # one class covering [0..j]
    args = np.zeros((k + 1, 256), dtype=np.int64)
    for c in range(2, k + 1):
        a = np.full(256, -np.inf)
        a[1:] = d[:-1]                             # previous classes end at i-1
        x = a[:, None] + term
        d = x.max(axis=0)
        args[c] = x.argmax(axis=0)
    ts = []
    j = 255
    for c in range(k, 1, -1):
        i = int(args[c, j])
        ts.append(i - 1)
        j = i - 1
    return tuple(reversed(ts))


def assign_classes(plane: np.ndarray, thresholds) -> np.ndarray:
    """Class index per pixel: value <= t_1 is class 0, then (t_c, t_{c+1}]."""
    th = np.asarray(thresholds)
    lut = np.searchsorted(th, np.arange(256), side="left").astype(np.uint8)
    return lut[plane]


@dataclass
class HomogeneityLabels:
    channels: tuple[str, ...]
    labels: np.ndarray                     # (H, W, C) uint8 class indices
    thresholds: dict[str, tuple[int, ...]]
    degenerate: tuple[str, ...]            # channels that fell back to class 0
    classes: int


def channel_plane(rgb: Raster, name: str, ycbcr: Raster | None = None,
                  iq: np.ndarray | None = None) -> np.ndarray:
    """One byte-valued analysis plane of an RGB frame.

    Precomputed ``ycbcr`` / quantized-I planes are reused when given.
    """
    if name in ("Y", "Cb", "Cr"):
        if ycbcr is None:
            ycbcr = imgio.rgb_to_ycbcr_image(rgb)
        return ycbcr.data[..., ("Y", "Cb", "Cr").index(name)]
    if name == "I":
        if iq is not None:
            return iq
        return imgio.quantize_i_channel(imgio.i_channel_image(rgb))
    raise ValueError(f"unknown channel {name!r}")


def label_homogeneous(rgb: Raster, channels=DEFAULT_CHANNELS, k: int = 4,
                      ycbcr: Raster | None = None,
                      iq: np.ndarray | None = None) -> HomogeneityLabels:
    """Otsu-segment each channel into k classes and stack the label planes.

    A channel whose histogram cannot support k classes degrades to all
    class 0 and is flagged rather than aborting the frame.
    """
    if not channels:
        raise ValueError("need at least one channel")
    planes = [channel_plane(rgb, name, ycbcr, iq) for name in channels]
    labels = np.zeros((*planes[0].shape, len(channels)), dtype=np.uint8)
    thresholds: dict[str, tuple[int, ...]] = {}
    degenerate = []
    for i, (name, plane) in enumerate(zip(channels, planes)):
        hist = np.bincount(plane.ravel(), minlength=256).astype(np.int64)
        try:
            th = otsu_multilevel(hist, k)
        except DegenerateHistogramError:
            degenerate.append(name)
            thresholds[name] = ()
            continue
        thresholds[name] = th
        labels[..., i] = assign_classes(plane, th)
    return HomogeneityLabels(tuple(channels), labels, thresholds,
                             tuple(degenerate), k)


@dataclass
class EdgeMaps:
    strong: np.ndarray  # (H, W) bool
    weak: np.ndarray    # (H, W) bool, superset of strong


def edge_maps(y_plane: np.ndarray, tau_strong: int, tau_weak: int) -> EdgeMaps:
    """|Gx| + |Gy| of the 3x3 Sobel on the Y channel, double-thresholded.

    The 1-pixel image border is always edge-free.
    """
    if tau_weak > tau_strong:
        raise ValueError("need tau_weak <= tau_strong")
    gx = cv2.Sobel(y_plane, cv2.CV_16S, 1, 0, ksize=3)
    gy = cv2.Sobel(y_plane, cv2.CV_16S, 0, 1, ksize=3)
    mag = np.abs(gx.astype(np.int32)) + np.abs(gy.astype(np.int32))
    mag[0, :] = mag[-1, :] = 0
    mag[:, 0] = mag[:, -1] = 0
    return EdgeMaps(mag >= tau_strong, mag >= tau_weak)
