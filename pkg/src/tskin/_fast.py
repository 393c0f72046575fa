"""Fused per-pixel frame kernel used by the pipeline hot path.

One jitted pass computes the YCbCr conversion, quantized I channel,
ternary polygon classification, Bayes ratio / posterior maps and the raw
motion mask together, touching each pixel once. Every formula mirrors the
reference implementations in :mod:`imgio`, :mod:`prefilter`,
:mod:`diffusion` and :mod:`motion` operation-for-operation so the outputs
are bit-identical; the equivalence is pinned by tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .imgio import BLACK, GRAY, I_MAX, I_MIN, RGB8, WHITE, YCBCR8, Raster
from .model import SkinColorModel
from .prefilter import plane_masks


@njit(cache=True, nogil=True)
def _frame_kernel(rgb, prev, has_prev, tau,
                  ycb_in, ycr_in, cbcr_in, ycb_out, ycr_out, cbcr_out,
                  skin, nonskin, bins, s_tot, n_tot, prior_s, prior_n,
                  i_min, i_range,
                  ycbcr, iq, ternary, ratio, post, moving):
    h, w = rgb.shape[0], rgb.shape[1]
    for py in range(h):
        for px in range(w):
            r = float(rgb[py, px, 0])
            g = float(rgb[py, px, 1])
            b = float(rgb[py, px, 2])
            yf = 0.299 * r + 0.587 * g + 0.114 * b
            cbf = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
            crf = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
            y = int(min(255.0, max(0.0, np.floor(yf + 0.5))))
            cb = int(min(255.0, max(0.0, np.floor(cbf + 0.5))))
            cr = int(min(255.0, max(0.0, np.floor(crf + 0.5))))
            ycbcr[py, px, 0] = y
            ycbcr[py, px, 1] = cb
            ycbcr[py, px, 2] = cr

            iv = 0.595716 * r - 0.274453 * g - 0.321263 * b
            q = (iv - i_min) / i_range * 255.0
            iq[py, px] = int(min(255.0, max(0.0, np.floor(q + 0.5))))

            if ycb_in[y, cb] and ycr_in[y, cr] and cbcr_in[cb, cr]:
                ternary[py, px] = WHITE
            elif ycb_out[y, cb] and ycr_out[y, cr] and cbcr_out[cb, cr]:
                ternary[py, px] = GRAY
            else:
                ternary[py, px] = BLACK

            qy = y * bins // 256
            qcb = cb * bins // 256
            qcr = cr * bins // 256
            ls = (float(skin[qy, qcb, qcr]) + 1.0) / (s_tot + 1.0)
            ln = (float(nonskin[qy, qcb, qcr]) + 1.0) / (n_tot + 1.0)
            ratio[py, px] = np.float32(ls / ln)
            post[py, px] = np.float32(ls * prior_s / (ls * prior_s + ln * prior_n))

            if has_prev:
                d = abs(y - int(prev[py, px, 0]))
                d2 = abs(cb - int(prev[py, px, 1]))
                if d2 > d:
                    d = d2
                d2 = abs(cr - int(prev[py, px, 2]))
                if d2 > d:
                    d = d2
                moving[py, px] = d >= tau


@dataclass
class FrameFeatures:
    ycbcr: Raster               # YCbCr8 (H, W, 3)
    iq: np.ndarray              # quantized I channel, (H, W) uint8
    ternary: np.ndarray         # pixel-stage labels, (H, W) uint8
    ratio: np.ndarray           # likelihood ratio, (H, W) float32
    p_skin: np.ndarray          # posterior, (H, W) float32
    moving: np.ndarray          # raw (unfused) motion, (H, W) bool


def frame_features(rgb: Raster, m: SkinColorModel,
                   prev_ycbcr: Raster | None, tau: int) -> FrameFeatures:
    """All per-pixel layers of one frame in a single fused pass."""
    if rgb.space != RGB8:
        raise ValueError("expected an RGB8 raster")
    h, w = rgb.height, rgb.width
    masks = plane_masks(m)
    b = m.bayes
    s_tot, n_tot = float(b.total_skin), float(b.total_nonskin)
    ycbcr = np.empty((h, w, 3), dtype=np.uint8)
    iq = np.empty((h, w), dtype=np.uint8)
    ternary = np.empty((h, w), dtype=np.uint8)
    ratio = np.empty((h, w), dtype=np.float32)
    post = np.empty((h, w), dtype=np.float32)
    moving = np.zeros((h, w), dtype=bool)
    has_prev = prev_ycbcr is not None
    prev = prev_ycbcr.data if has_prev else ycbcr
    _frame_kernel(rgb.data, prev, has_prev, tau,
                  masks["YCb"][0], masks["YCr"][0], masks["CbCr"][0],
                  masks["YCb"][1], masks["YCr"][1], masks["CbCr"][1],
                  b.skin, b.nonskin, b.bins, s_tot, n_tot,
                  s_tot / (s_tot + n_tot), n_tot / (s_tot + n_tot),
                  I_MIN, I_MAX - I_MIN,
                  ycbcr, iq, ternary, ratio, post, moving)
    return FrameFeatures(Raster(YCBCR8, ycbcr), iq, ternary, ratio, post, moving)
