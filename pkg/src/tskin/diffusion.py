"""Per-window segmentation core: Bayesian seeding, two diffusions, final filter.

Seeds are chosen conservatively (high likelihood ratio, or a relaxed
threshold backed by motion / previous-frame evidence), the first diffusion
grows them along homogeneous regions up to strong edges, the second
diffusion scores nearby pixels with a weighted feature sum under
weak-edge line-of-sight control, and a low-threshold Bayesian filter
strips leaked pixels from the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .imgio import BLACK, Raster
from .model import SkinColorModel


@dataclass
class SeedParams:
    theta_high: float
    theta_low: float
    theta_fb: float
    p_min: float

    def __post_init__(self):
        if not self.theta_fb <= self.theta_low <= self.theta_high:
            raise ValueError("need theta_fb <= theta_low <= theta_high")

    @classmethod
    def from_model(cls, m: SkinColorModel) -> "SeedParams":
        p = m.params
        return cls(p["theta_high"], p["theta_low"], p["theta_fb"], p["p_min"])


@dataclass
class DiffusionParams:
    weights: tuple[float, float, float, float, float]
    alpha: float
    beta: float
    gamma: float
    theta_f: float
    theta_filter: float
    r2: int
    c_strong: int
    c_weak: int
    apron: int = 16

    def __post_init__(self):
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("weights must be >= 0 with positive sum")
        if not 1 <= self.c_weak <= self.c_strong:
            raise ValueError("need 1 <= c_weak <= c_strong")

    @classmethod
    def from_model(cls, m: SkinColorModel) -> "DiffusionParams":
        p = m.params
        return cls(
            weights=tuple(p[f"w{i}"] for i in range(1, 6)),
            alpha=p["alpha"], beta=p["beta"], gamma=p["gamma"],
            theta_f=p["theta_f"], theta_filter=p["theta_filter"],
            r2=int(p["r2"]), c_strong=int(p["c_strong"]),
            c_weak=int(p["c_weak"]), apron=int(p["apron"]),
        )


@dataclass
class WindowContext:
    """Read-only frame layers shared by every window worker."""

    ternary: np.ndarray            # (H, W) uint8 ternary encoding
    ambulant: np.ndarray           # (H, W) bool
    labels: np.ndarray             # (H, W, C) uint8 homogeneity classes
    strong: np.ndarray             # (H, W) bool
    weak: np.ndarray               # (H, W) bool
    ratio: np.ndarray              # (H, W) float32 likelihood ratio
    p_skin: np.ndarray             # (H, W) float32 posterior
    allowed: np.ndarray            # (H, W) bool, union of candidate tiles
    prev_diff1: np.ndarray | None = None  # (H, W) bool feedback
    prev_final: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self):
        return self.ternary.shape

    # Derived whole-frame layers, built once and shared by all windows.

    def _u8(self, name: str) -> np.ndarray:
        key = ("u8", name)
        arr = self._cache.get(key)
        if arr is None:
            src = getattr(self, name)
            if src is None:
                arr = np.zeros(self.shape, dtype=np.uint8)
            else:
                arr = src.view(np.uint8) if src.dtype == np.bool_ else src
            self._cache[key] = arr
        return arr

    def static_features(self, dp: "DiffusionParams") -> np.ndarray:
        """Master-independent share of the second-diffusion feature sum."""
        key = ("static", dp.weights[2], dp.weights[3], dp.weights[4])
        arr = self._cache.get(key)
        if arr is None:
            w = dp.weights
            arr = w[2] * self.p_skin.astype(np.float64)
            arr += w[3] * self.ambulant
            if self.prev_final is not None:
                arr += w[4] * self.prev_final
            self._cache[key] = arr
        return arr

    def filter_mask(self, theta_filter: float) -> np.ndarray:
        key = ("filter", theta_filter)
        arr = self._cache.get(key)
        if arr is None:
            arr = (self.ratio >= theta_filter).view(np.uint8)
            self._cache[key] = arr
        return arr


@dataclass
class DiffusionState:
    """Per-window working sets; the chain invariant is seed <= d1 <= d2 >= final."""

    seed: set = field(default_factory=set)
    diff1: set = field(default_factory=set)
    diff2: set = field(default_factory=set)
    final: set = field(default_factory=set)


def bayes_scores(triple, m: SkinColorModel) -> tuple[float, float]:
    """(likelihood ratio, posterior skin probability) of one color triple.

    Cell counts are Laplace-smoothed (+1) at lookup; priors come from the
    raw training totals.
    """
    b = m.bayes
    q = tuple(int(v) * b.bins // 256 for v in triple)
    s_tot, n_tot = b.total_skin, b.total_nonskin
    ls = (b.skin[q] + 1) / (s_tot + 1)
    ln = (b.nonskin[q] + 1) / (n_tot + 1)
    prior_s = s_tot / (s_tot + n_tot)
    prior_n = n_tot / (s_tot + n_tot)
    return float(ls / ln), float(ls * prior_s / (ls * prior_s + ln * prior_n))


def bayes_maps(ycbcr: Raster, m: SkinColorModel) -> tuple[np.ndarray, np.ndarray]:
    """Whole-frame ratio and posterior maps as float32."""
    b = m.bayes
    q = ycbcr.data.astype(np.int32) * b.bins // 256
    s = b.skin[q[..., 0], q[..., 1], q[..., 2]].astype(np.float64) + 1.0
    n = b.nonskin[q[..., 0], q[..., 1], q[..., 2]].astype(np.float64) + 1.0
    s_tot, n_tot = b.total_skin, b.total_nonskin
    ls = s / (s_tot + 1)
    ln = n / (n_tot + 1)
    prior_s = s_tot / (s_tot + n_tot)
    prior_n = n_tot / (s_tot + n_tot)
    ratio = (ls / ln).astype(np.float32)
    p = (ls * prior_s / (ls * prior_s + ln * prior_n)).astype(np.float32)
    return ratio, p


# ---------------------------------------------------------------------------
# jitted region kernels (nogil so the window pool scales across threads)

@njit(cache=True, nogil=True)
def _seed_kernel(ternary, ratio, p_skin, amb, prevd1,
                 wy0, wy1, wx0, wx1,
                 p_min, th_high, th_low, th_fb, out):
    found = False
    for y in range(wy0, wy1):
        for x in range(wx0, wx1):
            if ternary[y, x] == 0 or p_skin[y, x] < p_min:
                continue
            r = ratio[y, x]
            if r >= th_high or (amb[y, x] and r >= th_low) \
                    or (prevd1[y, x] and r >= th_fb):
                out[y, x] = 1
                found = True
    return found


@njit(cache=True, nogil=True)
def _diff1_kernel(seed, labels, strong, amb, allowed, c_strong, c_weak, out):
    h, w = seed.shape
    nchan = labels.shape[2]
    stack = np.empty((h * w, 2), dtype=np.int32)
    top = 0
    for y in range(h):
        for x in range(w):
            if seed[y, x]:
                out[y, x] = 1
                stack[top, 0] = y
                stack[top, 1] = x
                top += 1
    while top > 0:
        top -= 1
        vy = stack[top, 0]
        vx = stack[top, 1]
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dy == 0 and dx == 0:
                    continue
                uy = vy + dy
                ux = vx + dx
                if uy < 0 or uy >= h or ux < 0 or ux >= w:
                    continue
                if out[uy, ux] or not allowed[uy, ux] or strong[uy, ux]:
                    continue
                agree = 0
                for c in range(nchan):
                    if labels[uy, ux, c] == labels[vy, vx, c]:
                        agree += 1
                need = c_weak if amb[uy, ux] else c_strong
                if agree >= need:
                    out[uy, ux] = 1
                    stack[top, 0] = uy
                    stack[top, 1] = ux
                    top += 1


@njit(cache=True, nogil=True)
def _diff2_kernel(diff1, labels, weak, static_part, allowed,
                  off_dx, off_dy, f2_off, line_pts, line_len,
                  w1, w2, f1_lut, theta_f, out):
    # A pixel joins iff some first-diffusion master within the Chebyshev
    # radius accepts it; newly accepted pixels never become masters, so the
    # result is independent of iteration order. When the master set is
    # dense, scanning the (few) remaining target pixels is cheaper than
    # scanning the masters; both loops realize the same acceptance
    # predicate: score over threshold, then an unobstructed line of sight.
    h, w = diff1.shape
    nchan = labels.shape[2]
    n_off = off_dx.shape[0]
    n1 = 0
    for y in range(h):
        for x in range(w):
            n1 += diff1[y, x]
    if 2 * n1 < h * w:
        for y in range(h):
            for x in range(w):
                if not diff1[y, x]:
                    continue
                for o in range(n_off):
                    ty = y + off_dy[o]
                    tx = x + off_dx[o]
                    if ty < 0 or ty >= h or tx < 0 or tx >= w:
                        continue
                    if out[ty, tx] or not allowed[ty, tx]:
                        continue
                    d = 0
                    for c in range(nchan):
                        d += abs(np.int64(labels[ty, tx, c])
                                 - np.int64(labels[y, x, c]))
                    if w1 * f1_lut[d] + w2 * f2_off[o] \
                            + static_part[ty, tx] < theta_f:
                        continue
                    blocked = False
                    for i in range(line_len[o]):
                        if weak[y + line_pts[o, i, 1], x + line_pts[o, i, 0]]:
                            blocked = True
                            break
                    if not blocked:
                        out[ty, tx] = 1
    else:
        for ty in range(h):
            for tx in range(w):
                if out[ty, tx] or not allowed[ty, tx]:
                    continue
                for o in range(n_off):
                    my = ty - off_dy[o]
                    mx = tx - off_dx[o]
                    if my < 0 or my >= h or mx < 0 or mx >= w:
                        continue
                    if not diff1[my, mx]:
                        continue
                    d = 0
                    for c in range(nchan):
                        d += abs(np.int64(labels[ty, tx, c])
                                 - np.int64(labels[my, mx, c]))
                    if w1 * f1_lut[d] + w2 * f2_off[o] \
                            + static_part[ty, tx] < theta_f:
                        continue
                    blocked = False
                    for i in range(line_len[o]):
                        if weak[my + line_pts[o, i, 1], mx + line_pts[o, i, 0]]:
                            blocked = True
                            break
                    if not blocked:
                        out[ty, tx] = 1
                        break


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Discrete line from (x0, y0) to (x1, y1), endpoints included."""
    pts = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return pts


_OFFSET_CACHE: dict[tuple[int, float], tuple] = {}


def _offsets(r2: int, gamma: float):
    """Chebyshev-disc offsets, their distance scores and interior line points.

    The line-of-sight check covers the strictly interior Bresenham points:
    neither the master nor the under-test pixel blocks its own acceptance.
    """
    key = (r2, gamma)
    cached = _OFFSET_CACHE.get(key)
    if cached is not None:
        return cached
    offs = [(dx, dy) for dy in range(-r2, r2 + 1) for dx in range(-r2, r2 + 1)
            if (dx, dy) != (0, 0)]
    # nearest offsets first: f2 decreases along the scan, so a failing
    # score upper bound rules out every later offset of a target pixel
    offs.sort(key=lambda o: max(abs(o[0]), abs(o[1])))
    n = len(offs)
    max_len = max(1, r2 - 1)
    off_dx = np.array([o[0] for o in offs], dtype=np.int32)
    off_dy = np.array([o[1] for o in offs], dtype=np.int32)
    f2 = np.array([math.exp(-gamma * max(abs(dx), abs(dy))) for dx, dy in offs],
                  dtype=np.float64)
    line_pts = np.zeros((n, max_len, 2), dtype=np.int32)
    line_len = np.zeros(n, dtype=np.int32)
    for i, (dx, dy) in enumerate(offs):
        interior = bresenham(0, 0, dx, dy)[1:-1]
        line_len[i] = len(interior)
        for j, (px, py) in enumerate(interior):
            line_pts[i, j, 0] = px
            line_pts[i, j, 1] = py
    cached = (off_dx, off_dy, f2, line_pts, line_len)
    _OFFSET_CACHE[key] = cached
    return cached


_F1_CACHE: dict[tuple[float, float, int], np.ndarray] = {}


def _f1_table(alpha: float, beta: float, nchan: int) -> np.ndarray:
    """f1 tabulated over every possible integer label distance."""
    key = (alpha, beta, nchan)
    lut = _F1_CACHE.get(key)
    if lut is None:
        d = np.arange(255 * nchan + 1, dtype=np.float64)
        lut = np.array([math.exp(-alpha * v) + beta for v in d])
        _F1_CACHE[key] = lut
    return lut


# ---------------------------------------------------------------------------
# region helpers and the set-based operation API

def window_region(rect, shape, apron: int):
    """Clip the apron-expanded window rectangle to the frame."""
    x0, y0, x1, y1 = rect
    h, w = shape
    return (max(0, x0 - apron), max(0, y0 - apron),
            min(w, x1 + apron), min(h, y1 + apron))


def _region_slices(region):
    rx0, ry0, rx1, ry1 = region
    return slice(ry0, ry1), slice(rx0, rx1)


def _region_allowed(ctx: WindowContext, rect, region) -> np.ndarray:
    ys, xs = _region_slices(region)
    allowed = np.ascontiguousarray(ctx.allowed[ys, xs])
    x0, y0, x1, y1 = rect
    rx0, ry0 = region[0], region[1]
    allowed[y0 - ry0:y1 - ry0, x0 - rx0:x1 - rx0] = True
    return allowed


def _mask_to_set(mask: np.ndarray, region) -> set:
    rx0, ry0 = region[0], region[1]
    ys, xs = np.nonzero(mask)
    return {(int(x) + rx0, int(y) + ry0) for y, x in zip(ys, xs)}


def _set_to_mask(pixels, region) -> np.ndarray:
    rx0, ry0, rx1, ry1 = region
    mask = np.zeros((ry1 - ry0, rx1 - rx0), dtype=np.uint8)
    for x, y in pixels:
        if not (rx0 <= x < rx1 and ry0 <= y < ry1):
            raise ValueError(f"pixel {(x, y)} outside the window region")
        mask[y - ry0, x - rx0] = 1
    return mask


def generate_seed(rect, ctx: WindowContext, sp: SeedParams,
                  apron: int = 16) -> set:
    """Conservative seed pixels of one candidate window."""
    region = window_region(rect, ctx.shape, apron)
    ys, xs = _region_slices(region)
    rx0, ry0 = region[0], region[1]
    out = np.zeros((region[3] - ry0, region[2] - rx0), dtype=np.uint8)
    _seed_kernel(ctx.ternary[ys, xs], ctx.ratio[ys, xs], ctx.p_skin[ys, xs],
                 ctx._u8("ambulant")[ys, xs], ctx._u8("prev_diff1")[ys, xs],
                 rect[1] - ry0, rect[3] - ry0, rect[0] - rx0, rect[2] - rx0,
                 sp.p_min, sp.theta_high, sp.theta_low, sp.theta_fb, out)
    return _mask_to_set(out, region)


def diffuse_first(seed: set, rect, ctx: WindowContext,
                  dp: DiffusionParams) -> set:
    """Grow the seed along homogeneous 8-connected paths, stopped by strong edges."""
    region = window_region(rect, ctx.shape, dp.apron)
    ys, xs = _region_slices(region)
    seed_mask = _set_to_mask(seed, region)
    out = np.zeros_like(seed_mask)
    _diff1_kernel(seed_mask, ctx.labels[ys, xs],
                  ctx._u8("strong")[ys, xs], ctx._u8("ambulant")[ys, xs],
                  _region_allowed(ctx, rect, region).view(np.uint8),
                  dp.c_strong, dp.c_weak, out)
    return _mask_to_set(out, region)


def feature_scores(x, master, ctx: WindowContext, dp: DiffusionParams):
    """(f1..f5) of an under-test pixel relative to one master pixel."""
    (px, py), (mx, my) = x, master
    d = int(np.abs(ctx.labels[py, px].astype(np.int32)
                   - ctx.labels[my, mx].astype(np.int32)).sum())
    f1 = math.exp(-dp.alpha * d) + dp.beta
    f2 = math.exp(-dp.gamma * max(abs(px - mx), abs(py - my)))
    f3 = float(ctx.p_skin[py, px])
    f4 = 1.0 if ctx.ambulant[py, px] else 0.0
    f5 = 1.0 if ctx.prev_final is not None and ctx.prev_final[py, px] else 0.0
    return f1, f2, f3, f4, f5


def diffuse_second(diff1: set, rect, ctx: WindowContext,
                   dp: DiffusionParams) -> set:
    """Feature-weighted annexation around every first-diffusion master."""
    if not diff1:
        return set(diff1)
    region = window_region(rect, ctx.shape, dp.apron)
    ys, xs = _region_slices(region)
    d1_mask = _set_to_mask(diff1, region)
    out = d1_mask.copy()
    off_dx, off_dy, f2_off, line_pts, line_len = _offsets(dp.r2, dp.gamma)
    _diff2_kernel(d1_mask, ctx.labels[ys, xs], ctx._u8("weak")[ys, xs],
                  ctx.static_features(dp)[ys, xs],
                  _region_allowed(ctx, rect, region).view(np.uint8),
                  off_dx, off_dy, f2_off, line_pts, line_len,
                  dp.weights[0], dp.weights[1],
                  _f1_table(dp.alpha, dp.beta, ctx.labels.shape[2]),
                  dp.theta_f, out)
    return _mask_to_set(out, region)


def final_filter(diff2: set, ctx: WindowContext, theta_filter: float) -> set:
    """Keep pixels whose Bayesian likelihood ratio clears the final threshold."""
    if theta_filter <= 0:
        raise ValueError("theta_filter must be positive")
    return {(x, y) for x, y in diff2 if ctx.ratio[y, x] >= theta_filter}


def process_window_masks(rect, ctx: WindowContext, sp: SeedParams,
                         dp: DiffusionParams):
    """Mask-based fast path for the pipeline worker pool.

    Returns (region, seed, diff1, diff2, final) with uint8 region-local
    masks; equivalent to the set API but without per-pixel Python objects.
    """
    region = window_region(rect, ctx.shape, dp.apron)
    ys, xs = _region_slices(region)
    rx0, ry0 = region[0], region[1]
    amb = ctx._u8("ambulant")[ys, xs]
    seed = np.zeros((region[3] - ry0, region[2] - rx0), dtype=np.uint8)
    found = _seed_kernel(ctx.ternary[ys, xs], ctx.ratio[ys, xs],
                         ctx.p_skin[ys, xs], amb,
                         ctx._u8("prev_diff1")[ys, xs],
                         rect[1] - ry0, rect[3] - ry0,
                         rect[0] - rx0, rect[2] - rx0,
                         sp.p_min, sp.theta_high, sp.theta_low, sp.theta_fb,
                         seed)
    if not found:
        return region, seed, seed, seed, seed
    labels = ctx.labels[ys, xs]
    # the window tile itself is a candidate, so the allowed view needs no patch
    allowed = ctx.allowed.view(np.uint8)[ys, xs]
    diff1 = np.zeros_like(seed)
    _diff1_kernel(seed, labels, ctx._u8("strong")[ys, xs], amb, allowed,
                  dp.c_strong, dp.c_weak, diff1)
    diff2 = diff1.copy()
    off_dx, off_dy, f2_off, line_pts, line_len = _offsets(dp.r2, dp.gamma)
    _diff2_kernel(diff1, labels, ctx._u8("weak")[ys, xs],
                  ctx.static_features(dp)[ys, xs], allowed,
                  off_dx, off_dy, f2_off, line_pts, line_len,
                  dp.weights[0], dp.weights[1],
                  _f1_table(dp.alpha, dp.beta, labels.shape[2]),
                  dp.theta_f, diff2)
    final = diff2 & ctx.filter_mask(dp.theta_filter)[ys, xs]
    return region, seed, diff1, diff2, final


def process_window(rect, ctx: WindowContext, sp: SeedParams,
                   dp: DiffusionParams) -> DiffusionState:
    """Full segmentation of one candidate window."""
    state = DiffusionState()
    state.seed = generate_seed(rect, ctx, sp, dp.apron)
    state.diff1 = diffuse_first(state.seed, rect, ctx, dp)
    state.diff2 = diffuse_second(state.diff1, rect, ctx, dp)
    state.final = final_filter(state.diff2, ctx, dp.theta_filter)
    return state
