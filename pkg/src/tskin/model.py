"""Offline training and (de)serialization of the skin color model.

The trained artifact bundles, per chroma plane, an inner/outer convex
polygon pair fitted to the skin heat maps, plus skin / non-skin 3-D
Bayesian histograms and every runtime tunable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import imgio
from .geometry import convex_hull, polygon_area

PLANES = ("YCb", "YCr", "CbCr")
VALID_BINS = (16, 32, 64)
MODEL_MAGIC = "TSKIN"
MODEL_VERSION = 1

# Runtime tunables and their defaults. Threshold values were calibrated by
# grid search on the synthetic corpus (see synth module); the training CLI
# stores them in the model file so they travel with the polygons.
DEFAULT_PARAMS: dict[str, float] = {
    "K": 2.0,          # neighbor-score multiplier for the 3x3 ring
    "th1": 10.0,       # neighbor score below -> Black
    "th2": 40.0,       # neighbor score above -> White
    "w_min": 6.0,      # window candidacy: minimum white count
    "g_min": 48.0,     # window candidacy: minimum gray count (with >=1 white)
    "window": 16.0,    # tile size in pixels
    "stride": 16.0,    # tile stride in pixels
    "tau_motion": 18.0,   # frame-difference threshold
    "otsu_k": 4.0,        # classes per channel in homogeneity labeling
    "tau_strong": 320.0,  # strong-edge gradient threshold (of max 2040)
    "tau_weak": 120.0,    # weak-edge gradient threshold
    "theta_high": 4.0,    # seed likelihood-ratio threshold, non-ambulant path
    "theta_low": 1.5,     # seed ratio threshold for ambulant pixels
    "theta_fb": 1.0,      # seed ratio threshold for feedback pixels
    "p_min": 0.4,         # seed pure-probability floor
    "w1": 2.0,            # diffusion feature weights: homogeneity,
    "w2": 1.0,            # distance,
    "w3": 1.0,            # probability,
    "w4": 0.5,            # motion,
    "w5": 0.5,            # previous-frame feedback
    "alpha": 1.0,         # homogeneity score decay
    "beta": 0.0,          # homogeneity score offset
    "gamma": 0.3,         # distance score decay
    "theta_f": 2.2,       # second-diffusion acceptance threshold
    "theta_filter": 0.8,  # final Bayesian filter ratio threshold
    "r2": 5.0,            # second-diffusion Chebyshev radius
    "c_strong": 4.0,      # channel agreement needed for non-ambulant pixels
    "c_weak": 3.0,        # channel agreement needed for ambulant pixels
    "apron": 16.0,        # diffusion overreach past the window edge
}


class TrainingError(ValueError):
    """Raised when the training inputs cannot produce a valid model."""


class ModelFormatError(ValueError):
    """Raised for unreadable, truncated or invalid model files."""


@dataclass
class HeatMap:
    """256x256 joint frequency of one chroma plane over the skin pixels."""

    plane: str
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (256, 256):
            raise ValueError("heat map must be 256x256")


@dataclass
class PolygonPair:
    """Inner (high-frequency) and outer (any-frequency) convex boundaries."""

    inner: np.ndarray
    outer: np.ndarray

    def __post_init__(self):
        self.inner = np.asarray(self.inner, dtype=np.float64)
        self.outer = np.asarray(self.outer, dtype=np.float64)


@dataclass
class BayesHistograms:
    skin: np.ndarray
    nonskin: np.ndarray
    bins: int

    def __post_init__(self):
        if self.bins not in VALID_BINS:
            raise ValueError(f"bins must be one of {VALID_BINS}")
        shape = (self.bins,) * 3
        self.skin = np.asarray(self.skin, dtype=np.int64).reshape(shape)
        self.nonskin = np.asarray(self.nonskin, dtype=np.int64).reshape(shape)

    @property
    def total_skin(self) -> int:
        return int(self.skin.sum())

    @property
    def total_nonskin(self) -> int:
        return int(self.nonskin.sum())


@dataclass
class SkinColorModel:
    pairs: dict[str, PolygonPair]
    bayes: BayesHistograms
    params: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    version: int = MODEL_VERSION
    # lazily built lookup caches, never serialized
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def validate(self) -> None:
        if set(self.pairs) != set(PLANES):
            raise ModelFormatError("model must carry one polygon pair per plane")
        missing = set(DEFAULT_PARAMS) - set(self.params)
        if missing:
            raise ModelFormatError(f"missing params: {sorted(missing)}")
        for name, value in self.params.items():
            if not math.isfinite(value):
                raise ModelFormatError(f"param {name} is not finite")
        p = self.params
        if not p["th1"] < p["th2"]:
            raise ModelFormatError("th1 must be < th2")
        if not p["theta_fb"] <= p["theta_low"] <= p["theta_high"]:
            raise ModelFormatError("need theta_fb <= theta_low <= theta_high")
        weights = [p[f"w{i}"] for i in range(1, 6)]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ModelFormatError("feature weights must be >= 0 with positive sum")

    def with_params(self, **overrides) -> "SkinColorModel":
        params = dict(self.params)
        params.update(overrides)
        return replace(self, params=params, _cache={})


def build_heatmaps(skin_pixels) -> dict[str, HeatMap]:
    """Accumulate the three plane heat maps from YCbCr skin triples."""
    px = np.asarray(list(skin_pixels) if not isinstance(skin_pixels, np.ndarray) else skin_pixels)
    if px.size == 0:
        raise TrainingError("no skin pixels to train on")
    px = px.reshape(-1, 3).astype(np.int64)
    y, cb, cr = px[:, 0], px[:, 1], px[:, 2]
    maps = {}
    for plane, (a, b) in (("YCb", (y, cb)), ("YCr", (y, cr)), ("CbCr", (cb, cr))):
        counts = np.zeros((256, 256), dtype=np.int64)
        np.add.at(counts, (a, b), 1)
        maps[plane] = HeatMap(plane, counts)
    return maps


def fit_polygon_pair(heatmap: HeatMap, q_inner: float = 0.10,
                     q_outer: float = 0.001) -> PolygonPair:
    """Convex hulls of the cells above two normalized-frequency quantiles.

    Degenerate hulls (point or segment) are inflated to the half-cell
    bounding rectangle so that membership tests stay well defined.
    """
    if not 0 < q_outer < q_inner <= 1:
        raise TrainingError("need 0 < q_outer < q_inner <= 1")
    counts = heatmap.counts
    peak = counts.max()
    if peak <= 0:
        raise TrainingError("empty heat map")
    outer_cells = np.argwhere(counts >= q_outer * peak)
    inner_cells = np.argwhere(counts >= q_inner * peak)
    if len(outer_cells) == 0:
        raise TrainingError("no cell reaches the outer frequency quantile")
    if len(inner_cells) == 0:
        inner_cells = np.argwhere(counts == peak)
    return PolygonPair(_hull_or_box(inner_cells), _hull_or_box(outer_cells))


def _hull_or_box(cells: np.ndarray) -> np.ndarray:
    pts = cells.astype(np.float64)
    hull = convex_hull(pts)
    if len(hull) >= 3 and polygon_area(hull) > 1e-12:
        return hull
    a0, b0 = pts.min(axis=0) - 0.5
    a1, b1 = pts.max(axis=0) + 0.5
    return np.array([[a0, b0], [a1, b0], [a1, b1], [a0, b1]])


def build_bayes_histograms(skin, nonskin, bins: int = 32) -> BayesHistograms:
    """Quantize skin / non-skin pixel streams into 3-D count grids."""
    if bins not in VALID_BINS:
        raise TrainingError(f"bins must be one of {VALID_BINS}")
    grids = []
    for name, stream in (("skin", skin), ("nonskin", nonskin)):
        px = np.asarray(list(stream) if not isinstance(stream, np.ndarray) else stream)
        if px.size == 0:
            raise TrainingError(f"empty {name} pixel stream")
        px = px.reshape(-1, 3).astype(np.int64)
        q = px * bins // 256
        grid = np.zeros((bins,) * 3, dtype=np.int64)
        np.add.at(grid, (q[:, 0], q[:, 1], q[:, 2]), 1)
        grids.append(grid)
    return BayesHistograms(grids[0], grids[1], bins)


def train_model(corpus_dir, bins: int = 32, q_inner: float = 0.10,
                q_outer: float = 0.001, params: dict | None = None) -> SkinColorModel:
    """Train from a directory of ``name.ppm`` + ``name.gt.pgm`` pairs.

    Ground truth uses 255=skin, 0=non-skin, 128=undecided; undecided pixels
    feed neither histogram.
    """
    skin_chunks, nonskin_chunks = [], []
    names = sorted(n for n in os.listdir(corpus_dir) if n.endswith(".ppm"))
    if not names:
        raise TrainingError(f"no .ppm images in {corpus_dir}")
    for name in names:
        stem = name[:-4]
        gt_path = os.path.join(corpus_dir, stem + ".gt.pgm")
        if not os.path.exists(gt_path):
            raise TrainingError(f"missing ground truth for {name}")
        rgb = imgio.read_ppm(os.path.join(corpus_dir, name))
        gt = imgio.read_pgm(gt_path)
        if gt.shape != rgb.data.shape[:2]:
            raise TrainingError(f"ground truth size mismatch for {name}")
        ycbcr = imgio.rgb_to_ycbcr_image(rgb).data
        skin_chunks.append(ycbcr[gt == 255])
        nonskin_chunks.append(ycbcr[gt == 0])
    skin = np.concatenate(skin_chunks)
    nonskin = np.concatenate(nonskin_chunks)
    if skin.size == 0 or nonskin.size == 0:
        raise TrainingError("corpus lacks skin or non-skin pixels")
    maps = build_heatmaps(skin)
    pairs = {plane: fit_polygon_pair(maps[plane], q_inner, q_outer) for plane in PLANES}
    bayes = build_bayes_histograms(skin, nonskin, bins)
    merged = dict(DEFAULT_PARAMS)
    if params:
        merged.update(params)
    m = SkinColorModel(pairs=pairs, bayes=bayes, params=merged)
    m.validate()
    return m


def save_model(m: SkinColorModel, path) -> None:
    """Write the line-oriented UTF-8 model file (diffable and bit-exact)."""
    m.validate()
    lines = [f"{MODEL_MAGIC} v{m.version}"]
    for plane in PLANES:
        pair = m.pairs[plane]
        for role, poly in (("INNER", pair.inner), ("OUTER", pair.outer)):
            lines.append(f"POLY {plane} {role} {len(poly)}")
            for a, b in poly:
                lines.append(f"{float(a)!r} {float(b)!r}")
    for role, grid in (("SKIN", m.bayes.skin), ("NONSKIN", m.bayes.nonskin)):
        lines.append(f"HIST {role} {m.bayes.bins}")
        for i, j, k in np.argwhere(grid):
            lines.append(f"{i} {j} {k} {grid[i, j, k]}")
        lines.append("END")
    for name in sorted(m.params):
        lines.append(f"PARAM {name} {m.params[name]!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_model(path) -> SkinColorModel:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    it = iter(enumerate(lines, 1))

    def next_line():
        try:
            return next(it)
        except StopIteration:
            raise ModelFormatError("truncated model file") from None

    _, header = next_line()
    parts = header.split()
    if len(parts) != 2 or parts[0] != MODEL_MAGIC:
        raise ModelFormatError("not a model file")
    if parts[1] != f"v{MODEL_VERSION}":
        raise ModelFormatError(f"unsupported model version {parts[1]}")

    pairs: dict[str, dict[str, np.ndarray]] = {}
    hists: dict[str, np.ndarray] = {}
    bins = None
    params: dict[str, float] = {}
    for ln, line in it:
        tokens = line.split()
        if not tokens:
            continue
        tag = tokens[0]
        try:
            if tag == "POLY":
                plane, role, n = tokens[1], tokens[2], int(tokens[3])
                verts = []
                for _ in range(n):
                    _, vline = next_line()
                    a, b = vline.split()
                    verts.append((float(a), float(b)))
                pairs.setdefault(plane, {})[role.lower()] = np.asarray(verts)
            elif tag == "HIST":
                role, bins = tokens[1], int(tokens[2])
                if bins not in VALID_BINS:
                    raise ModelFormatError(f"invalid bin count {bins}")
                grid = np.zeros((bins,) * 3, dtype=np.int64)
                while True:
                    _, hline = next_line()
                    if hline == "END":
                        break
                    i, j, k, c = (int(t) for t in hline.split())
                    grid[i, j, k] = c
                hists[role.lower()] = grid
            elif tag == "PARAM":
                params[tokens[1]] = float(tokens[2])
            else:
                raise ModelFormatError(f"unknown record {tag!r} at line {ln}")
        except (ValueError, IndexError) as e:
            raise ModelFormatError(f"malformed record at line {ln}: {e}") from e

    if set(pairs) != set(PLANES) or any(set(p) != {"inner", "outer"} for p in pairs.values()):
        raise ModelFormatError("incomplete polygon sections")
    if set(hists) != {"skin", "nonskin"} or bins is None:
        raise ModelFormatError("incomplete histogram sections")
    m = SkinColorModel(
        pairs={pl: PolygonPair(pairs[pl]["inner"], pairs[pl]["outer"]) for pl in PLANES},
        bayes=BayesHistograms(hists["skin"], hists["nonskin"], bins),
        params=params,
    )
    m.validate()
    return m


def models_equal(a: SkinColorModel, b: SkinColorModel) -> bool:
    """Field-for-field equality used by the round-trip contract."""
    if a.version != b.version or a.params != b.params:
        return False
    if a.bayes.bins != b.bayes.bins:
        return False
    if not (np.array_equal(a.bayes.skin, b.bayes.skin)
            and np.array_equal(a.bayes.nonskin, b.bayes.nonskin)):
        return False
    for plane in PLANES:
        pa, pb = a.pairs[plane], b.pairs[plane]
        if not (np.array_equal(pa.inner, pb.inner) and np.array_equal(pa.outer, pb.outer)):
            return False
    return True
