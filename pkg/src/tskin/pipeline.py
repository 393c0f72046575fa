"""End-to-end per-frame orchestration and the parallel window scheduler.

Stage order per frame: color conversion, ternary classification, neighbor
refinement, motion fusion, window scan + annexation, then the per-window
segmentation core over a worker pool. Feedback (previous first-diffusion
and final sets) is a strict sequential dependency between frames;
parallelism lives inside a frame, so results are invariant to worker
count and scheduling order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fast, diffusion, homogeneity, motion, prefilter
from .diffusion import DiffusionParams, SeedParams, WindowContext
from .imgio import Raster
from .model import SkinColorModel
from .prefilter import WindowGrid


@dataclass
class PipelineConfig:
    model: SkinColorModel
    workers: int = 8
    window: int | None = None   # override of the model's tile size
    stride: int | None = None
    channels: tuple[str, ...] = homogeneity.DEFAULT_CHANNELS
    collect_layers: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")

    def geometry(self) -> tuple[int, int]:
        p = self.model.params
        window = self.window if self.window is not None else int(p["window"])
        stride = self.stride if self.stride is not None else int(p["stride"])
        return window, stride


@dataclass
class StreamState:
    """Per-stream feedback carried across frames; empty at frame 0."""

    prev_ycbcr: Raster | None = None
    prev_diff1: np.ndarray | None = None
    prev_final: np.ndarray | None = None


@dataclass
class FrameResult:
    mask: np.ndarray             # (H, W) uint8, 0=non-skin 255=skin
    grid: WindowGrid
    elimination_rate: float
    timings: dict[str, float]
    layers: dict | None = None   # stage dumps when collect_layers is set


@dataclass
class FrameContext:
    """All frozen layers of one frame, shared read-only by window workers."""

    ycbcr: Raster
    ternary: np.ndarray
    refined: np.ndarray
    ambulant: np.ndarray
    grid: WindowGrid
    window_ctx: WindowContext | None   # None when no tile survived
    timings: dict[str, float] = field(default_factory=dict)


def candidate_rects(grid: WindowGrid) -> list[tuple[int, int, int, int]]:
    return [grid.tile_rect(row, col) for row, col in np.argwhere(grid.candidate)]


def build_frame_context(rgb: Raster, cfg: PipelineConfig,
                        state: StreamState | None = None) -> FrameContext:
    """Run every frame-level stage up to (but not including) the windows."""
    m = cfg.model
    p = m.params
    state = state or StreamState()
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    ft = _fast.frame_features(rgb, m, state.prev_ycbcr, int(p["tau_motion"]))
    ycbcr, ternary = ft.ycbcr, ft.ternary
    timings["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    refined = prefilter.neighbor_refine(ternary, p["K"], p["th1"], p["th2"])
    ambulant = motion.ambulant_fuse(ft.moving, refined)
    timings["neighbor"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    window, stride = cfg.geometry()
    grid = prefilter.window_scan(refined, int(p["w_min"]), int(p["g_min"]),
                                 tile=window, stride=stride)
    grid = prefilter.annex_surrounded(grid)
    timings["windows"] = time.perf_counter() - t0

    if not grid.candidate.any():
        return FrameContext(ycbcr, ternary, refined, ambulant, grid, None, timings)

    t0 = time.perf_counter()
    hom = homogeneity.label_homogeneous(rgb, cfg.channels, int(p["otsu_k"]),
                                        ycbcr=ycbcr, iq=ft.iq)
    timings["homogeneity"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    edges = homogeneity.edge_maps(ycbcr.data[..., 0],
                                  int(p["tau_strong"]), int(p["tau_weak"]))
    timings["edges"] = time.perf_counter() - t0

    window_ctx = WindowContext(
        ternary=refined, ambulant=ambulant, labels=hom.labels,
        strong=edges.strong, weak=edges.weak, ratio=ft.ratio, p_skin=ft.p_skin,
        allowed=grid.candidate_mask(),
        prev_diff1=state.prev_diff1, prev_final=state.prev_final)
    return FrameContext(ycbcr, ternary, refined, ambulant, grid, window_ctx,
                        timings)


def process_frame(rgb: Raster, state: StreamState | None, cfg: PipelineConfig,
                  rect_order=None) -> FrameResult:
    """Segment one frame and advance the stream state.

    ``rect_order`` optionally fixes the window scheduling order (used by
    the determinism tests); the output is invariant to it.
    """
    m = cfg.model
    fc = build_frame_context(rgb, cfg, state)
    h, w = rgb.height, rgb.width
    mask = np.zeros((h, w), dtype=np.uint8)
    diff1_fb = np.zeros((h, w), dtype=bool)
    final_fb = np.zeros((h, w), dtype=bool)
    layers = None

    timings = dict(fc.timings)
    if fc.window_ctx is not None:
        sp = SeedParams.from_model(m)
        dp = DiffusionParams.from_model(m)
        rects = rect_order if rect_order is not None else candidate_rects(fc.grid)
        ctx = fc.window_ctx

        t0 = time.perf_counter()

        def work(rect):
            return diffusion.process_window_masks(rect, ctx, sp, dp)

        if cfg.workers > 1 and len(rects) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(work, rects,
                                        chunksize=max(1, len(rects) // (4 * cfg.workers))))
        else:
            results = [work(rect) for rect in rects]
        timings["diffusion"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        seed_l = np.zeros((h, w), dtype=bool) if cfg.collect_layers else None
        diff2_l = np.zeros((h, w), dtype=bool) if cfg.collect_layers else None
        for region, seed_m, d1_m, d2_m, final_m in results:
            ys, xs = slice(region[1], region[3]), slice(region[0], region[2])
            mask[ys, xs] |= final_m * np.uint8(255)
            diff1_fb[ys, xs] |= d1_m.astype(bool)
            final_fb[ys, xs] |= final_m.astype(bool)
            if cfg.collect_layers:
                seed_l[ys, xs] |= seed_m.astype(bool)
                diff2_l[ys, xs] |= d2_m.astype(bool)
        timings["merge"] = time.perf_counter() - t0
        if cfg.collect_layers:
            layers = {"seed": seed_l, "diff1": diff1_fb.copy(),
                      "diff2": diff2_l, "final": final_fb.copy()}
    elif cfg.collect_layers:
        layers = {"seed": np.zeros((h, w), dtype=bool),
                  "diff1": diff1_fb.copy(),
                  "diff2": np.zeros((h, w), dtype=bool),
                  "final": final_fb.copy()}

    if cfg.collect_layers:
        layers.update({"ternary": fc.ternary, "refined": fc.refined,
                       "ambulant": fc.ambulant, "grid": fc.grid})
        if fc.window_ctx is not None:
            layers.update({"strong": fc.window_ctx.strong,
                           "weak": fc.window_ctx.weak})

    if state is not None:
        state.prev_ycbcr = fc.ycbcr
        state.prev_diff1 = diff1_fb
        state.prev_final = final_fb

    er = float(fc.grid.candidate.sum()) / (fc.grid.rows * fc.grid.cols)
    return FrameResult(mask, fc.grid, er, timings, layers)


@dataclass
class StreamReport:
    frames: int
    fps: float
    mean_er: float
    mean_stage_ms: dict[str, float]
    max_stage_ms: dict[str, float]
    per_frame: list[dict]

    def render(self) -> str:
        lines = [f"frames: {self.frames}",
                 f"throughput: {self.fps:.2f} fps",
                 f"mean elimination rate: {self.mean_er:.4f}",
                 "stage latencies (mean / max ms):"]
        for name in sorted(self.mean_stage_ms):
            lines.append(f"  {name:<12} {self.mean_stage_ms[name]:8.2f} "
                         f"{self.max_stage_ms[name]:8.2f}")
        return "\n".join(lines) + "\n"


def run_stream(frames, cfg: PipelineConfig, on_frame=None) -> StreamReport:
    """Process an ordered frame sequence with cross-frame feedback.

    ``frames`` yields RGB8 rasters; ``on_frame`` receives
    (index, FrameResult) as each frame completes.
    """
    state = StreamState()
    per_frame = []
    stage_sums: dict[str, float] = {}
    stage_max: dict[str, float] = {}
    n = 0
    wall0 = time.perf_counter()
    for i, rgb in enumerate(frames):
        result = process_frame(rgb, state, cfg)
        n += 1
        per_frame.append({"frame": i, "er": result.elimination_rate,
                          "skin_pixels": int((result.mask != 0).sum())})
        for name, dt in result.timings.items():
            stage_sums[name] = stage_sums.get(name, 0.0) + dt
            stage_max[name] = max(stage_max.get(name, 0.0), dt)
        if on_frame is not None:
            on_frame(i, result)
    wall = time.perf_counter() - wall0
    if n == 0:
        raise ValueError("stream contained no frames")
    return StreamReport(
        frames=n,
        fps=n / wall if wall > 0 else float("inf"),
        mean_er=sum(f["er"] for f in per_frame) / n,
        mean_stage_ms={k: 1000.0 * v / n for k, v in stage_sums.items()},
        max_stage_ms={k: 1000.0 * v for k, v in stage_max.items()},
        per_frame=per_frame,
    )
