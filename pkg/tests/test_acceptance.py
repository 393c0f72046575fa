"""Acceptance suite: one test per release criterion.

Each test records a single PASS/FAIL verdict line (echoed in the terminal
summary) before asserting, so the full scorecard is visible even when a
criterion fails. Targets on the synthetic corpus are stand-ins for the
published benchmark figures, which depend on data and hardware that are
not reproducible here; the published 98 fps figure is recorded as a
reference alongside the throughput gate, not enforced.
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest

import conftest
from tskin import (diffusion, evaluation, homogeneity, imgio, model,
                   pipeline, prefilter, synth)
from tskin.diffusion import DiffusionParams, SeedParams, WindowContext
from tskin.imgio import Raster
from tskin.pipeline import PipelineConfig, StreamState

from oracles import (bresenham_oracle, diff1_oracle, diff2_oracle,
                     otsu_brute_force, ternary_label_oracle)


def record(num, desc, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    conftest.ACCEPTANCE_LINES.append(f"criterion {num} [{verdict}] {desc}: {detail}")
    assert ok, f"criterion {num} ({desc}) failed: {detail}"


@pytest.fixture(scope="module")
def eval_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("eval-corpus")
    synth.generate_corpus(d, 200, seed=777)
    return d


def test_criterion_1_f_score_consistency():
    # exact counts realizing precision 0.5830 and recall 0.6135
    tp = 7_153_410
    m = evaluation.prf(evaluation.ConfusionCounts(
        tp=tp, fp=tp * 4170 // 5830, tn=0, fn=tp * 3865 // 6135))
    ok = (m.precision == pytest.approx(0.5830, abs=1e-12)
          and m.recall == pytest.approx(0.6135, abs=1e-12)
          and abs(m.f_score - 0.5978) <= 1e-4)
    record(1, "P/R/F table consistency", ok,
           f"P={m.precision:.4f} R={m.recall:.4f} F={m.f_score:.6f} "
           f"(target 0.5978 +/- 1e-4)")


def test_criterion_2_otsu_oracle_equality():
    rng = np.random.default_rng(101)
    checked = 0
    mismatch = None
    for _ in range(500):
        h = np.zeros(256, dtype=np.int64)
        occ = rng.choice(256, rng.integers(2, 65), replace=False)
        h[occ] = rng.integers(1, 300, len(occ))
        for k in (2, 3):
            if np.count_nonzero(h) < k:
                continue
            got = homogeneity.otsu_multilevel(h, k)
            want = otsu_brute_force(h, k)
            checked += 1
            if got != want and mismatch is None:
                mismatch = (k, got, want)
    record(2, "multilevel Otsu equals exhaustive search", mismatch is None,
           f"{checked} histogram/k cases exact, incl. tie-break"
           if mismatch is None else f"first mismatch {mismatch}")


def test_criterion_3_point_in_polygon_oracle(tmp_path):
    rng = np.random.default_rng(102)
    disagreements = 0
    total = 0
    for i in range(10):
        d = tmp_path / f"c{i}"
        synth.generate_corpus(d, 6, seed=1000 + i, width=160, height=120)
        m = model.train_model(d)
        data = rng.integers(0, 256, (100, 100, 3), dtype=np.uint8)
        out = prefilter.classify_ternary(Raster(imgio.YCBCR8, data), m)
        for y in range(100):
            for x in range(100):
                yv, cb, cr = (int(v) for v in data[y, x])
                total += 1
                if out[y, x] != ternary_label_oracle(yv, cb, cr, m):
                    disagreements += 1
    record(3, "ternary classification vs ray-casting oracle",
           disagreements == 0,
           f"{total} pixels over 10 trained models, {disagreements} disagreements")


def _window_sets(fc, sp, dp):
    for rect in pipeline.candidate_rects(fc.grid):
        yield rect, diffusion.process_window(rect, fc.window_ctx, sp, dp)


def _verify_diff2_acceptances(st, rect, ctx, dp):
    """Re-check every annexed pixel against the acceptance predicate."""
    region = diffusion.window_region(rect, ctx.shape, dp.apron)
    for tx, ty in st.diff2 - st.diff1:
        found = False
        for mx, my in st.diff1:
            cheb = max(abs(tx - mx), abs(ty - my))
            if cheb > dp.r2 or cheb == 0:
                continue
            d = sum(abs(int(ctx.labels[ty, tx, c]) - int(ctx.labels[my, mx, c]))
                    for c in range(ctx.labels.shape[2]))
            score = (dp.weights[0] * (math.exp(-dp.alpha * d) + dp.beta)
                     + dp.weights[1] * math.exp(-dp.gamma * cheb)
                     + dp.weights[2] * float(ctx.p_skin[ty, tx])
                     + dp.weights[3] * bool(ctx.ambulant[ty, tx])
                     + dp.weights[4] * (ctx.prev_final is not None
                                        and bool(ctx.prev_final[ty, tx])))
            if score < dp.theta_f:
                continue
            line = bresenham_oracle(mx, my, tx, ty)[1:-1]
            if not any(ctx.weak[py, px] for px, py in line):
                found = True
                break
        if not found:
            return (tx, ty)
    return None


def test_criterion_4_chain_and_barrier_invariants(trained_model):
    cfg = PipelineConfig(model=trained_model, workers=1)
    sp = SeedParams.from_model(trained_model)
    dp = DiffusionParams.from_model(trained_model)
    frames = 0
    windows = 0
    failure = None
    for s in range(20):
        state = StreamState()
        for rgb, _ in synth.generate_sequence(10, seed=2000 + s,
                                              width=160, height=120):
            fc = pipeline.build_frame_context(rgb, cfg, state)
            h, w = rgb.height, rgb.width
            diff1_fb = np.zeros((h, w), dtype=bool)
            final_fb = np.zeros((h, w), dtype=bool)
            if fc.window_ctx is not None:
                for rect, st in _window_sets(fc, sp, dp):
                    windows += 1
                    if not (st.seed <= st.diff1 <= st.diff2
                            and st.final <= st.diff2):
                        failure = failure or ("chain", rect)
                    if any(fc.window_ctx.strong[y, x]
                           for x, y in st.diff1 - st.seed):
                        failure = failure or ("strong-edge in diff1", rect)
                    bad = _verify_diff2_acceptances(st, rect, fc.window_ctx, dp)
                    if bad is not None:
                        failure = failure or ("unjustified diff2 pixel", bad)
                    for x, y in st.diff1:
                        diff1_fb[y, x] = True
                    for x, y in st.final:
                        final_fb[y, x] = True
            state.prev_ycbcr = fc.ycbcr
            state.prev_diff1 = diff1_fb
            state.prev_final = final_fb
            frames += 1
    record(4, "chain and barrier invariants", failure is None,
           f"{frames} frames / {windows} windows verified"
           if failure is None else f"violation {failure}")


def test_criterion_5_determinism(trained_model):
    rng = np.random.default_rng(103)
    cfg1 = PipelineConfig(model=trained_model, workers=1)
    cfg8 = PipelineConfig(model=trained_model, workers=8)
    states = {"w1": StreamState(), "w8": StreamState(), "perm": StreamState()}
    frames = 0
    identical = True
    for s in range(5):
        for st in states.values():
            st.prev_ycbcr = st.prev_diff1 = st.prev_final = None
        for rgb, _ in synth.generate_sequence(10, seed=3000 + s,
                                              width=160, height=120):
            fc = pipeline.build_frame_context(rgb, cfg8, states["perm"])
            rects = pipeline.candidate_rects(fc.grid)
            perm = [rects[i] for i in rng.permutation(len(rects))]
            a = pipeline.process_frame(rgb, states["w1"], cfg1).mask
            b = pipeline.process_frame(rgb, states["w8"], cfg8).mask
            c = pipeline.process_frame(rgb, states["perm"], cfg8,
                                       rect_order=perm).mask
            if not (a.tobytes() == b.tobytes() == c.tobytes()):
                identical = False
            frames += 1
    record(5, "worker-count and order determinism", identical,
           f"{frames} frames byte-identical across 1/8 workers and "
           f"permuted window order" if identical else "masks diverged")


def _random_window32(rng):
    h = w = 32
    ctx = WindowContext(
        ternary=rng.choice([0, 128, 255], (h, w),
                           p=[0.2, 0.3, 0.5]).astype(np.uint8),
        ambulant=rng.random((h, w)) < 0.3,
        labels=rng.integers(0, 4, (h, w, 4)).astype(np.uint8),
        strong=rng.random((h, w)) < 0.06,
        weak=rng.random((h, w)) < 0.12,
        ratio=rng.uniform(0, 8, (h, w)).astype(np.float32),
        p_skin=rng.uniform(0, 1, (h, w)).astype(np.float32),
        allowed=rng.random((h, w)) < 0.9,
        prev_diff1=rng.random((h, w)) < 0.15,
        prev_final=rng.random((h, w)) < 0.15)
    return ctx, (8, 8, 24, 24)


def test_criterion_6_diffusion_oracle_equivalence():
    rng = np.random.default_rng(104)
    dp = DiffusionParams((2.0, 1.0, 1.0, 0.5, 0.5), alpha=1.0, beta=0.0,
                         gamma=0.3, theta_f=2.2, theta_filter=0.8, r2=5,
                         c_strong=4, c_weak=3, apron=8)
    sp = SeedParams(theta_high=4.0, theta_low=1.5, theta_fb=1.0, p_min=0.4)
    mismatch = None
    for i in range(100):
        ctx, rect = _random_window32(rng)
        seed = diffusion.generate_seed(rect, ctx, sp, dp.apron)
        d1 = diffusion.diffuse_first(seed, rect, ctx, dp)
        d2 = diffusion.diffuse_second(d1, rect, ctx, dp)
        region = diffusion.window_region(rect, ctx.shape, dp.apron)
        ys = slice(region[1], region[3])
        xs = slice(region[0], region[2])
        allowed = ctx.allowed[ys, xs].copy()
        allowed[rect[1] - region[1]:rect[3] - region[1],
                rect[0] - region[0]:rect[2] - region[0]] = True
        want1 = diff1_oracle(seed, region, ctx.labels[ys, xs],
                             ctx.strong[ys, xs], ctx.ambulant[ys, xs],
                             allowed, dp.c_strong, dp.c_weak)
        want2 = diff2_oracle(want1, region, ctx.labels[ys, xs],
                             ctx.weak[ys, xs], ctx.p_skin[ys, xs],
                             ctx.ambulant[ys, xs], ctx.prev_final[ys, xs],
                             allowed, dp)
        if d1 != want1:
            mismatch = (i, "diffuse_first")
            break
        if d2 != want2:
            mismatch = (i, "diffuse_second")
            break
    record(6, "diffusion equals brute-force oracles", mismatch is None,
           "100 random 32x32 windows, exact set equality"
           if mismatch is None else f"window {mismatch[0]}: {mismatch[1]}")


def test_criterion_7_synthetic_quality_gates(trained_model, eval_corpus):
    cfg = PipelineConfig(model=trained_model, workers=1)
    total = evaluation.ConfusionCounts()
    ers = []
    tp_hits = 0
    tp_total = 0
    stems = sorted(n[:-4] for n in os.listdir(eval_corpus)
                   if n.endswith(".ppm"))
    for stem in stems:
        rgb = imgio.read_ppm(eval_corpus / f"{stem}.ppm")
        gt = imgio.read_pgm(eval_corpus / f"{stem}.gt.pgm")
        result = pipeline.process_frame(rgb, None, cfg)
        total = total + evaluation.confusion(result.mask, gt)
        ers.append(result.elimination_rate)
        rate = evaluation.window_tp_rate(result.grid, gt)
        if rate is not None:
            g = result.grid
            skin_tiles = sum(
                1 for row in range(g.rows) for col in range(g.cols)
                if (gt[g.tile_rect(row, col)[1]:g.tile_rect(row, col)[3],
                       g.tile_rect(row, col)[0]:g.tile_rect(row, col)[2]]
                    == 255).any())
            tp_total += skin_tiles
            tp_hits += round(rate * skin_tiles)
    m = evaluation.prf(total)
    mean_er = sum(ers) / len(ers)
    window_tp = tp_hits / tp_total if tp_total else None
    ok = (m.f_score is not None and m.f_score >= 0.80
          and mean_er <= 0.40 and window_tp is not None and window_tp >= 0.95)
    record(7, "synthetic-corpus quality gates", ok,
           f"{len(stems)} images: F={m.f_score:.4f} (>=0.80), "
           f"mean ER={mean_er:.4f} (<=0.40), window TP={window_tp:.4f} (>=0.95)")


def test_criterion_8_threshold_monotonicity(trained_model):
    cfg = PipelineConfig(model=trained_model, workers=1)
    sp = SeedParams.from_model(trained_model)
    dp = DiffusionParams.from_model(trained_model)
    frames = [rgb for rgb, _ in synth.generate_sequence(20, seed=4000,
                                                        width=160, height=120)]
    contexts = [pipeline.build_frame_context(rgb, cfg) for rgb in frames]

    ok_wmin = True
    prev = None
    for w_min in np.linspace(1, 256, 10):
        n = sum(prefilter.window_scan(fc.refined, int(w_min), g_min=48)
                .candidate.sum() for fc in contexts)
        if prev is not None and n > prev:
            ok_wmin = False
        prev = int(n)

    # fixed diff1 per window, then sweep the second-diffusion threshold
    windows = []
    for fc in contexts[:5]:
        if fc.window_ctx is None:
            continue
        for rect in pipeline.candidate_rects(fc.grid):
            seed = diffusion.generate_seed(rect, fc.window_ctx, sp, dp.apron)
            d1 = diffusion.diffuse_first(seed, rect, fc.window_ctx, dp)
            windows.append((rect, fc.window_ctx, d1))
    ok_theta_f = True
    prev = None
    for theta_f in np.linspace(0.5, 5.0, 10):
        dp_t = dataclasses.replace(dp, theta_f=float(theta_f))
        n = sum(len(diffusion.diffuse_second(d1, rect, ctx, dp_t))
                for rect, ctx, d1 in windows)
        if prev is not None and n > prev:
            ok_theta_f = False
        prev = n

    ok_filter = True
    prev = None
    diff2s = [(rect, ctx, diffusion.diffuse_second(d1, rect, ctx, dp))
              for rect, ctx, d1 in windows]
    for theta in np.linspace(0.1, 8.0, 10):
        n = sum(len(diffusion.final_filter(d2, ctx, float(theta)))
                for rect, ctx, d2 in diff2s)
        if prev is not None and n > prev:
            ok_filter = False
        prev = n

    ok = ok_wmin and ok_theta_f and ok_filter
    record(8, "threshold monotonicity sweeps", ok,
           f"w_min {'ok' if ok_wmin else 'VIOLATED'}, "
           f"theta_F {'ok' if ok_theta_f else 'VIOLATED'}, "
           f"theta_filter {'ok' if ok_filter else 'VIOLATED'} "
           f"over 10-point sweeps, {len(windows)} windows / 20 frames")


def test_criterion_9_throughput(trained_model):
    frames = [rgb for rgb, _ in synth.generate_sequence(12, seed=5000,
                                                        width=640, height=480)]
    cfg1 = PipelineConfig(model=trained_model, workers=1)
    pipeline.process_frame(frames[0], None, cfg1)   # jit warm-up
    t0 = time.perf_counter()
    for rgb in frames:
        pipeline.process_frame(rgb, None, cfg1)
    fps1 = len(frames) / (time.perf_counter() - t0)

    cores = os.cpu_count() or 1
    if cores >= 4:
        cfg8 = PipelineConfig(model=trained_model, workers=8)
        pipeline.process_frame(frames[0], None, cfg8)
        t0 = time.perf_counter()
        for rgb in frames:
            pipeline.process_frame(rgb, None, cfg8)
        fps8 = len(frames) / (time.perf_counter() - t0)
        speedup = fps8 / fps1
        ok = fps1 >= 15.0 and speedup >= 2.0
        detail = (f"640x480: {fps1:.1f} fps @1 worker (gate >=15), "
                  f"{fps8:.1f} fps @8 workers ({speedup:.2f}x, gate >=2x); "
                  f"published reference: 98 fps on dedicated hardware")
    else:
        ok = fps1 >= 15.0
        detail = (f"640x480: {fps1:.1f} fps @1 worker (gate >=15); "
                  f"speedup clause skipped, only {cores} core(s) available "
                  f"(needs >=4); published reference: 98 fps on dedicated "
                  f"hardware")
    record(9, "throughput sanity", ok, detail)
