"""Synthetic corpus generator."""

import numpy as np

from tskin import imgio, synth


class TestSceneRender:
    def test_shapes_and_dtypes(self):
        rng = np.random.default_rng(58)
        scene = synth.random_scene(rng, width=160, height=120)
        rgb, gt = scene.render()
        assert rgb.data.shape == (120, 160, 3) and rgb.data.dtype == np.uint8
        assert rgb.space == imgio.RGB8
        assert gt.shape == (120, 160) and gt.dtype == np.uint8
        assert set(np.unique(gt)) <= {0, 128, 255}

    def test_deterministic(self):
        a = synth.random_scene(np.random.default_rng(59), 160, 120).render()
        b = synth.random_scene(np.random.default_rng(59), 160, 120).render()
        assert np.array_equal(a[0].data, b[0].data)
        assert np.array_equal(a[1], b[1])

    def test_gt_core_inside_halo(self):
        rng = np.random.default_rng(60)
        _, gt = synth.random_scene(rng, 160, 120).render()
        assert (gt == 255).any() and (gt == 128).any()
        # every certain-skin pixel has only skin or undecided neighbors
        core = gt == 255
        ys, xs = np.nonzero(core)
        for y, x in list(zip(ys, xs))[::97]:
            nb = gt[max(0, y - 1):y + 2, max(0, x - 1):x + 2]
            assert (nb > 0).all()

    def test_motion_moves_ellipses(self):
        frames = synth.generate_sequence(3, seed=61, width=160, height=120)
        assert len(frames) == 3
        gts = [gt for _, gt in frames]
        assert any(not np.array_equal(gts[0], g) for g in gts[1:])


class TestCorpus:
    def test_files_round_trip(self, tmp_path):
        stems = synth.generate_corpus(tmp_path, 3, seed=62, width=80, height=60)
        assert stems == ["frame0000", "frame0001", "frame0002"]
        for stem in stems:
            rgb = imgio.read_ppm(tmp_path / f"{stem}.ppm")
            gt = imgio.read_pgm(tmp_path / f"{stem}.gt.pgm")
            assert rgb.data.shape == (60, 80, 3)
            assert gt.shape == (60, 80)
            assert set(np.unique(gt)) <= {0, 128, 255}

    def test_seed_reproducible(self, tmp_path):
        synth.generate_corpus(tmp_path / "a", 2, seed=63, width=64, height=48)
        synth.generate_corpus(tmp_path / "b", 2, seed=63, width=64, height=48)
        for stem in ("frame0000", "frame0001"):
            a = imgio.read_ppm(tmp_path / "a" / f"{stem}.ppm")
            b = imgio.read_ppm(tmp_path / "b" / f"{stem}.ppm")
            assert np.array_equal(a.data, b.data)
