"""Multilevel Otsu thresholds, class labeling and the double-threshold edges."""

import numpy as np
import pytest

from tskin import homogeneity, imgio
from tskin.homogeneity import DegenerateHistogramError
from tskin.imgio import Raster

from oracles import otsu_brute_force


def _hist(pairs):
    h = np.zeros(256, dtype=np.int64)
    for v, c in pairs:
        h[v] = c
    return h


class TestOtsuReferenceCases:
    def test_two_spikes_smallest_maximizer(self):
        # every threshold in [50, 199] attains the maximum; the smallest wins
        h = _hist([(50, 100), (200, 100)])
        assert homogeneity.otsu_multilevel(h, 2) == (50,)

    def test_three_spikes(self):
        h = _hist([(30, 10), (128, 10), (220, 10)])
        assert homogeneity.otsu_multilevel(h, 3) == (30, 128)

    def test_uniform_histogram(self):
        h = np.ones(256, dtype=np.int64)
        assert homogeneity.otsu_multilevel(h, 2) == (127,)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(26)
        for _ in range(10):
            h = np.zeros(256, dtype=np.int64)
            occ = rng.choice(256, rng.integers(5, 30), replace=False)
            h[occ] = rng.integers(1, 50, len(occ))
            for k in (2, 3):
                base = homogeneity.otsu_multilevel(h, k)
                assert homogeneity.otsu_multilevel(h * 7, k) == base

    def test_degenerate_histogram(self):
        h = _hist([(10, 5), (20, 5)])
        with pytest.raises(DegenerateHistogramError):
            homogeneity.otsu_multilevel(h, 3)
        with pytest.raises(ValueError):
            homogeneity.otsu_multilevel(np.zeros(256, dtype=np.int64), 2)

    def test_k_bounds(self):
        h = np.ones(256, dtype=np.int64)
        for k in (1, 6):
            with pytest.raises(ValueError):
                homogeneity.otsu_multilevel(h, k)


class TestOtsuOracle:
    def _random_hist(self, rng):
        h = np.zeros(256, dtype=np.int64)
        occ = rng.choice(256, rng.integers(3, 65), replace=False)
        h[occ] = rng.integers(1, 200, len(occ))
        return h

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(27)
        for _ in range(60):
            h = self._random_hist(rng)
            for k in (2, 3):
                if np.count_nonzero(h) < k:
                    continue
                assert homogeneity.otsu_multilevel(h, k) \
                    == otsu_brute_force(h, k)

    def test_beats_random_candidate_tuples(self):
        from oracles import _exact_score
        rng = np.random.default_rng(28)
        h = self._random_hist(rng)
        for k in (2, 3):
            best = homogeneity.otsu_multilevel(h, k)
            best_score = _exact_score(h, best)
            for _ in range(1000):
                ts = tuple(sorted(rng.choice(255, k - 1, replace=False)))
                assert _exact_score(h, ts) <= best_score

    def test_k4_reaches_brute_force_score(self):
        # the k >= 4 path trades exact tie-breaking for speed: the score
        # must still match the exhaustive optimum, thresholds stay ordered
        from oracles import _exact_score
        rng = np.random.default_rng(29)
        for _ in range(5):
            h = np.zeros(256, dtype=np.int64)
            occ = rng.choice(24, rng.integers(6, 12), replace=False)
            h[occ] = rng.integers(1, 100, len(occ))
            got = homogeneity.otsu_multilevel(h, 4)
            assert list(got) == sorted(set(got))
            want = otsu_brute_force(h, 4)
            got_s = float(_exact_score(h, got))
            want_s = float(_exact_score(h, want))
            assert got_s == pytest.approx(want_s, rel=1e-9)


class TestLabeling:
    def test_class_boundaries(self):
        plane = np.array([[0, 10, 11, 200, 201, 255]], dtype=np.uint8)
        labels = homogeneity.assign_classes(plane, (10, 200))
        assert labels.tolist() == [[0, 0, 1, 1, 2, 2]]

    def test_two_tone_partition(self):
        rng = np.random.default_rng(30)
        plane = rng.choice([10, 240], (20, 20)).astype(np.uint8)
        rgb = Raster(imgio.RGB8, np.repeat(plane[..., None], 3, axis=2))
        hom = homogeneity.label_homogeneous(rgb, channels=("Y",), k=2)
        y = hom.labels[..., 0]
        assert set(np.unique(y[plane == 10])) == {0}
        assert set(np.unique(y[plane == 240])) == {1}

    def test_reclassification_oracle(self):
        rng = np.random.default_rng(31)
        rgb = Raster(imgio.RGB8, rng.integers(0, 256, (24, 24, 3), dtype=np.uint8))
        hom = homogeneity.label_homogeneous(rgb, k=3)
        for i, name in enumerate(hom.channels):
            plane = homogeneity.channel_plane(rgb, name)
            th = hom.thresholds[name]
            expect = np.searchsorted(np.asarray(th), plane.ravel(),
                                     side="left").reshape(plane.shape)
            assert np.array_equal(hom.labels[..., i], expect)

    def test_constant_image_degenerates(self):
        rgb = Raster(imgio.RGB8, np.full((8, 8, 3), 77, dtype=np.uint8))
        hom = homogeneity.label_homogeneous(rgb, k=4)
        assert set(hom.degenerate) == set(hom.channels)
        assert not hom.labels.any()

    def test_unknown_channel(self):
        rgb = Raster(imgio.RGB8, np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            homogeneity.channel_plane(rgb, "H")
        with pytest.raises(ValueError):
            homogeneity.label_homogeneous(rgb, channels=())


class TestEdgeMaps:
    def test_constant_image_no_edges(self):
        em = homogeneity.edge_maps(np.full((10, 10), 99, dtype=np.uint8), 320, 120)
        assert not em.strong.any() and not em.weak.any()

    def test_vertical_step(self):
        y = np.zeros((10, 10), dtype=np.uint8)
        y[:, 5:] = 255
        em = homogeneity.edge_maps(y, tau_strong=1020, tau_weak=1020)
        # |Gx| = 1020 in the two columns adjacent to the step (border clear)
        assert em.strong[1:-1, 4].all() and em.strong[1:-1, 5].all()
        assert not em.strong[:, :4].any() and not em.strong[:, 6:].any()

    def test_strong_subset_of_weak(self):
        rng = np.random.default_rng(32)
        y = rng.integers(0, 256, (30, 30), dtype=np.uint8)
        em = homogeneity.edge_maps(y, 320, 120)
        assert not (em.strong & ~em.weak).any()

    def test_equal_thresholds_coincide(self):
        rng = np.random.default_rng(33)
        y = rng.integers(0, 256, (20, 20), dtype=np.uint8)
        em = homogeneity.edge_maps(y, 200, 200)
        assert np.array_equal(em.strong, em.weak)

    def test_border_edge_free(self):
        rng = np.random.default_rng(34)
        y = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        em = homogeneity.edge_maps(y, 10, 5)
        for m in (em.strong, em.weak):
            assert not m[0].any() and not m[-1].any()
            assert not m[:, 0].any() and not m[:, -1].any()

    def test_threshold_order_enforced(self):
        with pytest.raises(ValueError):
            homogeneity.edge_maps(np.zeros((8, 8), dtype=np.uint8), 100, 200)
