import warnings

import numpy as np
import pytest

from conftest import random_map
from kpbms.fixtures import make_scene
from kpbms.imaging import Keypoint, KeypointClass, KeypointSet, as_gray_image, flood_fill, threshold
from kpbms.saliency import (
    SaliencyConfig,
    ZeroIntensityWarning,
    activation_bms_baseline,
    activation_combined,
    activation_keypoint,
    bms_saliency,
    mean_attention,
    normalize_activation,
    sample_thresholds,
    saliency_for_keypoint,
    saliency_for_seeds,
    saliency_per_class,
)
from oracles import border_flood_bms, composed_saliency, naive_mean

EVEN = SaliencyConfig(sampling="evenly_spaced")


def square_scene(size=15, lo=5, hi=10, value=1.0):
    img = np.zeros((size, size))
    img[lo:hi, lo:hi] = value
    return as_gray_image(img)


class TestSampling:
    def test_collapsed_interval(self):
        cfg = SaliencyConfig(alpha=1.0, n_thresholds=4)
        np.testing.assert_array_equal(sample_thresholds(0.8, cfg), [0.8] * 4)

    def test_evenly_spaced(self):
        cfg = SaliencyConfig(alpha=0.5, n_thresholds=3, sampling="evenly_spaced")
        np.testing.assert_allclose(sample_thresholds(0.8, cfg), [0.4, 0.6, 0.8], atol=1e-15)

    def test_random_moments(self):
        cfg = SaliencyConfig(alpha=0.5, n_thresholds=1000, seed=3)
        t = sample_thresholds(0.8, cfg)
        assert t.min() >= 0.4 and t.max() <= 0.8
        # sd of the mean of 1000 U(0.4, 0.8) draws is ~0.0037
        assert abs(t.mean() - 0.6) < 0.01

    def test_random_reproducible(self):
        cfg = SaliencyConfig(n_thresholds=10, seed=9)
        np.testing.assert_array_equal(sample_thresholds(0.7, cfg), sample_thresholds(0.7, cfg))

    def test_zero_phi(self):
        np.testing.assert_array_equal(sample_thresholds(0.0, SaliencyConfig(n_thresholds=5)), np.zeros(5))

    @pytest.mark.parametrize("kwargs", [
        dict(alpha=1.5), dict(n_thresholds=0), dict(blob_fraction=0.0), dict(sampling="grid"),
        dict(connectivity=6),
    ])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            SaliencyConfig(**kwargs)


class TestActivation:
    def two_blobs(self):
        m = np.zeros((10, 10), bool)
        m[1:4, 1:4] = True
        m[6:9, 6:9] = True
        return m

    def test_union_of_two_blobs(self):
        m = self.two_blobs()
        out = activation_keypoint(m, [Keypoint(2, 2), Keypoint(7, 7)])
        np.testing.assert_array_equal(out, m)

    def test_same_blob_counted_once(self):
        m = self.two_blobs()
        out = activation_keypoint(m, [Keypoint(1, 1), Keypoint(3, 3)])
        np.testing.assert_array_equal(out, flood_fill(m, Keypoint(1, 1)))

    def test_no_seeds(self):
        assert not activation_keypoint(self.two_blobs(), []).any()

    def test_matches_per_seed_union(self, rng):
        for _ in range(100):
            m = random_map(rng)
            seeds = list({Keypoint(int(x), int(y)) for x, y in rng.integers(0, 32, (4, 2))})
            expected = np.zeros_like(m)
            for kp in seeds:
                expected |= flood_fill(m, kp)
            np.testing.assert_array_equal(activation_keypoint(m, seeds), expected)

    def test_bms_all_ones(self):
        assert not activation_bms_baseline(np.ones((6, 6), bool)).any()

    def test_bms_interior_blob_survives(self):
        m = np.zeros((8, 8), bool)
        m[3:5, 3:5] = True
        np.testing.assert_array_equal(activation_bms_baseline(m), m)

    @pytest.mark.parametrize("conn", [4, 8])
    def test_bms_matches_border_flood(self, rng, conn):
        for _ in range(100):
            m = random_map(rng)
            np.testing.assert_array_equal(activation_bms_baseline(m, conn), border_flood_bms(m, conn))

    def test_combined(self, rng):
        x = random_map(rng)
        y = random_map(rng)
        np.testing.assert_array_equal(activation_combined(x, np.ones_like(x)), x)
        assert not activation_combined(x, np.zeros_like(x)).any()
        np.testing.assert_array_equal(activation_combined(x, y), activation_combined(y, x))
        np.testing.assert_array_equal(activation_combined(x, x), x)
        with pytest.raises(ValueError):
            activation_combined(x, x[:5])


class TestNormalization:
    def test_four_pixels(self):
        m = np.zeros((5, 5), bool)
        m[1:3, 1:3] = True
        a = normalize_activation(m)
        assert set(a[m]) == {0.5} and not a[~m].any()

    def test_single_pixel(self):
        m = np.zeros((3, 3), bool)
        m[1, 1] = True
        assert normalize_activation(m)[1, 1] == 1.0

    def test_empty(self):
        assert not normalize_activation(np.zeros((3, 3), bool)).any()

    def test_unit_norm(self, rng):
        for _ in range(50):
            m = random_map(rng, density=rng.uniform(0.01, 0.9))
            if m.any():
                assert abs(np.linalg.norm(normalize_activation(m)) - 1.0) < 1e-9

    def test_mean_examples(self, rng):
        x = normalize_activation(random_map(rng))
        np.testing.assert_array_equal(mean_attention([x, x], 2), x)
        np.testing.assert_allclose(mean_attention([x, np.zeros_like(x)], 2), x / 2, atol=0)

    def test_mean_matches_naive(self, rng):
        maps = [normalize_activation(random_map(rng, (8, 8))) for _ in range(7)]
        np.testing.assert_allclose(mean_attention(maps, 7), naive_mean(maps, 7), rtol=0, atol=1e-12)

    def test_mean_errors(self):
        with pytest.raises(ValueError):
            mean_attention([], 1)
        with pytest.raises(ValueError):
            mean_attention([np.zeros((2, 2))], 2)


class TestSaliencyForKeypoint:
    def test_square(self):
        img = square_scene()
        kp = Keypoint(7, 7)
        a = saliency_for_keypoint(img, kp, SaliencyConfig(alpha=0.5, n_thresholds=16))
        np.testing.assert_array_equal(a > 0, img > 0)
        assert a[7, 7] == a.max()

    def test_all_zero_image_warns(self):
        with pytest.warns(ZeroIntensityWarning):
            a = saliency_for_keypoint(as_gray_image(np.zeros((6, 6))), Keypoint(2, 2), SaliencyConfig())
        assert not a.any()

    def test_constant_image_single_component(self):
        img = as_gray_image(np.full((9, 11), 0.8))
        a = saliency_for_keypoint(img, Keypoint(4, 4), SaliencyConfig(alpha=1.0, n_thresholds=5))
        np.testing.assert_allclose(a, 1.0 / np.sqrt(99), rtol=1e-12)

    def test_out_of_bounds(self):
        with pytest.raises(IndexError):
            saliency_for_keypoint(square_scene(), Keypoint(15, 0), SaliencyConfig())

    @pytest.mark.parametrize("conn", [4, 8])
    def test_matches_hand_composition(self, conn):
        rng = np.random.default_rng(5)
        for trial in range(15):
            scene = make_scene(rng, 40, 30, n_blobs=3, kind="hard" if trial % 2 else "clean")
            cfg = SaliencyConfig(alpha=rng.uniform(0, 1), n_thresholds=12, connectivity=conn, seed=trial)
            for kp in scene.keypoints:
                phi = scene.image[kp.y, kp.x]
                thetas = sample_thresholds(phi, cfg, np.random.default_rng(trial))
                got = saliency_for_keypoint(scene.image, kp, cfg, np.random.default_rng(trial))
                want = composed_saliency(scene.image, [kp], thetas, conn)
                np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_support_inside_loosest_flood(self):
        rng = np.random.default_rng(8)
        cfg = SaliencyConfig(alpha=0.3, n_thresholds=20, seed=1)
        for _ in range(10):
            scene = make_scene(rng, 60, 40, 4, "hard")
            for kp in scene.keypoints:
                a = saliency_for_keypoint(scene.image, kp, cfg)
                loose = flood_fill(threshold(scene.image, cfg.alpha * scene.image[kp.y, kp.x]), kp)
                assert not ((a > 0) & ~loose).any()

    def test_deterministic_mode_bit_exact(self):
        scene = make_scene(np.random.default_rng(0), 50, 40, 3)
        kp = scene.keypoints[0]
        a = saliency_for_keypoint(scene.image, kp, EVEN)
        b = saliency_for_keypoint(scene.image, kp, EVEN)
        assert a.tobytes() == b.tobytes()


class TestPerClass:
    def test_two_classes_on_two_blobs(self):
        img = np.zeros((12, 20))
        img[2:6, 2:6] = 0.9
        img[6:10, 12:17] = 0.7
        img = as_gray_image(img)
        kps = KeypointSet([Keypoint(3, 3, KeypointClass.DIRECT), Keypoint(14, 8, KeypointClass.INDIRECT)])
        maps = saliency_per_class(img, kps, EVEN)
        assert set(maps) == {KeypointClass.DIRECT, KeypointClass.INDIRECT}
        np.testing.assert_array_equal(maps[KeypointClass.DIRECT] > 0, img == 0.9)
        np.testing.assert_array_equal(maps[KeypointClass.INDIRECT] > 0, img == 0.7)

    def test_single_class(self):
        img = square_scene()
        out = saliency_per_class(img, KeypointSet([Keypoint(6, 6), Keypoint(8, 8)]), EVEN)
        assert list(out) == [KeypointClass.DIRECT]

    def test_empty(self):
        assert saliency_per_class(square_scene(), KeypointSet(), EVEN) == {}

    def test_multi_seed_matches_composition(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            scene = make_scene(rng, 160, 120, 4, "hard")
            seeds = list(scene.keypoints)
            assert seeds
            phis = [scene.image[k.y, k.x] for k in seeds]
            cfg = SaliencyConfig(alpha=0.4, n_thresholds=10, sampling="evenly_spaced")
            thetas = np.linspace(0.4 * min(phis), max(phis), 10)
            got = saliency_for_seeds(scene.image, seeds, cfg)
            np.testing.assert_allclose(got, composed_saliency(scene.image, seeds, thetas), atol=1e-12)

    def test_dim_seed_inactive_above_its_intensity(self):
        img = np.zeros((5, 12))
        img[1:4, 1:4] = 1.0
        img[1:4, 8:11] = 0.5
        img = as_gray_image(img)
        seeds = [Keypoint(2, 2), Keypoint(9, 2)]
        a = saliency_for_seeds(img, seeds, SaliencyConfig(alpha=0.5, n_thresholds=5, sampling="evenly_spaced"))
        # bright blob is active in all 5 maps, dim one only where theta <= 0.5
        assert a[2, 2] > a[2, 9] > 0

    def test_zero_seed_dropped_with_warning(self):
        img = square_scene()
        with pytest.warns(ZeroIntensityWarning):
            a = saliency_for_seeds(img, [Keypoint(0, 0), Keypoint(7, 7)], EVEN)
        np.testing.assert_array_equal(a > 0, img > 0)

    def test_csa_variant_clears_border_regions(self):
        img = np.zeros((10, 10))
        img[0:3, 0:3] = 1.0
        img[5:8, 5:8] = 1.0
        img = as_gray_image(img)
        kps = KeypointSet([Keypoint(1, 1), Keypoint(6, 6)])
        plain = saliency_per_class(img, kps, EVEN)[KeypointClass.DIRECT]
        csa = saliency_per_class(img, kps, EVEN, csa=True)[KeypointClass.DIRECT]
        assert plain[1, 1] > 0 and csa[1, 1] == 0 and csa[6, 6] > 0


def test_bms_baseline_saliency_ignores_border_lights():
    img = np.zeros((20, 20))
    img[0:4, 0:4] = 1.0
    img[9:12, 9:12] = 0.8
    a = bms_saliency(as_gray_image(img), SaliencyConfig(n_thresholds=8, sampling="evenly_spaced"))
    assert a[1, 1] == 0 and a[10, 10] > 0


def test_no_stray_warnings_on_normal_scene():
    scene = make_scene(np.random.default_rng(3), 40, 30, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        saliency_for_keypoint(scene.image, scene.keypoints[0], SaliencyConfig())
