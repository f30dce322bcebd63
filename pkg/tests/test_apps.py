"""Classification scoring and PSF imaging operations."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import dblquad, quad

from sblscreen.apps import (
    DetectionBox,
    DimensionMismatch,
    EmptySet,
    ImageGrid,
    LabeledDictionary,
    PsfParams,
    PsfPrior,
    Undecidable,
    classify,
    delta_e,
    generate_target,
    group_iou,
    iou,
    localize,
    psnr,
    render_feature,
    sample_dictionary,
)
from sblscreen.problem import Problem, SparseSolution, normalize_columns


def gaussian_mass(u, sigma):
    """Quadrature oracle: integral of N(0, sigma^2) over [u-1/2, u+1/2]."""
    pdf = lambda x: math.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    val, _ = quad(pdf, u - 0.5, u + 0.5, epsabs=1e-12)
    return val


class TestDeltaE:
    def test_small_sigma_concentrates(self):
        assert delta_e(0.0, 1e-3) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        for u in (0.3, 1.7, 5.0):
            assert delta_e(u, 1.2) == pytest.approx(delta_e(-u, 1.2), abs=1e-15)

    def test_center_pixel_quadrature(self):
        assert delta_e(0.0, 1.0) == pytest.approx(gaussian_mass(0.0, 1.0), abs=1e-12)

    @pytest.mark.parametrize("u", [-2.3, -0.5, 0.0, 0.8, 3.1])
    @pytest.mark.parametrize("sigma", [0.4, 1.0, 2.5])
    def test_matches_quadrature(self, u, sigma):
        assert delta_e(u, sigma) == pytest.approx(gaussian_mass(u, sigma), abs=1e-6)

    @given(st.floats(-20, 20), st.floats(0.1, 5.0))
    def test_bounds(self, u, sigma):
        val = delta_e(u, sigma)
        assert 0.0 <= val <= 1.0

    def test_telescoping_sum(self):
        sigma = 1.3
        total = sum(delta_e(float(u), sigma) for u in range(-40, 41))
        assert total <= 1.0 + 1e-12
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_sigma_positive(self):
        with pytest.raises(ValueError):
            delta_e(0.0, 0.0)


class TestRenderFeature:
    def test_tiny_sigma_one_hot(self):
        grid = render_feature(PsfParams(3.0, 5.0, 1e-3), 8, 8)
        flat = grid.pixels
        assert flat[4, 2] == pytest.approx(1.0, abs=1e-12)  # row y=5, col x=3
        assert flat.sum() == pytest.approx(1.0, abs=1e-10)

    def test_total_mass_bounded(self):
        for params in (PsfParams(4.2, 3.7, 1.1), PsfParams(1.0, 8.0, 2.5, bg=0.1)):
            grid = render_feature(params, 8, 8)
            assert grid.pixels.sum() <= 1.0 + params.bg * 64 + 1e-12

    def test_matches_2d_quadrature(self):
        params = PsfParams(3.3, 4.8, 1.4)
        grid = render_feature(params, 8, 8)
        norm = 1.0 / (2 * math.pi * params.sigma_xy**2)
        for (i, j) in [(3, 5), (1, 1), (6, 4)]:  # x=i, y=j, 1-based
            val, _ = dblquad(
                lambda yy, xx: norm
                * math.exp(
                    -((xx - params.x0) ** 2 + (yy - params.y0) ** 2)
                    / (2 * params.sigma_xy**2)
                ),
                i - 0.5, i + 0.5,
                j - 0.5, j + 0.5,
                epsabs=1e-10,
            )
            assert grid.pixels[j - 1, i - 1] == pytest.approx(val, abs=1e-6)

    def test_center_bounds_enforced(self):
        with pytest.raises(ValueError):
            render_feature(PsfParams(20.0, 4.0, 1.0), 8, 8)

    def test_vectorize_roundtrip(self):
        grid = render_feature(PsfParams(3.0, 4.0, 1.0), 6, 5)
        back = ImageGrid.from_vector(grid.vectorize(), 6, 5)
        np.testing.assert_array_equal(back.pixels, grid.pixels)


class TestSampleDictionary:
    def test_deterministic(self):
        a, pa = sample_dictionary(50, 12, 12, seed=7)
        b, pb = sample_dictionary(50, 12, 12, seed=7)
        assert a.tobytes() == b.tobytes()
        assert pa == pb

    def test_shapes_and_norms(self):
        mat, params = sample_dictionary(40, 10, 12, seed=1)
        assert mat.shape == (120, 40)
        assert len(params) == 40
        np.testing.assert_allclose(np.linalg.norm(mat, axis=0), 1.0, atol=1e-12)

    def test_sigma_prior_respected(self):
        prior = PsfPrior(sigma_range=(0.5, 0.9))
        _, params = sample_dictionary(200, 10, 10, prior=prior, seed=2)
        assert all(0.5 <= p.sigma_xy <= 0.9 for p in params)

    def test_gaussian_prior_centers_in_grid(self):
        prior = PsfPrior(kind="gaussian")
        _, params = sample_dictionary(100, 10, 10, prior=prior, seed=3)
        assert all(1.0 <= p.x0 <= 10.0 and 1.0 <= p.y0 <= 10.0 for p in params)


class TestGenerateTarget:
    def test_no_sources_is_pure_noise(self):
        clean, noisy = generate_target([], 8, 8, 0.01, seed=0)
        np.testing.assert_array_equal(clean.pixels, np.zeros((8, 8)))
        assert np.std(noisy.pixels) == pytest.approx(0.1, rel=0.3)

    def test_single_unit_source_is_the_feature(self):
        params = PsfParams(4.0, 5.0, 1.2)
        clean, _ = generate_target([(params, 1.0)], 8, 8, 1e-6, seed=0)
        np.testing.assert_allclose(clean.pixels, render_feature(params, 8, 8).pixels)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            generate_target([(PsfParams(4.0, 4.0, 1.0), -1.0)], 8, 8, 0.01)

    def test_seeded_noise_reproducible(self):
        _, a = generate_target([(PsfParams(4.0, 4.0, 1.0), 1.0)], 8, 8, 0.01, seed=5)
        _, b = generate_target([(PsfParams(4.0, 4.0, 1.0), 1.0)], 8, 8, 0.01, seed=5)
        np.testing.assert_array_equal(a.pixels, b.pixels)


def make_labeled(n_per_class=3, n_samples=30, seed=0):
    rng = np.random.default_rng(seed)
    n = 10 * n_per_class
    mat, _ = normalize_columns(rng.normal(size=(n_samples, n)))
    labels = np.repeat(np.arange(10), n_per_class)
    return LabeledDictionary(Problem(mat, rng.normal(size=n_samples), 1.0), labels)


class TestClassify:
    def test_single_class_support(self):
        labeled = make_labeled()
        theta = np.zeros(30)
        theta[labeled.labels == 7] = [0.5, -0.25, 1.0]
        pred, prob = classify(SparseSolution.from_theta(theta, 0.0), labeled)
        assert pred == 7
        expected = np.zeros(10)
        expected[7] = 1.0
        np.testing.assert_allclose(prob, expected)

    def test_normalization_arithmetic(self):
        labeled = make_labeled(n_per_class=1)
        theta = np.zeros(10)
        theta[0], theta[1] = 3.0, -4.0  # ABS = (3, 4, 0, ...)
        pred, prob = classify(SparseSolution.from_theta(theta, 0.0), labeled)
        assert pred == 1
        np.testing.assert_allclose(prob[:2], [0.6, 0.8])
        assert np.linalg.norm(prob) == pytest.approx(1.0)

    def test_unit_norm_whenever_nonzero(self):
        labeled = make_labeled(seed=3)
        rng = np.random.default_rng(3)
        theta = rng.normal(size=30)
        _, prob = classify(SparseSolution.from_theta(theta, 0.0), labeled)
        assert np.linalg.norm(prob) == pytest.approx(1.0)

    def test_scale_invariance(self):
        labeled = make_labeled(seed=4)
        rng = np.random.default_rng(4)
        theta = rng.normal(size=30)
        pred1, _ = classify(SparseSolution.from_theta(theta, 0.0), labeled)
        pred2, _ = classify(SparseSolution.from_theta(17.3 * theta, 0.0), labeled)
        assert pred1 == pred2

    def test_tie_breaks_to_smallest_digit(self):
        labeled = make_labeled(n_per_class=1)
        theta = np.zeros(10)
        theta[3], theta[6] = 2.0, 2.0
        pred, _ = classify(SparseSolution.from_theta(theta, 0.0), labeled)
        assert pred == 3

    def test_undecidable(self):
        labeled = make_labeled()
        with pytest.raises(Undecidable):
            classify(SparseSolution.from_theta(np.zeros(30), 0.0), labeled)


class TestIou:
    def test_identical(self):
        box = DetectionBox(3.0, 4.0, 1.5)
        assert iou(box, box) == 1.0

    def test_disjoint(self):
        assert iou(DetectionBox(0, 0, 1), DetectionBox(10, 0, 1)) == 0.0

    def test_half_offset_unit_squares(self):
        a = DetectionBox(0.0, 0.0, 0.5)
        b = DetectionBox(0.5, 0.0, 0.5)
        assert iou(a, b) == pytest.approx(1.0 / 3.0)

    @given(
        st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3),
        st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3),
    )
    def test_symmetric_and_bounded(self, ax, ay, ah, bx, by, bh):
        a, b = DetectionBox(ax, ay, ah), DetectionBox(bx, by, bh)
        assert iou(a, b) == pytest.approx(iou(b, a), abs=1e-12)
        assert 0.0 <= iou(a, b) <= 1.0


class TestGroupIou:
    def test_identical_sets(self):
        boxes = [DetectionBox(1, 1, 1.5), DetectionBox(5, 5, 1.5), DetectionBox(9, 2, 1.5)]
        assert group_iou(boxes, list(boxes)) == 1.0

    def test_all_disjoint(self):
        dets = [DetectionBox(0, 0, 0.5)]
        truths = [DetectionBox(10, 10, 0.5), DetectionBox(20, 20, 0.5)]
        assert group_iou(dets, truths) == 0.0

    def test_three_dets_two_truths_pairwise_table(self):
        dets = [DetectionBox(1, 1, 1), DetectionBox(5, 5, 1), DetectionBox(5.5, 5, 1)]
        truths = [DetectionBox(1.5, 1, 1), DetectionBox(5, 5.5, 1)]
        table = np.array([[iou(d, t) for t in truths] for d in dets])
        expected = table.max(axis=1).mean()  # m > n: average per detection
        assert group_iou(dets, truths) == pytest.approx(expected)

    def test_more_truths_averages_per_truth(self):
        dets = [DetectionBox(1, 1, 1)]
        truths = [DetectionBox(1, 1, 1), DetectionBox(4, 4, 1), DetectionBox(9, 9, 1)]
        table = np.array([[iou(d, t) for t in truths] for d in dets])
        expected = table.max(axis=0).mean()
        assert group_iou(dets, truths) == pytest.approx(expected)

    def test_empty_rejected(self):
        with pytest.raises(EmptySet):
            group_iou([], [DetectionBox(0, 0, 1)])
        with pytest.raises(EmptySet):
            group_iou([DetectionBox(0, 0, 1)], [])


class TestPsnr:
    def grid(self, arr):
        arr = np.asarray(arr, dtype=float)
        return ImageGrid(arr.shape[1], arr.shape[0], arr)

    def test_identical_images_sentinel(self):
        img = self.grid([[1.0, 0.5], [0.25, 0.0]])
        assert psnr(img, img) == math.inf

    def test_zero_db_when_mse_equals_peak_squared(self):
        orig = self.grid([[2.0, 2.0], [2.0, 2.0]])
        recon = self.grid([[0.0, 0.0], [0.0, 0.0]])  # MSE = 4 = peak^2
        assert psnr(orig, recon) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_pair(self):
        orig = self.grid([[1.0, 0.0], [0.0, 0.5]])
        recon = self.grid([[0.9, 0.1], [0.0, 0.5]])
        mse = (0.01 + 0.01) / 4
        assert psnr(orig, recon) == pytest.approx(20 * math.log10(1.0 / math.sqrt(mse)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            psnr(self.grid(np.ones((2, 2))), self.grid(np.ones((3, 2))))

    def test_decreases_with_noise(self):
        rng = np.random.default_rng(0)
        clean = self.grid(rng.random((10, 10)))
        values = []
        for scale in (0.01, 0.05, 0.2):
            avg = np.mean([
                psnr(clean, self.grid(clean.pixels + rng.normal(0, scale, (10, 10))))
                for _ in range(20)
            ])
            values.append(avg)
        assert values[0] > values[1] > values[2]


class TestLocalize:
    def params_list(self):
        return [
            PsfParams(2.0, 2.0, 1.0),
            PsfParams(2.2, 2.1, 1.0),
            PsfParams(8.0, 8.0, 1.0),
        ]

    def test_empty_support(self):
        assert localize(SparseSolution.from_theta(np.zeros(3), 0.0), self.params_list()) == []

    def test_single_feature(self):
        theta = np.array([0.0, 0.0, 1.0])
        boxes = localize(SparseSolution.from_theta(theta, 0.0), self.params_list())
        assert len(boxes) == 1
        assert (boxes[0].cx, boxes[0].cy) == (8.0, 8.0)
        assert boxes[0].half == 1.5

    def test_weighted_centroid_merge(self):
        theta = np.array([3.0, 1.0, 0.0])
        boxes = localize(
            SparseSolution.from_theta(theta, 0.0), self.params_list(), merge_radius=1.0
        )
        assert len(boxes) == 1
        assert boxes[0].cx == pytest.approx((3 * 2.0 + 1 * 2.2) / 4)
        assert boxes[0].cy == pytest.approx((3 * 2.0 + 1 * 2.1) / 4)

    def test_distant_features_stay_separate(self):
        theta = np.array([1.0, 0.0, 2.0])
        boxes = localize(SparseSolution.from_theta(theta, 0.0), self.params_list())
        assert len(boxes) == 2
