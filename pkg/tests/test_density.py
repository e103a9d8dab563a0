import numpy as np
import pytest
from scipy import stats

from meterkde.density import (GRID_SIZE, DegenerateDensityError, DensityGrid,
                              build_grid, finalize_density, quantile, sample)


def values_with_p90(p90):
    """Eleven values whose linear-interpolation 90th percentile is p90."""
    vals = np.concatenate([np.linspace(0.0, p90, 10), [1.0]])
    assert np.percentile(vals, 90) == pytest.approx(p90)
    return vals


class TestBuildGrid:
    def test_p90_at_09_gives_uniform_grid(self):
        grid = build_grid(values_with_p90(0.9))
        np.testing.assert_allclose(np.diff(grid.points), 0.01, rtol=1e-12)
        assert grid.points[0] == pytest.approx(0.01)
        assert grid.points[-1] == 1.0

    def test_low_p90_two_spacings(self):
        grid = build_grid(values_with_p90(0.45))
        np.testing.assert_allclose(np.diff(grid.points[:90]), 0.005, rtol=1e-9)
        np.testing.assert_allclose(np.diff(grid.points[89:]), 0.055, rtol=1e-9)
        assert grid.points[89] == pytest.approx(0.45)

    def test_high_p90(self):
        grid = build_grid(values_with_p90(0.99))
        assert grid.points[89] == pytest.approx(0.99)
        assert grid.points[99] == 1.0
        np.testing.assert_allclose(np.diff(grid.points[89:]), 0.001, rtol=1e-9)

    def test_degenerate_sample_falls_back_to_uniform(self):
        with pytest.warns(UserWarning):
            grid = build_grid(np.zeros(50))
        assert grid.points[-1] == 1.0
        assert np.all(np.diff(grid.points) > 0)

    def test_all_ones_sample_still_strictly_increasing(self):
        grid = build_grid(np.ones(50))
        assert np.all(np.diff(grid.points) > 0)
        assert grid.points[-1] == 1.0

    def test_grid_invariants(self):
        grid = build_grid(values_with_p90(0.3))
        assert grid.points.shape == (GRID_SIZE,)
        assert grid.points[0] > 0
        with pytest.raises(ValueError):
            DensityGrid(points=np.linspace(0, 0.99, 100), p90=0.5)


class TestFinalizeDensity:
    def test_uniform_density(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        # Grid point 0.5 sits at index 49; uniform CDF passes through it.
        assert toy_grid.points[49] == pytest.approx(0.5)
        assert fc.cdf[49] == pytest.approx(0.5, abs=1e-12)
        assert fc.cdf[-1] == 1.0

    def test_mass_concentrated_at_first_point(self, toy_grid):
        raw = np.zeros(GRID_SIZE)
        raw[0] = 2.0
        fc = finalize_density(toy_grid, raw)
        # All mass lies within the first two cells.
        assert fc.cdf[1] == pytest.approx(1.0, abs=1e-12)

    def test_renormalization_preserves_shape(self, toy_grid):
        # A truncated Gaussian density with mass ~0.97 before renormalizing.
        raw = stats.norm.pdf(toy_grid.points, loc=0.5, scale=0.23)
        mass_before = np.trapezoid(np.concatenate(([raw[0]], raw)),
                                   np.concatenate(([0.0], toy_grid.points)))
        assert 0.9 < mass_before < 0.99
        fc = finalize_density(toy_grid, raw)
        np.testing.assert_allclose(fc.density, raw / mass_before, rtol=1e-9)
        # Oracle: high-resolution numeric integration of the same
        # piecewise-linear density, renormalized.
        fine = np.linspace(0.0, 1.0, 200001)
        xs = np.concatenate(([0.0], toy_grid.points))
        ds = np.concatenate(([raw[0]], raw))
        fine_density = np.interp(fine, xs, ds)
        fine_cdf = np.concatenate(([0.0], np.cumsum(
            0.5 * (fine_density[1:] + fine_density[:-1]) * np.diff(fine))))
        fine_cdf /= fine_cdf[-1]
        oracle = np.interp(toy_grid.points, fine, fine_cdf)
        np.testing.assert_allclose(fc.cdf, oracle, atol=1e-7)
        assert fc.cdf[-1] == 1.0

    def test_cdf_monotone_nonnegative(self, toy_grid):
        rng = np.random.default_rng(3)
        for _ in range(20):
            fc = finalize_density(toy_grid, rng.random(GRID_SIZE))
            assert np.all(np.diff(fc.cdf) >= -1e-12)
            assert np.all(fc.density >= 0)
            assert fc.cdf[-1] == pytest.approx(1.0, abs=1e-9)

    def test_zero_mass_raises(self, toy_grid):
        with pytest.raises(DegenerateDensityError):
            finalize_density(toy_grid, np.zeros(GRID_SIZE))

    def test_negative_density_rejected(self, toy_grid):
        raw = np.ones(GRID_SIZE)
        raw[3] = -0.1
        with pytest.raises(ValueError):
            finalize_density(toy_grid, raw)


class TestQuantile:
    def test_uniform_median(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        assert quantile(fc, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_approaches_upper_support(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        assert quantile(fc, 0.999999) == pytest.approx(1.0, abs=1e-5)

    def test_step_cdf_returns_jump_point_within_grid_cell(self, toy_grid):
        raw = np.zeros(GRID_SIZE)
        raw[60] = 5.0
        fc = finalize_density(toy_grid, raw)
        y_star = toy_grid.points[60]
        spacing = 0.011
        for theta in (0.05, 0.3, 0.5, 0.8, 0.95):
            assert abs(quantile(fc, theta) - y_star) <= spacing

    def test_monotone_in_theta(self, toy_grid):
        rng = np.random.default_rng(4)
        fc = finalize_density(toy_grid, rng.random(GRID_SIZE))
        thetas = np.linspace(0.001, 0.999, 400)
        qs = quantile(fc, thetas)
        assert np.all(np.diff(qs) >= 0)

    def test_roundtrip_within_one_grid_spacing(self, toy_grid):
        rng = np.random.default_rng(5)
        fc = finalize_density(toy_grid, 0.2 + rng.random(GRID_SIZE))
        spacing = np.max(np.diff(toy_grid.points))
        for i in range(0, GRID_SIZE - 1, 7):
            theta = fc.cdf[i]
            if 0.0 < theta < 1.0:
                assert abs(quantile(fc, theta) - toy_grid.points[i]) <= spacing

    def test_invalid_theta(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        for theta in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                quantile(fc, theta)


class TestSample:
    def test_determinism(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        a = sample(fc, 1000, rng_seed=123)
        b = sample(fc, 1000, rng_seed=123)
        np.testing.assert_array_equal(a, b)

    def test_near_degenerate_samples_sit_at_the_atom(self, toy_grid):
        raw = np.zeros(GRID_SIZE)
        raw[40] = 3.0
        fc = finalize_density(toy_grid, raw)
        draws = sample(fc, 500, rng_seed=9)
        assert np.all(np.abs(draws - toy_grid.points[40]) <= 0.011)

    def test_uniform_law_of_large_numbers(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        draws = sample(fc, 10 ** 5, rng_seed=77)
        assert abs(draws.mean() - 0.5) < 0.01

    def test_kolmogorov_smirnov_against_forecast_cdf(self, toy_grid):
        rng = np.random.default_rng(6)
        fc = finalize_density(toy_grid, 0.1 + rng.random(GRID_SIZE))
        draws = np.sort(sample(fc, 10 ** 5, rng_seed=11))
        # Forecast CDF evaluated by the same piecewise-linear convention.
        xs = np.concatenate(([0.0], toy_grid.points))
        cs = np.concatenate(([0.0], fc.cdf))
        model_cdf = np.interp(draws, xs, cs)
        empirical = np.arange(1, draws.size + 1) / draws.size
        assert np.max(np.abs(model_cdf - empirical)) < 0.01

    def test_count_validation(self, toy_grid):
        fc = finalize_density(toy_grid, np.ones(GRID_SIZE))
        with pytest.raises(ValueError):
            sample(fc, 0, rng_seed=1)
