"""Agreement between the compiled extension and the numpy fallback."""

import numpy as np
import pytest

from meterkde import _core

BACKENDS = _core.available_backends()
requires_both = pytest.mark.skipif(len(BACKENDS) < 2,
                                   reason="compiled extension not built")


@pytest.fixture
def restore_backend():
    name = _core.backend_name()
    yield
    _core.set_backend(name)


def run_on(backend, fn, *args):
    _core.set_backend(backend)
    return fn(*args)


@requires_both
class TestBackendAgreement:
    def test_kde_on_grid(self, restore_backend):
        rng = np.random.default_rng(0)
        for n in (1, 26, 500, 5000):
            values = rng.random(n)
            weights = rng.random(n)
            weights /= weights.sum()
            grid = np.linspace(0.005, 1.0, 100)
            h_grid = np.clip(rng.random(100) * 0.1, 1e-3, None)
            results = [run_on(b, _core.kde_on_grid, values, weights, grid, h_grid)
                       for b in BACKENDS]
            np.testing.assert_allclose(results[0], results[1],
                                       rtol=1e-12, atol=1e-300)

    def test_crps_grid(self, restore_backend):
        rng = np.random.default_rng(1)
        grid = np.linspace(0.01, 1.0, 100)
        for _ in range(30):
            raw = np.sort(rng.random(100))
            cdf = raw / raw[-1]
            obs = float(rng.random() * 1.3)
            results = [run_on(b, _core.crps_grid, grid, cdf, obs)
                       for b in BACKENDS]
            assert results[0] == pytest.approx(results[1], rel=1e-12)

    def test_hwt_filter(self, restore_backend):
        rng = np.random.default_rng(2)
        n = 3 * 336
        y = rng.random(n)
        d_idx = np.ascontiguousarray(np.arange(n) % 48, dtype=np.int64)
        w_idx = np.ascontiguousarray(np.arange(n) % 336, dtype=np.int64)
        outs = []
        for b in BACKENDS:
            intraday = np.zeros(48)
            intraweek = np.zeros(336)
            err = np.empty(n)
            state = run_on(b, _core.hwt_filter, y, d_idx, w_idx,
                           0.05, 0.1, 0.2, 0.4, 0.3, 0.0,
                           intraday, intraweek, err)
            outs.append((state, intraday, intraweek, err.copy()))
        (lvl_a, le_a), id_a, iw_a, err_a = outs[0]
        (lvl_b, le_b), id_b, iw_b, err_b = outs[1]
        assert lvl_a == pytest.approx(lvl_b, rel=1e-12)
        assert le_a == pytest.approx(le_b, rel=1e-12)
        np.testing.assert_allclose(id_a, id_b, rtol=1e-12)
        np.testing.assert_allclose(iw_a, iw_b, rtol=1e-12)
        np.testing.assert_allclose(err_a, err_b, rtol=1e-10, atol=1e-14)

    def test_forecast_identical_under_both_backends(self, restore_backend):
        from meterkde.density import build_grid
        from meterkde.estimators import MethodParams, forecast

        from conftest import synthetic_meter

        series = synthetic_meter(weeks=3, seed=3)
        grid = build_grid(series.values[:2 * 336])
        params = MethodParams("CKD-W", h_y=0.03, lam=0.9, h_x_week=1.0,
                              window_weeks=2)
        results = [run_on(b, forecast, series, params, 2 * 336 - 1, 7, grid)
                   for b in BACKENDS]
        np.testing.assert_allclose(results[0].density, results[1].density,
                                   rtol=1e-12)
        np.testing.assert_allclose(results[0].cdf, results[1].cdf, rtol=1e-12)


def test_backend_name_reported():
    assert _core.backend_name() in BACKENDS


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _core.set_backend("fortran")
