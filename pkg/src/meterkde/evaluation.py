"""Scoring of density, quantile, and point forecasts over a rolling-origin
post-sample harness.

Scores are averaged by (method, horizon) across meters and origins, which
is meaningful because every series is standardized to [0, 1].
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _core, estimators, hwt
from .density import DensityForecast, quantile
from .kernels import PERIODS_PER_WEEK

#: Quantile levels evaluated for unconditional coverage.
THETA_GRID = (0.05, 0.15, 0.25, 0.35, 0.45, 0.50, 0.55, 0.65, 0.75, 0.85, 0.95)

_THETA_ARRAY = np.asarray(THETA_GRID)
_MEDIAN_INDEX = THETA_GRID.index(0.50)


def crps(forecast, observation):
    """Continuous ranked probability score of a forecast CDF.

    Accepts a DensityForecast or an (xs, cdf) pair of arrays. The CDF is
    treated as constant 1 beyond its last node, so observations above the
    standardization maximum extend the integration domain.
    """
    if observation < 0:
        raise ValueError("observation must be nonnegative")
    if isinstance(forecast, DensityForecast):
        xs, cdf = forecast.grid.points, forecast.cdf
    else:
        xs, cdf = forecast
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        cdf = np.ascontiguousarray(cdf, dtype=np.float64)
    return float(_core.crps_grid(xs, cdf, float(observation)))


def coverage(quantile_forecasts, observations, theta=None):
    """Percentage of observations strictly below their quantile forecast."""
    q = np.asarray(quantile_forecasts, dtype=np.float64)
    obs = np.asarray(observations, dtype=np.float64)
    if q.size == 0 or q.shape != obs.shape:
        raise ValueError("need equal-length, nonempty forecast and observation arrays")
    return 100.0 * float(np.mean(obs < q))


def point_scores(forecasts, observations):
    """(MAE of density medians, RMSE of density means)."""
    obs = np.asarray(observations, dtype=np.float64)
    if len(forecasts) == 0 or len(forecasts) != obs.size:
        raise ValueError("need equal-length, nonempty forecasts and observations")
    medians = np.array([f.median() for f in forecasts])
    means = np.array([f.mean() for f in forecasts])
    mae = float(np.mean(np.abs(medians - obs)))
    rmse = float(np.sqrt(np.mean((means - obs) ** 2)))
    return mae, rmse


@dataclass
class MeterModel:
    """Everything the harness needs to forecast one meter."""

    series: object
    grid: object
    method_params: dict = field(default_factory=dict)
    hwt_params: object = None
    calendar: object = None


@dataclass
class EvaluationReport:
    methods: list = field(default_factory=list)
    # (method, horizon) -> [crps_sum, abs_err_sum, sq_err_sum, count]
    cells: dict = field(default_factory=dict)
    # (method, horizon, theta) -> [obs_below_count, count]
    coverage_cells: dict = field(default_factory=dict)
    origins: list = field(default_factory=list)
    meter_count: int = 0
    failures: list = field(default_factory=list)

    def add_cell(self, method, horizon, crps_value, median, mean, quantiles, obs):
        acc = self.cells.setdefault((method, horizon), [0.0, 0.0, 0.0, 0])
        acc[0] += crps_value
        acc[1] += abs(median - obs)
        acc[2] += (mean - obs) ** 2
        acc[3] += 1
        for theta, q in zip(THETA_GRID, quantiles):
            cov = self.coverage_cells.setdefault((method, horizon, theta), [0, 0])
            cov[0] += 1 if obs < q else 0
            cov[1] += 1

    def merge(self, other):
        for key, acc in other.cells.items():
            mine = self.cells.setdefault(key, [0.0, 0.0, 0.0, 0])
            for i in range(4):
                mine[i] += acc[i]
        for key, acc in other.coverage_cells.items():
            mine = self.coverage_cells.setdefault(key, [0, 0])
            mine[0] += acc[0]
            mine[1] += acc[1]
        for m in other.methods:
            if m not in self.methods:
                self.methods.append(m)
        self.origins = sorted(set(self.origins) | set(other.origins))
        self.meter_count += other.meter_count
        self.failures.extend(other.failures)
        return self

    def scores_by_horizon(self):
        """{(method, horizon): (mean_crps, mae, rmse, count)} finalized."""
        out = {}
        for (method, horizon), (cs, ae, se, n) in sorted(self.cells.items()):
            out[(method, horizon)] = (cs / n, ae / n, np.sqrt(se / n), n)
        return out

    def coverage_by_horizon(self):
        """{(method, horizon, theta): coverage_pct} finalized."""
        return {key: 100.0 * below / n
                for key, (below, n) in sorted(self.coverage_cells.items())}

    def mean_crps(self, method):
        total = sum(acc[0] for (m, _), acc in self.cells.items() if m == method)
        count = sum(acc[3] for (m, _), acc in self.cells.items() if m == method)
        if count == 0:
            raise ValueError(f"no scored cells for method {method!r}")
        return total / count


def midnight_origins(series, post_sample_range):
    """Origins whose horizon-1 target is a midnight slot inside the range."""
    p_start, p_end = post_sample_range
    return [t - 1 for t in range(p_start, p_end)
            if series.labels_at(t)[1] == 1]


def _method_forecasts(meter, method, origin, horizons, hwt_iterations, seed):
    if method == "HWT":
        if meter.hwt_params is None:
            raise ValueError("HWT requested but no fitted parameters supplied")
        state = hwt.state_at(meter.series, meter.hwt_params, origin)
        return hwt.hwt_density(state, meter.hwt_params, horizons,
                               hwt_iterations, seed, meter.grid, origin=origin)
    return estimators.forecast_horizons(meter.series,
                                        meter.method_params[method], origin,
                                        horizons, meter.grid,
                                        calendar=meter.calendar)


def rolling_evaluate(meters, methods, post_sample_range, max_horizon=PERIODS_PER_WEEK,
                     hwt_iterations=10000, seed=0):
    """Score every method at every midnight origin in the post-sample range.

    Horizons run from 1 up to ``max_horizon`` half-hours, truncated where
    the range ends. Per-meter failures are isolated and reported in the
    result rather than raised.
    """
    report = EvaluationReport(methods=list(methods))
    p_start, p_end = post_sample_range
    for meter_index, meter in enumerate(meters):
        series = meter.series
        try:
            origins = midnight_origins(series, post_sample_range)
            for origin in origins:
                n_h = min(max_horizon, p_end - 1 - origin)
                if n_h < 1:
                    continue
                horizons = range(1, n_h + 1)
                for method in methods:
                    forecasts = _method_forecasts(
                        meter, method, origin, horizons, hwt_iterations,
                        np.random.SeedSequence([seed, meter_index, origin]))
                    for h, fc in zip(horizons, forecasts):
                        obs = float(series.values[origin + h])
                        qs = quantile(fc, _THETA_ARRAY)
                        report.add_cell(method, h, crps(fc, obs),
                                        qs[_MEDIAN_INDEX], fc.mean(), qs, obs)
            report.origins = sorted(set(report.origins) | set(origins))
            report.meter_count += 1
        except Exception as exc:  # per-meter isolation
            report.failures.append((series.meter_id, f"{type(exc).__name__}: {exc}"))
    return report


def write_scores_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "horizon", "crps", "mae", "rmse"])
        for (method, horizon), (c, mae, rmse, _) in report.scores_by_horizon().items():
            writer.writerow([method, horizon, repr(c), repr(mae), repr(float(rmse))])


def write_coverage_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "horizon", "theta", "coverage_pct"])
        for (method, horizon, theta), pct in report.coverage_by_horizon().items():
            writer.writerow([method, horizon, round(theta * 100), repr(pct)])
