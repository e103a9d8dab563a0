"""The seven kernel density forecasting methods.

Every method reduces to the same weighted kernel density core: compute one
nonnegative weight per window observation, then estimate the consumption
density as the weight-normalized sum of boundary-corrected Gaussian bumps.
The methods differ only in how the weights encode seasonality:

- KD-U: uniform over the moving window (no seasonality).
- KD-W: only observations on the target period of week, decay-weighted.
- CKD-W: circular-kernel weighting by period-of-week distance.
- CKD-WD: as CKD-W times a period-of-day kernel.
- KD-IC: same period of day on days of the same type (weekday/weekend).
- CKD-IC: day-type match times a period-of-day kernel, with a separate
  bandwidth per day type.
- CKD-Lag: kernel weighting by closeness of each observation's week-lagged
  consumption to the conditioning value (last week's observation for the
  target period).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _core
from .density import DensityForecast, finalize_density
from .kernels import (INV_SQRT_2PI, PERIODS_PER_DAY, PERIODS_PER_WEEK,
                      TRUNCATION, BandwidthPolicy, boundary_bandwidths)

METHODS = ("KD-U", "KD-W", "CKD-W", "CKD-WD", "KD-IC", "CKD-IC", "CKD-Lag")

#: x-direction bandwidths each method requires (exactly these, no others).
REQUIRED_X_BANDWIDTHS = {
    "KD-U": (),
    "KD-W": (),
    "CKD-W": ("h_x_week",),
    "CKD-WD": ("h_x_week", "h_x_day"),
    "KD-IC": (),
    "CKD-IC": ("h_x_weekday", "h_x_weekend"),
    "CKD-Lag": ("h_x_lag",),
}

X_BANDWIDTH_FIELDS = ("h_x_week", "h_x_day", "h_x_weekday", "h_x_weekend", "h_x_lag")

#: Weights smaller than this after normalization are dropped for speed.
WEIGHT_FLOOR = 1e-12

DEFAULT_WINDOW_WEEKS = 26

DEFAULT_POLICY_EPSILON = 0.001


class InsufficientHistoryError(ValueError):
    pass


class NoMatchingObservationsError(ValueError):
    pass


@dataclass(frozen=True)
class MethodParams:
    method: str
    h_y: float
    lam: float = 1.0
    h_x_week: float | None = None
    h_x_day: float | None = None
    h_x_weekday: float | None = None
    h_x_weekend: float | None = None
    h_x_lag: float | None = None
    window_weeks: int = DEFAULT_WINDOW_WEEKS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.h_y <= 0:
            raise ValueError("h_y must be positive")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("decay factor must lie in (0, 1]")
        if self.window_weeks < 1:
            raise ValueError("window must cover at least one week")
        required = REQUIRED_X_BANDWIDTHS[self.method]
        for name in X_BANDWIDTH_FIELDS:
            value = getattr(self, name)
            if name in required:
                if value is None or value <= 0:
                    raise ValueError(f"{self.method} requires positive {name}")
            elif value is not None:
                raise ValueError(f"{self.method} does not take {name}")

    def with_values(self, **kwargs):
        return replace(self, **kwargs)


def target_labels(series, target_index, calendar=None):
    """Conditioning labels for the forecast target.

    A post-sample holiday resolved as "sunday" is conditioned as if it
    were the Sunday of the same time of day; one resolved as
    "working-day" keeps its own labels. In-sample holidays were smoothed
    in place and need no remapping.
    """
    w, d, weekend = series.labels_at(target_index)
    if calendar is not None:
        res = calendar.resolution_for(series.timestamp_at(target_index).date())
        if res == "sunday":
            w = 6 * PERIODS_PER_DAY + d
            weekend = True
        elif res in ("auto", "unresolved"):
            raise ValueError(
                "holiday on the forecast target date has no resolution; "
                "run resolve_post_sample_holiday first")
    return w, d, weekend


def _window_start(params, origin):
    length = PERIODS_PER_WEEK * params.window_weeks
    start = origin - length + 1
    if start < 0:
        raise InsufficientHistoryError(
            f"window of {params.window_weeks} weeks needs {length} observations, "
            f"origin {origin} has {origin + 1}")
    return start


def _gauss(dist, h):
    # Truncated scaled Gaussian, no argument validation (hot path). Both
    # where-branches are evaluated, so extreme bandwidths can overflow in
    # the branch that is then discarded; silence that locally.
    z = dist / h
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(np.abs(z) <= TRUNCATION,
                        np.exp(-0.5 * z * z) * (INV_SQRT_2PI / h), 0.0)


class _OriginContext:
    """Window slices and per-origin precomputations shared by all horizons
    forecast from one origin."""

    def __init__(self, series, params, origin, grid=None, policy=None,
                 calendar=None):
        self.series = series
        self.params = params
        self.origin = origin
        self.grid = grid
        self.calendar = calendar
        self.m = _window_start(params, origin)
        window = slice(self.m, origin + 1)
        self.values = series.values[window]
        self.w_labels = series.period_of_week[window]
        self.d_labels = series.period_of_day[window]
        self.weekend = series.is_weekend[window]
        ages = (origin - np.arange(self.m, origin + 1)) // PERIODS_PER_WEEK
        self.decay = np.power(params.lam, ages.astype(np.float64))
        if grid is not None:
            eps = policy.epsilon if policy is not None else DEFAULT_POLICY_EPSILON
            self.h_grid = boundary_bandwidths(
                grid.points, BandwidthPolicy(h1=params.h_y, epsilon=eps))
        if params.method == "CKD-Lag":
            # Week-lagged value per window observation; NaN where unobserved.
            self.lag_values = np.full(origin + 1 - self.m, np.nan)
            first_with_lag = max(self.m, PERIODS_PER_WEEK)
            self.lag_values[first_with_lag - self.m:] = \
                series.values[first_with_lag - PERIODS_PER_WEEK:
                              origin + 1 - PERIODS_PER_WEEK]

    def raw_weights(self, horizon):
        """Unnormalized per-observation weights for one horizon."""
        params = self.params
        method = params.method
        target = self.origin + horizon
        w_tgt, d_tgt, weekend_tgt = target_labels(self.series, target,
                                                  self.calendar)
        if method == "KD-U":
            return np.ones_like(self.values)
        if method == "KD-W":
            mask = self.w_labels == w_tgt
            if not mask.any():
                raise NoMatchingObservationsError(
                    f"no window observations on period {w_tgt}")
            return self.decay * mask
        if method == "CKD-W":
            by_period = _gauss(_circ_all(w_tgt, PERIODS_PER_WEEK), params.h_x_week)
            return self.decay * by_period[self.w_labels - 1]
        if method == "CKD-WD":
            by_week = _gauss(_circ_all(w_tgt, PERIODS_PER_WEEK), params.h_x_week)
            by_day = _gauss(_circ_all(d_tgt, PERIODS_PER_DAY), params.h_x_day)
            return (self.decay * by_week[self.w_labels - 1]
                    * by_day[self.d_labels - 1])
        if method == "KD-IC":
            mask = (self.d_labels == d_tgt) & (self.weekend == weekend_tgt)
            if not mask.any():
                raise NoMatchingObservationsError(
                    f"no window observations on period-of-day {d_tgt} "
                    f"with matching day type")
            return self.decay * mask
        if method == "CKD-IC":
            h_x = params.h_x_weekend if weekend_tgt else params.h_x_weekday
            by_day = _gauss(_circ_all(d_tgt, PERIODS_PER_DAY), h_x)
            return (self.decay * (self.weekend == weekend_tgt)
                    * by_day[self.d_labels - 1])
        if method == "CKD-Lag":
            if horizon > PERIODS_PER_WEEK:
                raise ValueError("CKD-Lag supports horizons up to one week only")
            cond_index = target - PERIODS_PER_WEEK
            if cond_index < 0:
                raise InsufficientHistoryError(
                    "conditioning lag predates the series")
            x = self.series.values[cond_index]
            weights = np.zeros_like(self.values)
            has_lag = ~np.isnan(self.lag_values)
            weights[has_lag] = _gauss(self.lag_values[has_lag] - x,
                                      params.h_x_lag)
            return self.decay * weights
        raise ValueError(f"unknown method {method!r}")

    def forecast(self, horizon):
        weights = self.raw_weights(horizon)
        total = weights.sum()
        if total <= 0.0:
            raise NoMatchingObservationsError("all weights are zero")
        norm = weights / total
        keep = norm > WEIGHT_FLOOR
        raw = _core.kde_on_grid(np.ascontiguousarray(self.values[keep]),
                                np.ascontiguousarray(norm[keep]),
                                self.grid.points, self.h_grid)
        return finalize_density(self.grid, raw, origin=self.origin,
                                horizon=horizon)


def _circ_all(target, cycle):
    # Circular distance from every period 1..cycle to the target period.
    d = np.abs(np.arange(1, cycle + 1) - target)
    return np.minimum(d, cycle - d)


def method_weights(series, params, origin, horizon, calendar=None):
    """Per-observation weights over the moving window for one forecast.

    Returns (window_start, weights) where weights align with
    series.values[window_start : origin + 1]. Weights are raw
    (unnormalized); zero entries mark non-contributing observations.
    """
    ctx = _OriginContext(series, params, origin, calendar=calendar)
    return ctx.m, ctx.raw_weights(horizon)


def weighted_kd(values, weights, grid, h_y, policy=None, origin=-1, horizon=0):
    """Weighted kernel density estimate on the grid, boundary corrected.

    Weights are normalized to sum to 1, entries below WEIGHT_FLOOR are
    dropped, and the per-grid-point bandwidth follows the boundary rule
    with default bandwidth ``h_y``.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape:
        raise ValueError("values and weights must have equal length")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    total = weights.sum()
    if total <= 0.0:
        raise NoMatchingObservationsError("all weights are zero")
    norm = weights / total
    keep = norm > WEIGHT_FLOOR
    eps = policy.epsilon if policy is not None else DEFAULT_POLICY_EPSILON
    h_grid = boundary_bandwidths(grid.points, BandwidthPolicy(h1=h_y, epsilon=eps))
    raw = _core.kde_on_grid(np.ascontiguousarray(values[keep]),
                            np.ascontiguousarray(norm[keep]),
                            grid.points, h_grid)
    return finalize_density(grid, raw, origin=origin, horizon=horizon)


def forecast(series, params, origin, horizon, grid, policy=None, calendar=None):
    """Density forecast for one (origin, horizon) pair."""
    ctx = _OriginContext(series, params, origin, grid, policy, calendar)
    return ctx.forecast(horizon)


def kd_u(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="KD-U"), origin, horizon,
                    grid, policy, calendar)


def kd_w(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="KD-W"), origin, horizon,
                    grid, policy, calendar)


def ckd_w(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="CKD-W"), origin, horizon,
                    grid, policy, calendar)


def ckd_wd(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="CKD-WD"), origin, horizon,
                    grid, policy, calendar)


def kd_ic(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="KD-IC"), origin, horizon,
                    grid, policy, calendar)


def ckd_ic(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="CKD-IC"), origin, horizon,
                    grid, policy, calendar)


def ckd_lag(series, params, origin, horizon, grid, policy=None, calendar=None):
    return forecast(series, params.with_values(method="CKD-Lag"), origin, horizon,
                    grid, policy, calendar)


def forecast_horizons(series, params, origin, horizons, grid, policy=None,
                      calendar=None):
    """Density forecasts for several horizons from one origin, sharing the
    per-origin window preparation.

    KD-U is horizon-independent, so its density is computed once and
    reused across all horizons.
    """
    ctx = _OriginContext(series, params, origin, grid, policy, calendar)
    if params.method == "KD-U":
        base = ctx.forecast(1)
        return [DensityForecast(grid=base.grid, density=base.density,
                                cdf=base.cdf, origin=origin, horizon=h)
                for h in horizons]
    return [ctx.forecast(h) for h in horizons]


def forecast_week(series, params, origin, grid, policy=None, calendar=None):
    """Density forecasts for horizons 1..336 from one origin."""
    return forecast_horizons(series, params, origin,
                             range(1, PERIODS_PER_WEEK + 1), grid, policy,
                             calendar)
