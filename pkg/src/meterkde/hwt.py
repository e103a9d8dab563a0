"""Double-seasonal exponential smoothing benchmark.

Additive error-correction form with an intraday cycle (48 periods) nested
inside an intraweek cycle (336 periods) and a first-order adjustment for
residual autocorrelation. Parameters are fitted by minimizing the sum of
squared one-step errors (Gaussian likelihood with constant variance);
density forecasts come from Monte Carlo simulation of the recursion.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _core
from .density import finalize_density
from .kernels import PERIODS_PER_DAY, PERIODS_PER_WEEK

logger = logging.getLogger(__name__)

WARMUP_WEEKS = 8
INIT_WEEKS = 2

#: Bounds for (alpha, delta, omega, phi) during fitting.
PARAM_BOUNDS = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (-0.99, 0.99))

#: Dispersed simplex starting points for (alpha, delta, omega, phi).
FIT_STARTS = (
    (0.01, 0.02, 0.10, 0.4),
    (0.05, 0.05, 0.05, 0.1),
    (0.10, 0.01, 0.20, 0.6),
    (0.01, 0.10, 0.30, 0.0),
    (0.20, 0.20, 0.15, 0.3),
    (0.002, 0.005, 0.02, 0.8),
    (0.30, 0.02, 0.05, -0.2),
    (0.02, 0.30, 0.40, 0.5),
)


@dataclass(frozen=True)
class HwtParams:
    alpha: float       # level smoothing
    delta: float       # intraday seasonal smoothing
    omega: float       # intraweek seasonal smoothing
    phi: float         # residual autocorrelation adjustment
    sigma: float = 0.0  # one-step residual standard deviation

    def __post_init__(self):
        for name in ("alpha", "delta", "omega"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not abs(self.phi) < 1.0:
            raise ValueError(f"phi must satisfy |phi| < 1, got {self.phi}")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")


@dataclass
class HwtState:
    """Smoothing state: level, latest seasonal term per period slot, last
    one-step error, and the period-of-week label of the next observation."""

    level: float
    intraday: np.ndarray
    intraweek: np.ndarray
    last_error: float = 0.0
    next_w: int = 1

    def __post_init__(self):
        self.intraday = np.asarray(self.intraday, dtype=np.float64)
        self.intraweek = np.asarray(self.intraweek, dtype=np.float64)
        if self.intraday.shape != (PERIODS_PER_DAY,):
            raise ValueError(f"intraday array must have {PERIODS_PER_DAY} terms")
        if self.intraweek.shape != (PERIODS_PER_WEEK,):
            raise ValueError(f"intraweek array must have {PERIODS_PER_WEEK} terms")

    def copy(self):
        return HwtState(level=self.level, intraday=self.intraday.copy(),
                        intraweek=self.intraweek.copy(),
                        last_error=self.last_error, next_w=self.next_w)


def initial_state(series, start=0):
    """Seed the state from the first two weeks at/after ``start``.

    Level is the two-week mean; intraday terms are mean deviations by
    period of day; intraweek terms absorb what remains by period of week.
    """
    n0 = INIT_WEEKS * PERIODS_PER_WEEK
    if len(series) < start + n0:
        raise ValueError(f"need at least {INIT_WEEKS} weeks to initialize")
    y = series.values[start:start + n0]
    d_labels = series.period_of_day[start:start + n0]
    w_labels = series.period_of_week[start:start + n0]
    level = float(np.mean(y))
    intraday = np.zeros(PERIODS_PER_DAY)
    for d in range(1, PERIODS_PER_DAY + 1):
        intraday[d - 1] = np.mean(y[d_labels == d]) - level
    intraweek = np.zeros(PERIODS_PER_WEEK)
    residual = y - level - intraday[d_labels - 1]
    for w in range(1, PERIODS_PER_WEEK + 1):
        intraweek[w - 1] = np.mean(residual[w_labels == w])
    return HwtState(level=level, intraday=intraday, intraweek=intraweek,
                    last_error=0.0, next_w=int(series.labels_at(start)[0]))


def one_step_prediction(state, params):
    d = (state.next_w - 1) % PERIODS_PER_DAY
    return (state.level + state.intraday[d] + state.intraweek[state.next_w - 1]
            + params.phi * state.last_error)


def hwt_update(state, params, observation):
    """Absorb one observation; returns (state, one_step_error).

    The state is advanced in place: the error corrects the level and the
    two seasonal terms for the observation's period slots.
    """
    w = state.next_w
    d = (w - 1) % PERIODS_PER_DAY
    e = observation - one_step_prediction(state, params)
    state.level += params.alpha * e
    state.intraday[d] += params.delta * e
    state.intraweek[w - 1] += params.omega * e
    state.last_error = e
    state.next_w = w % PERIODS_PER_WEEK + 1
    return state, e


def hwt_filter(series, params, state, start, stop):
    """Run the recursion over series indices [start, stop); returns the
    one-step errors. The state must be positioned at ``start``."""
    expected_w = series.labels_at(start)[0]
    if state.next_w != expected_w:
        raise ValueError(f"state is positioned at period {state.next_w}, "
                         f"series index {start} has period {expected_w}")
    y = np.ascontiguousarray(series.values[start:stop])
    d_idx = np.ascontiguousarray(series.period_of_day[start:stop] - 1, dtype=np.int64)
    w_idx = np.ascontiguousarray(series.period_of_week[start:stop] - 1, dtype=np.int64)
    errors = np.empty(stop - start)
    state.level, state.last_error = _core.hwt_filter(
        y, d_idx, w_idx, params.alpha, params.delta, params.omega, params.phi,
        state.level, state.last_error, state.intraday, state.intraweek, errors)
    state.next_w = series.labels_at(stop)[0]
    return errors


def point_forecast(state, params, horizons):
    """Point forecasts level + seasonal terms + phi^k * last_error, with
    the seasonal indices wrapped cyclically from the state position."""
    horizons = np.asarray(horizons, dtype=np.int64)
    w = (state.next_w - 1 + horizons - 1) % PERIODS_PER_WEEK
    d = w % PERIODS_PER_DAY
    return (state.level + state.intraday[d] + state.intraweek[w]
            + params.phi ** horizons * state.last_error)


def hwt_fit(series, fit_range=None, warmup_weeks=WARMUP_WEEKS, starts=FIT_STARTS):
    """Fit smoothing parameters by minimizing squared one-step errors.

    The first ``warmup_weeks`` of the fit range are excluded from the
    objective. Runs a bounded simplex search from each dispersed starting
    point and keeps the best; non-converged runs still contribute their
    best point found.
    """
    start, stop = fit_range if fit_range is not None else (0, len(series))
    warmup = warmup_weeks * PERIODS_PER_WEEK
    if stop - start <= warmup:
        raise ValueError("fit range must extend beyond the warm-up")
    base_state = initial_state(series, start)

    def sse(theta):
        alpha, delta, omega, phi = theta
        if not (0 <= alpha <= 1 and 0 <= delta <= 1 and 0 <= omega <= 1
                and abs(phi) < 1):
            return np.inf
        params = HwtParams(alpha=alpha, delta=delta, omega=omega, phi=phi)
        errors = hwt_filter(series, params, base_state.copy(), start, stop)
        return float(np.sum(errors[warmup:] ** 2))

    best_theta, best_sse = None, np.inf
    for x0 in starts:
        res = minimize(sse, np.asarray(x0), method="Nelder-Mead",
                       bounds=PARAM_BOUNDS,
                       options={"maxiter": 400, "xatol": 1e-5, "fatol": 1e-12})
        if res.fun < best_sse:
            best_theta, best_sse = res.x, res.fun
        if not res.success:
            logger.debug("HWT fit from %s did not converge (best SSE %.3g)",
                         x0, res.fun)
    alpha, delta, omega, phi = best_theta
    params = HwtParams(alpha=float(alpha), delta=float(delta),
                       omega=float(omega), phi=float(phi))
    errors = hwt_filter(series, params, base_state.copy(), start, stop)
    sigma = float(np.sqrt(np.mean(errors[warmup:] ** 2)))
    return HwtParams(alpha=params.alpha, delta=params.delta, omega=params.omega,
                     phi=params.phi, sigma=sigma)


def state_at(series, params, index, start=0):
    """State after absorbing observations up to and including ``index``."""
    state = initial_state(series, start)
    hwt_filter(series, params, state, start, index + 1)
    return state


#: Simulated consumption is clamped to this range before gridding; draws
#: above 1 land in the top grid cell.
SIM_CLAMP = (0.0, 1.5)


def hwt_density(state, params, horizons, iterations, rng_seed, grid,
                origin=-1, clamp_stats=None):
    """Density forecasts from Monte Carlo simulation of the recursion.

    Simulates ``iterations`` future paths with iid Gaussian(0, sigma^2)
    innovations and projects each horizon's empirical distribution onto
    the grid. Negative draws are clamped to zero; pass a dict as
    ``clamp_stats`` to collect the count.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    horizons = list(horizons)
    max_h = max(horizons)
    rng = np.random.default_rng(rng_seed)
    eps = rng.normal(0.0, params.sigma, size=(iterations, max_h))

    level = np.full(iterations, state.level)
    last_e = np.full(iterations, state.last_error)
    intraday = np.tile(state.intraday, (iterations, 1))
    intraweek = np.tile(state.intraweek, (iterations, 1))
    sims = np.empty((iterations, max_h))
    w = state.next_w - 1
    for k in range(max_h):
        d = w % PERIODS_PER_DAY
        pred = level + intraday[:, d] + intraweek[:, w] + params.phi * last_e
        sims[:, k] = pred + eps[:, k]
        level += params.alpha * eps[:, k]
        intraday[:, d] += params.delta * eps[:, k]
        intraweek[:, w] += params.omega * eps[:, k]
        last_e = eps[:, k]
        w = (w + 1) % PERIODS_PER_WEEK

    if clamp_stats is not None:
        clamp_stats["negative_draws"] = (clamp_stats.get("negative_draws", 0)
                                         + int((sims < 0).sum()))
    np.clip(sims, SIM_CLAMP[0], SIM_CLAMP[1], out=sims)

    points = grid.points
    widths = np.diff(np.concatenate(([0.0], points)))
    forecasts = []
    for h in horizons:
        vals = sims[:, h - 1]
        cells = np.searchsorted(points, vals, side="left")
        np.clip(cells, 0, len(points) - 1, out=cells)
        counts = np.bincount(cells, minlength=len(points)).astype(np.float64)
        raw = counts / (iterations * widths)
        forecasts.append(finalize_density(grid, raw, origin=origin, horizon=h))
    return forecasts
