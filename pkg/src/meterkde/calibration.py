"""Parameter selection by one-step-ahead CRPS on the cross-validation
range, and category-level pooling of per-meter optima.

The search runs a coarse log-spaced grid over every free parameter,
followed by a bounded simplex refinement from the best grid point; the
refined candidate is kept only if it scores at least as well. Pooled
values are lower medians, so even meter counts stay deterministic.
"""

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import estimators, hwt
from .density import DegenerateDensityError, build_grid
from .estimators import (REQUIRED_X_BANDWIDTHS, MethodParams,
                         NoMatchingObservationsError)
from .evaluation import crps

H_Y_BOUNDS = (0.002, 0.2)
H_X_CIRCULAR_BOUNDS = (0.1, 32.0)
H_X_LAG_BOUNDS = (0.005, 0.5)
LAMBDA_GRID = (0.85, 0.90, 0.925, 0.95, 0.975, 0.99, 1.0)

HWT_FIELDS = ("alpha", "delta", "omega", "phi", "sigma")


class CalibrationError(ValueError):
    pass


def default_search_space():
    """Per-method parameter grids for the coarse search stage.

    h_y uses 12 log-spaced points over its bounds; x-direction grids use
    7 points, coarsened to 5 for the two-bandwidth methods to keep the
    product tractable.
    """
    h_y = np.geomspace(*H_Y_BOUNDS, 12)
    x7 = np.geomspace(*H_X_CIRCULAR_BOUNDS, 7)
    x5 = np.geomspace(*H_X_CIRCULAR_BOUNDS, 5)
    x_lag = np.geomspace(*H_X_LAG_BOUNDS, 7)
    lam = np.asarray(LAMBDA_GRID)
    return {
        "KD-U": {"h_y": h_y},
        "KD-W": {"h_y": h_y, "lam": lam},
        "CKD-W": {"h_y": h_y, "lam": lam, "h_x_week": x7},
        "CKD-WD": {"h_y": h_y, "lam": lam, "h_x_week": x5, "h_x_day": x5},
        "KD-IC": {"h_y": h_y, "lam": lam},
        "CKD-IC": {"h_y": h_y, "lam": lam, "h_x_weekday": x5, "h_x_weekend": x5},
        "CKD-Lag": {"h_y": h_y, "lam": lam, "h_x_lag": x_lag},
    }


_PARAM_BOUNDS = {
    "h_y": H_Y_BOUNDS,
    "h_x_week": H_X_CIRCULAR_BOUNDS,
    "h_x_day": H_X_CIRCULAR_BOUNDS,
    "h_x_weekday": H_X_CIRCULAR_BOUNDS,
    "h_x_weekend": H_X_CIRCULAR_BOUNDS,
    "h_x_lag": H_X_LAG_BOUNDS,
}


@dataclass
class CalibrationPlan:
    estimation_range: tuple
    cv_range: tuple
    search_space: dict = field(default_factory=default_search_space)
    sample_fraction: float = 0.10
    window_weeks: int = estimators.DEFAULT_WINDOW_WEEKS
    cv_stride: int = 1
    refine: bool = True

    def __post_init__(self):
        e_start, e_stop = self.estimation_range
        c_start, c_stop = self.cv_range
        if not (e_start < e_stop <= c_start < c_stop):
            raise ValueError("cv range must be nonempty and follow the "
                             "estimation range")
        if not 0 < self.sample_fraction <= 1.0:
            raise ValueError("sample fraction must lie in (0, 1]")
        if self.cv_stride < 1:
            raise ValueError("cv stride must be at least 1")


def _worst_case_crps(obs):
    # Distance from the observation to the farther support endpoint.
    return max(obs, max(1.0, obs) - obs)


def cv_score(series, method, candidate_params, plan, grid=None, calendar=None,
             stats=None):
    """Mean one-step-ahead CRPS over the cross-validation range.

    Forecasts for each cv step use only observations before it; the grid
    is built from the estimation range alone. Steps where the density
    degenerates are scored with the worst-case bound so the optimizer
    steers away from them.
    """
    if grid is None:
        e_start, e_stop = plan.estimation_range
        grid = build_grid(series.values[e_start:e_stop])
    c_start, c_stop = plan.cv_range
    total = 0.0
    n = 0
    degenerate = 0
    for j in range(c_start, c_stop, plan.cv_stride):
        obs = float(series.values[j])
        try:
            fc = estimators.forecast(series, candidate_params, j - 1, 1, grid,
                                     calendar=calendar)
            total += crps(fc, obs)
        except (DegenerateDensityError, NoMatchingObservationsError):
            total += _worst_case_crps(obs)
            degenerate += 1
        n += 1
    if stats is not None:
        stats["steps"] = n
        stats["degenerate"] = degenerate
    return total / n


def _candidate(method, names, values, window_weeks):
    kwargs = dict(zip(names, values))
    return MethodParams(method=method, window_weeks=window_weeks, **kwargs)


def optimize_params(series, method, plan, grid=None, calendar=None):
    """Grid search then simplex refinement of the free parameters.

    Deterministic given the plan. Raises CalibrationError when every grid
    point degenerates on every cv step (unusable meter).
    """
    if grid is None:
        e_start, e_stop = plan.estimation_range
        grid = build_grid(series.values[e_start:e_stop])
    space = plan.search_space[method]
    names = list(space)
    best_params, best_score = None, np.inf
    any_usable = False
    for values in itertools.product(*(space[k] for k in names)):
        params = _candidate(method, names, (float(v) for v in values),
                            plan.window_weeks)
        stats = {}
        score = cv_score(series, method, params, plan, grid, calendar, stats)
        if stats["degenerate"] < stats["steps"]:
            any_usable = True
        if score < best_score:
            best_params, best_score = params, score
    if not any_usable:
        raise CalibrationError(
            f"meter {series.meter_id}: every {method} grid point degenerated")
    if not plan.refine:
        return best_params

    free = [n for n in names]
    x0 = []
    bounds = []
    for name in free:
        v = getattr(best_params, name)
        if name == "lam":
            x0.append(v)
            bounds.append((min(LAMBDA_GRID), 1.0))
        else:
            x0.append(np.log(v))
            lo, hi = _PARAM_BOUNDS[name]
            bounds.append((np.log(lo), np.log(hi)))

    def objective(x):
        kwargs = {}
        for name, xi in zip(free, x):
            kwargs[name] = float(xi) if name == "lam" else float(np.exp(xi))
        params = _candidate(method, kwargs.keys(), kwargs.values(),
                            plan.window_weeks)
        return cv_score(series, method, params, plan, grid, calendar)

    res = minimize(objective, np.asarray(x0), method="Nelder-Mead",
                   bounds=bounds,
                   options={"maxiter": 40 * len(free), "xatol": 1e-3,
                            "fatol": 1e-7})
    if res.fun < best_score:
        kwargs = {}
        for name, xi in zip(free, res.x):
            kwargs[name] = float(xi) if name == "lam" else float(np.exp(xi))
        best_params = _candidate(method, kwargs.keys(), kwargs.values(),
                                 plan.window_weeks)
    return best_params


def lower_median(values):
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass
class CategoryParams:
    category: str
    params: dict = field(default_factory=dict)      # method -> MethodParams
    hwt_params: object = None
    raw: dict = field(default_factory=dict)         # meter_id -> optima


def pool_category(per_meter_params, category):
    """Elementwise lower-median pooling of per-meter optima.

    ``per_meter_params`` maps meter_id -> {method: MethodParams} and may
    carry an "HWT" entry holding HwtParams. Permutation invariant in the
    meter list; per-meter optima are retained for audit.
    """
    if not per_meter_params:
        raise CalibrationError(f"category {category!r} has no calibrated meters")
    methods = set()
    for optima in per_meter_params.values():
        methods.update(optima)
    pooled = {}
    hwt_pooled = None
    for method in sorted(methods):
        sets = [optima[method] for optima in per_meter_params.values()
                if method in optima]
        if method == "HWT":
            hwt_pooled = hwt.HwtParams(
                **{f: lower_median([getattr(p, f) for p in sets])
                   for f in HWT_FIELDS})
            continue
        template = sets[0]
        kwargs = {"method": method, "window_weeks": template.window_weeks}
        fields = ["h_y", "lam"] + list(REQUIRED_X_BANDWIDTHS[method])
        for name in fields:
            kwargs[name] = lower_median([getattr(p, name) for p in sets])
        pooled[method] = MethodParams(**kwargs)
    return CategoryParams(category=category, params=pooled,
                          hwt_params=hwt_pooled,
                          raw={m: dict(v) for m, v in per_meter_params.items()})


def sample_meters(meter_ids, fraction=0.10):
    """First ceil(fraction * N) meters in stable sorted order."""
    ordered = sorted(meter_ids)
    count = int(np.ceil(fraction * len(ordered)))
    return ordered[:max(count, 1)]


def write_params_csv(path, category_params_list):
    """Persist pooled parameters as category,method,param,value rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "method", "param", "value"])
        for cp in sorted(category_params_list, key=lambda c: c.category):
            for method in sorted(cp.params):
                p = cp.params[method]
                writer.writerow([cp.category, method, "h_y", repr(p.h_y)])
                writer.writerow([cp.category, method, "lam", repr(p.lam)])
                for name in REQUIRED_X_BANDWIDTHS[method]:
                    writer.writerow([cp.category, method, name,
                                     repr(getattr(p, name))])
                writer.writerow([cp.category, method, "window_weeks",
                                 repr(p.window_weeks)])
            if cp.hwt_params is not None:
                for name in HWT_FIELDS:
                    writer.writerow([cp.category, "HWT", name,
                                     repr(getattr(cp.hwt_params, name))])


def read_params_csv(path):
    """Reload pooled parameters; inverse of :func:`write_params_csv`."""
    raw = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            raw.setdefault(row["category"], {}).setdefault(
                row["method"], {})[row["param"]] = float(row["value"])
    out = {}
    for category, methods in raw.items():
        cp = CategoryParams(category=category)
        for method, fields in methods.items():
            if method == "HWT":
                cp.hwt_params = hwt.HwtParams(**fields)
                continue
            fields = dict(fields)
            window = int(fields.pop("window_weeks", estimators.DEFAULT_WINDOW_WEEKS))
            cp.params[method] = MethodParams(method=method, window_weeks=window,
                                             **fields)
        out[category] = cp
    return out
