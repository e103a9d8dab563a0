#!/usr/bin/env python3
"""Benchmark the compiled core against the pure-numpy fallback.

Times the three hot kernels on realistic workloads (26-week window, the
100-point density grid, a full-series smoothing filter pass) and a full
one-week forecast via the estimator stack under each backend.

Usage: python benchmarks/bench_core.py [--repeat N]
"""

import argparse
import time
from datetime import datetime

import numpy as np

from meterkde import _core
from meterkde.dataio import ConsumptionSeries
from meterkde.density import build_grid
from meterkde.estimators import MethodParams, forecast_week
from meterkde.kernels import PERIODS_PER_WEEK


def make_series(weeks=30, seed=7):
    rng = np.random.default_rng(seed)
    n = weeks * PERIODS_PER_WEEK
    slot = (np.arange(n) % 48)
    profile = 0.15 + 0.5 * np.exp(-((slot - 36) / 6.0) ** 2) \
        + 0.25 * np.exp(-((slot - 16) / 5.0) ** 2)
    values = np.clip(profile * (1 + 0.15 * rng.standard_normal(n)), 0, 1)
    return ConsumptionSeries("bench", values, datetime(2010, 1, 4))


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    series = make_series()
    window = 26 * PERIODS_PER_WEEK
    grid = build_grid(series.values[:window])
    origin = window - 1
    rng = np.random.default_rng(0)

    values = series.values[:window]
    weights = rng.random(window)
    weights /= weights.sum()
    h_grid = np.full(100, 0.03)
    cdf = np.linspace(0.01, 1.0, 100)

    y = series.values
    d_idx = np.ascontiguousarray(series.period_of_day - 1, dtype=np.int64)
    w_idx = np.ascontiguousarray(series.period_of_week - 1, dtype=np.int64)

    workloads = {
        "kde_on_grid (8736 obs x 100 pts)": lambda: _core.kde_on_grid(
            values, weights, grid.points, h_grid),
        "crps_grid (100 pts)": lambda: [
            _core.crps_grid(grid.points, cdf, o) for o in (0.0, 0.3, 0.7, 1.2)],
        "hwt_filter (30 weeks)": lambda: _core.hwt_filter(
            y, d_idx, w_idx, 0.01, 0.02, 0.1, 0.4, 0.3, 0.0,
            np.zeros(48), np.zeros(336), np.empty(len(y))),
        "forecast_week CKD-W": lambda: forecast_week(
            series, MethodParams("CKD-W", h_y=0.03, lam=0.95, h_x_week=1.0),
            origin, grid),
    }

    backends = _core.available_backends()
    if len(backends) < 2:
        print(f"only {backends} available; build the extension to compare")
    results = {}
    for backend in backends:
        _core.set_backend(backend)
        for name, fn in workloads.items():
            results[(backend, name)] = timeit(fn, args.repeat)

    width = max(len(n) for n in workloads)
    header = f"{'workload':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name in workloads:
        row = f"{name:<{width}}  "
        times = [results[(b, name)] for b in backends]
        row += "".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(backends) == 2:
            compiled = results[("compiled", name)]
            numpy_t = results[("numpy", name)]
            row += f"{numpy_t / compiled:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
