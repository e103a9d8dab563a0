"""Probabilistic forecasting of half-hourly metered electricity consumption.

Decay-weighted kernel and conditional-kernel density estimators with a
double-seasonal exponential smoothing benchmark, CRPS-based parameter
selection, rolling-origin evaluation, and time-of-use tariff cost
simulation.
"""

from ._core import available_backends, backend_name, set_backend
from .density import DensityForecast, DensityGrid, build_grid, finalize_density
from .estimators import METHODS, MethodParams, forecast, forecast_week
from .evaluation import coverage, crps, point_scores, rolling_evaluate
from .hwt import HwtParams, HwtState, hwt_density, hwt_fit, hwt_update
from .kernels import (BandwidthPolicy, boundary_bandwidth, circular_distance,
                      decay_weight, gaussian_kernel)
from .tariff import TariffSchedule, classify_period, select_tariff

__version__ = "0.1.0"

__all__ = [
    "available_backends", "backend_name", "set_backend",
    "DensityForecast", "DensityGrid", "build_grid", "finalize_density",
    "METHODS", "MethodParams", "forecast", "forecast_week",
    "coverage", "crps", "point_scores", "rolling_evaluate",
    "HwtParams", "HwtState", "hwt_density", "hwt_fit", "hwt_update",
    "BandwidthPolicy", "boundary_bandwidth", "circular_distance",
    "decay_weight", "gaussian_kernel",
    "TariffSchedule", "classify_period", "select_tariff",
    "__version__",
]
