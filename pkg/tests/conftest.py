"""Shared fixtures: synthetic meter series with known structure."""

from datetime import datetime

import numpy as np
import pytest

from meterkde.dataio import ConsumptionSeries
from meterkde.density import build_grid
from meterkde.kernels import PERIODS_PER_DAY, PERIODS_PER_WEEK

#: A Monday, so period-of-week 1 lines up with index 0.
MONDAY = datetime(2010, 1, 4, 0, 0)


def weekly_profile():
    """Fixed weekly consumption shape in (0, 0.9]: morning and evening
    peaks on weekdays, a flatter and lower weekend pattern."""
    w = np.arange(PERIODS_PER_WEEK)
    day = w // PERIODS_PER_DAY
    slot = w % PERIODS_PER_DAY
    base = (0.12
            + 0.45 * np.exp(-((slot - 37) / 5.0) ** 2)
            + 0.28 * np.exp(-((slot - 16) / 4.0) ** 2))
    weekend = 0.10 + 0.30 * np.exp(-((slot - 26) / 9.0) ** 2)
    return np.where(day >= 5, weekend, base)


def make_series(values, meter_id="m1", start=MONDAY, max_raw=None):
    return ConsumptionSeries(meter_id=meter_id, values=np.asarray(values, float),
                             start=start, max_raw=max_raw)


def synthetic_meter(weeks, seed=0, noise=0.15, meter_id="m1", profile=None):
    """Weekly-periodic series with heteroskedastic multiplicative noise,
    clipped to [0, 1]."""
    rng = np.random.default_rng(seed)
    if profile is None:
        profile = weekly_profile()
    n = weeks * PERIODS_PER_WEEK
    tiled = np.tile(profile, weeks)
    values = tiled * (1.0 + noise * rng.standard_normal(n))
    return make_series(np.clip(values, 0.0, 1.0), meter_id=meter_id, max_raw=1.0)


def periodic_meter(weeks, profile=None, meter_id="m1"):
    """Exactly weekly-periodic series (no noise)."""
    if profile is None:
        profile = weekly_profile()
    return make_series(np.tile(profile, weeks), meter_id=meter_id, max_raw=1.0)


@pytest.fixture
def toy_grid():
    """Uniform 100-point grid (p90 = 0.9, so both segments have 0.01 steps)."""
    return build_grid(np.linspace(0.0, 1.0, 11))


@pytest.fixture
def seasonal_series():
    return synthetic_meter(weeks=30, seed=42)
