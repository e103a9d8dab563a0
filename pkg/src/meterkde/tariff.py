"""Time-of-use tariff cost densities and the weekly switching simulation.

Costs are computed in cents from actual kWh, so standardized consumption
is rescaled by the meter's standardization divisor before pricing.

Period rules (all tariffs except where the weekend rule applies):
night 11pm-8am every day; peak 5pm-7pm on weekdays that are not public
holidays; day otherwise. Under the weekend rule, every weekend half-hour
is priced at the night rate.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .density import quantile
from .kernels import PERIODS_PER_WEEK

TARIFF_ORDER = ("A", "B", "C", "D", "weekend", "E")

CRITERIA = ("mean", "q75", "q95")

FLAT_RATE_E = 13.25


@dataclass(frozen=True)
class TariffSchedule:
    name: str
    day_rate: float
    peak_rate: float
    night_rate: float
    weekend_rule: bool = False

    def __post_init__(self):
        if min(self.day_rate, self.peak_rate, self.night_rate) <= 0:
            raise ValueError(f"tariff {self.name}: rates must be positive")

    def rate(self, period):
        return {"day": self.day_rate, "peak": self.peak_rate,
                "night": self.night_rate}[period]


def default_tariffs():
    """The five trial TOU tariffs plus the flat tariff E."""
    return {
        "A": TariffSchedule("A", 14.0, 20.0, 12.0),
        "B": TariffSchedule("B", 13.5, 26.0, 11.0),
        "C": TariffSchedule("C", 13.0, 32.0, 10.0),
        "D": TariffSchedule("D", 12.5, 38.0, 9.0),
        "weekend": TariffSchedule("weekend", 14.0, 38.0, 10.0, weekend_rule=True),
        "E": TariffSchedule("E", FLAT_RATE_E, FLAT_RATE_E, FLAT_RATE_E),
    }


def load_tariffs(path):
    """Tariff catalog CSV: name,day_rate,peak_rate,night_rate,weekend_rule."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out[row["name"]] = TariffSchedule(
                name=row["name"],
                day_rate=float(row["day_rate"]),
                peak_rate=float(row["peak_rate"]),
                night_rate=float(row["night_rate"]),
                weekend_rule=row["weekend_rule"].strip().lower()
                in ("1", "true", "yes"))
    return out


def _holiday_dates(holiday_calendar):
    if holiday_calendar is None:
        return frozenset()
    if hasattr(holiday_calendar, "holiday_dates"):
        return holiday_calendar.holiday_dates
    return holiday_calendar


def classify_period(timestamp, holiday_calendar, tariff):
    """day|peak|night for the half-hour starting at ``timestamp``."""
    weekend = timestamp.weekday() >= 5
    if tariff.weekend_rule and weekend:
        return "night"
    minutes = timestamp.hour * 60 + timestamp.minute
    if minutes >= 23 * 60 or minutes < 8 * 60:
        return "night"
    if 17 * 60 <= minutes < 19 * 60:
        holiday = timestamp.date() in _holiday_dates(holiday_calendar)
        if not weekend and not holiday:
            return "peak"
    return "day"


def week_rates(week_start, holiday_calendar, tariff):
    """Cents-per-kWh rate for each of the 336 slots of one week."""
    from .dataio import HALF_HOUR
    return np.array([
        tariff.rate(classify_period(week_start + HALF_HOUR * i,
                                    holiday_calendar, tariff))
        for i in range(PERIODS_PER_WEEK)])


@dataclass(frozen=True)
class CostDensity:
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.asarray(self.samples, dtype=np.float64))

    @property
    def mean(self):
        return float(np.mean(self.samples))

    @property
    def q75(self):
        return float(np.quantile(self.samples, 0.75))

    @property
    def q95(self):
        return float(np.quantile(self.samples, 0.95))

    def criterion_value(self, criterion):
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}")
        return {"mean": self.mean, "q75": self.q75, "q95": self.q95}[criterion]


def cost_density_period(consumption_density, rate, sample_count, seed,
                        kwh_scale=1.0):
    """Cost density for one half-hour: sampled consumption times the rate."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    draws = consumption_density.sample(sample_count, seed)
    return CostDensity(samples=draws * kwh_scale * rate)


def _weekly_consumption_draws(per_period_densities, sample_count, seed):
    if len(per_period_densities) != PERIODS_PER_WEEK:
        raise ValueError(f"need one density per half-hour of the week "
                         f"({PERIODS_PER_WEEK}), got {len(per_period_densities)}")
    rng = np.random.default_rng(seed)
    draws = np.empty((sample_count, PERIODS_PER_WEEK))
    for i, fc in enumerate(per_period_densities):
        u = np.clip(rng.random(sample_count), 1e-12, 1.0 - 1e-12)
        draws[:, i] = quantile(fc, u)
    return draws


def weekly_cost_density(per_period_densities, tariff, holiday_calendar,
                        sample_count, seed, week_start, kwh_scale=1.0):
    """Distribution of the summed week cost under one tariff.

    Each path draws one consumption value per period independently,
    prices it by the tariff calendar, and sums over the 336 periods.
    """
    draws = _weekly_consumption_draws(per_period_densities, sample_count, seed)
    rates = week_rates(week_start, holiday_calendar, tariff)
    return CostDensity(samples=(draws * kwh_scale) @ rates)


def weekly_cost_densities(per_period_densities, tariffs, holiday_calendar,
                          sample_count, seed, week_start, kwh_scale=1.0):
    """Weekly cost densities for several tariffs from one shared set of
    consumption draws, so tariff comparisons are paired."""
    draws = _weekly_consumption_draws(per_period_densities, sample_count, seed)
    scaled = draws * kwh_scale
    out = {}
    for name, tariff in tariffs.items():
        rates = week_rates(week_start, holiday_calendar, tariff)
        out[name] = CostDensity(samples=scaled @ rates)
    return out


def select_tariff(cost_densities, criterion):
    """Tariff with the lowest criterion value; ties break in the fixed
    order A, B, C, D, weekend, E (then alphabetically for extras)."""
    if len(cost_densities) < 2:
        raise ValueError("need at least two candidate tariffs")
    known = [n for n in TARIFF_ORDER if n in cost_densities]
    extras = sorted(set(cost_densities) - set(TARIFF_ORDER))
    best_name, best_value = None, np.inf
    for name in known + extras:
        value = cost_densities[name].criterion_value(criterion)
        if value < best_value:
            best_name, best_value = name, value
    return best_name


def realized_cost(series, first_slot, rates, kwh_scale=None):
    """Cost in cents of the actual consumption over one week of slots."""
    if kwh_scale is None:
        kwh_scale = series.max_raw if series.max_raw is not None else 1.0
    actual = series.values[first_slot:first_slot + PERIODS_PER_WEEK]
    if len(actual) != PERIODS_PER_WEEK:
        raise ValueError("actual consumption does not cover the full week")
    return float(np.sum(actual * kwh_scale * rates))


@dataclass
class WeekOutcome:
    week: int
    origin: int
    chosen: str
    predicted_cost_mean: float
    realized_cost: float
    allocated_realized_cost: float


@dataclass
class SwitchingRecord:
    meter_id: str
    criterion: str
    allocated: str
    weeks: list = field(default_factory=list)
    skipped_weeks: list = field(default_factory=list)

    @property
    def switching_total(self):
        return sum(w.realized_cost for w in self.weeks)

    @property
    def allocated_total(self):
        return sum(w.allocated_realized_cost for w in self.weeks)

    @property
    def saving(self):
        return self.allocated_total - self.switching_total

    @property
    def outcome(self):
        if self.switching_total < self.allocated_total:
            return "switching-cheaper"
        if self.switching_total > self.allocated_total:
            return "allocated-cheaper"
        return "no-difference"


def switching_simulation(series, forecaster, week_origins, allocated_tariff,
                         criterion, tariffs=None, holiday_calendar=None,
                         sample_count=10000, seed=0, kwh_scale=None):
    """Weekly tariff switching driven by predicted cost densities.

    ``forecaster(origin)`` must return the 336 per-horizon consumption
    densities from that origin. Each week the tariff minimizing the
    criterion on the predicted weekly cost densities is chosen; realized
    costs are then computed from the actual consumption, for both the
    chosen and the allocated tariff. Weeks whose forecasts fail are
    skipped and reported.
    """
    if tariffs is None:
        tariffs = default_tariffs()
    if allocated_tariff not in tariffs:
        raise ValueError(f"allocated tariff {allocated_tariff!r} not in catalog")
    if kwh_scale is None:
        kwh_scale = series.max_raw if series.max_raw is not None else 1.0
    record = SwitchingRecord(meter_id=series.meter_id, criterion=criterion,
                             allocated=allocated_tariff)
    for week_index, origin in enumerate(week_origins):
        week_start = series.timestamp_at(origin + 1)
        try:
            densities = forecaster(origin)
        except Exception as exc:
            record.skipped_weeks.append((week_index, f"{type(exc).__name__}: {exc}"))
            continue
        week_seed = np.random.SeedSequence([seed, week_index])
        costs = weekly_cost_densities(densities, tariffs, holiday_calendar,
                                      sample_count, week_seed, week_start,
                                      kwh_scale)
        chosen = select_tariff(costs, criterion)
        chosen_rates = week_rates(week_start, holiday_calendar, tariffs[chosen])
        alloc_rates = week_rates(week_start, holiday_calendar,
                                 tariffs[allocated_tariff])
        record.weeks.append(WeekOutcome(
            week=week_index,
            origin=origin,
            chosen=chosen,
            predicted_cost_mean=costs[chosen].mean,
            realized_cost=realized_cost(series, origin + 1, chosen_rates,
                                        kwh_scale),
            allocated_realized_cost=realized_cost(series, origin + 1,
                                                  alloc_rates, kwh_scale)))
    return record


def summarize_switching(records):
    """Aggregate outcome percentages and the average saving in cents."""
    if not records:
        raise ValueError("no switching records to summarize")
    outcomes = [r.outcome for r in records]
    n = len(records)
    return {
        "consumers": n,
        "pct_switching_cheaper": 100.0 * outcomes.count("switching-cheaper") / n,
        "pct_allocated_cheaper": 100.0 * outcomes.count("allocated-cheaper") / n,
        "pct_no_difference": 100.0 * outcomes.count("no-difference") / n,
        "average_saving_cents": float(np.mean([r.saving for r in records])),
    }
