"""Ingestion and preprocessing of half-hourly meter readings.

Readings arrive as CSV rows (meter_id, timestamp, kwh), one value per
half-hour. Meters with gaps or duplicate timestamps are rejected rather
than imputed. Consumption is standardized by the in-sample maximum, and
public holidays inside the estimation sample are smoothed by substituting
the most recent normal day of the same weekday.

Week convention: period 1 is Monday 00:00-00:30 everywhere (labels,
tariff calendars, seasonal indices).
"""

import csv
import warnings
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from functools import cached_property

import numpy as np

from .kernels import PERIODS_PER_DAY, PERIODS_PER_WEEK

HALF_HOUR = timedelta(minutes=30)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"


class MeterDataError(ValueError):
    pass


class UnusableMeterError(MeterDataError):
    pass


@dataclass(frozen=True)
class RawReading:
    meter_id: str
    timestamp: datetime
    consumption: float


def parse_timestamp(text):
    ts = datetime.strptime(text, TIMESTAMP_FORMAT)
    if ts.minute not in (0, 30):
        raise ValueError(f"timestamp {text!r} is not on a half-hour boundary")
    return ts


def format_timestamp(ts):
    return ts.strftime(TIMESTAMP_FORMAT)


def _first_period_of_week(start):
    return start.weekday() * PERIODS_PER_DAY + start.hour * 2 + start.minute // 30 + 1


@dataclass(frozen=True)
class ConsumptionSeries:
    """One meter's half-hourly series with calendar-derived period labels.

    Values are raw kWh until :func:`standardize` is applied, after which
    ``max_raw`` records the divisor. ``presmoothing`` keeps the original
    values of any smoothed special days, keyed by date.
    """

    meter_id: str
    values: np.ndarray
    start: datetime
    max_raw: float | None = None
    presmoothing: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return len(self.values)

    @cached_property
    def period_of_week(self):
        w0 = _first_period_of_week(self.start)
        return ((w0 - 1 + np.arange(len(self))) % PERIODS_PER_WEEK) + 1

    @cached_property
    def period_of_day(self):
        return ((self.period_of_week - 1) % PERIODS_PER_DAY) + 1

    @cached_property
    def is_weekend(self):
        return (self.period_of_week - 1) // PERIODS_PER_DAY >= 5

    def labels_at(self, index):
        """(period_of_week, period_of_day, is_weekend) for any index >= 0,
        including positions beyond the stored values."""
        w0 = _first_period_of_week(self.start)
        w = (w0 - 1 + index) % PERIODS_PER_WEEK + 1
        d = (w - 1) % PERIODS_PER_DAY + 1
        return w, d, (w - 1) // PERIODS_PER_DAY >= 5

    def timestamp_at(self, index):
        return self.start + HALF_HOUR * index

    def index_of(self, ts):
        delta = ts - self.start
        steps, rem = divmod(delta, HALF_HOUR)
        if rem:
            raise ValueError(f"{ts} is not on the half-hour lattice of {self.meter_id}")
        return int(steps)

    def day_start_index(self, day):
        """Index of the 00:00-00:30 slot of a calendar date."""
        return self.index_of(datetime(day.year, day.month, day.day))

    def replace_values(self, values, **extra):
        fields = dict(meter_id=self.meter_id, values=values, start=self.start,
                      max_raw=self.max_raw, presmoothing=self.presmoothing)
        fields.update(extra)
        return ConsumptionSeries(**fields)


@dataclass
class SpecialDayCalendar:
    """Holiday dates and how each one is handled.

    Resolutions: "auto" (decide from data via
    :func:`resolve_post_sample_holiday`), "working-day", "sunday",
    "smoothed" (in-sample, already substituted), "unresolved".
    """

    resolution: dict = field(default_factory=dict)

    @property
    def holiday_dates(self):
        return set(self.resolution)

    def is_holiday(self, day):
        return day in self.resolution

    def resolution_for(self, day):
        return self.resolution.get(day)


@dataclass
class IngestReport:
    series: list = field(default_factory=list)
    row_errors: list = field(default_factory=list)       # (line_no, message)
    rejected_meters: list = field(default_factory=list)  # (meter_id, reason)

    @property
    def ok(self):
        return not self.row_errors and not self.rejected_meters


def ingest(csv_source):
    """Read the readings CSV into one gap-free series per meter.

    ``csv_source`` is a path or an open text file. Malformed rows are
    reported with their line number and skipped; meters with gaps or
    duplicate timestamps are rejected while the rest are kept.
    Standardization is not applied here.
    """
    if hasattr(csv_source, "read"):
        return _ingest_stream(csv_source)
    with open(csv_source, newline="") as fh:
        return _ingest_stream(fh)


def _ingest_stream(fh):
    report = IngestReport()
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != ["meter_id", "timestamp", "kwh"]:
        raise MeterDataError("readings CSV must start with header meter_id,timestamp,kwh")
    per_meter = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            report.row_errors.append((line_no, f"expected 3 fields, got {len(row)}"))
            continue
        meter_id, ts_text, kwh_text = row
        try:
            ts = parse_timestamp(ts_text)
        except ValueError as exc:
            report.row_errors.append((line_no, str(exc)))
            continue
        try:
            kwh = float(kwh_text)
        except ValueError:
            report.row_errors.append((line_no, f"unparseable consumption {kwh_text!r}"))
            continue
        if kwh < 0:
            report.row_errors.append((line_no, f"negative consumption {kwh}"))
            continue
        per_meter.setdefault(meter_id, []).append((ts, kwh))

    for meter_id in sorted(per_meter):
        rows = sorted(per_meter[meter_id])
        timestamps = [ts for ts, _ in rows]
        reason = None
        for prev, cur in zip(timestamps, timestamps[1:]):
            if cur == prev:
                reason = f"duplicate timestamp {format_timestamp(cur)}"
                break
            if cur - prev != HALF_HOUR:
                reason = (f"gap between {format_timestamp(prev)} and "
                          f"{format_timestamp(cur)}")
                break
        if reason is not None:
            report.rejected_meters.append((meter_id, reason))
            continue
        values = np.array([kwh for _, kwh in rows], dtype=np.float64)
        report.series.append(ConsumptionSeries(meter_id=meter_id, values=values,
                                               start=timestamps[0]))
    return report


def write_readings_csv(path, series_list):
    """Serialize series back to the ingestion schema (round-trip exact)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["meter_id", "timestamp", "kwh"])
        for series in series_list:
            for i, v in enumerate(series.values):
                writer.writerow([series.meter_id,
                                 format_timestamp(series.timestamp_at(i)),
                                 repr(float(v))])


def standardize(series, estimation_range):
    """Divide every value by the maximum over the estimation range.

    ``estimation_range`` is an (start, stop) index pair. Values outside
    the range may exceed 1 afterwards; they are kept unclipped.
    """
    start, stop = estimation_range
    if stop <= start:
        raise ValueError("estimation range must be nonempty")
    divisor = float(np.max(series.values[start:stop]))
    if divisor <= 0.0:
        raise UnusableMeterError(
            f"meter {series.meter_id}: estimation range is all zeros")
    # Keep the smoothing audit in the same units as the values.
    audit = {day: vals / divisor for day, vals in series.presmoothing.items()}
    return series.replace_values(series.values / divisor, max_raw=divisor,
                                 presmoothing=audit)


def _day_values(series, day, prefer_presmoothing=False):
    if prefer_presmoothing and day in series.presmoothing:
        return np.asarray(series.presmoothing[day], dtype=np.float64)
    i = series.day_start_index(day)
    if i < 0 or i + PERIODS_PER_DAY > len(series):
        raise ValueError(f"{day} is not fully covered by meter {series.meter_id}")
    return series.values[i:i + PERIODS_PER_DAY]


def smooth_special_days(series, calendar, end_index=None):
    """Replace each in-sample holiday's 48 values with the most recent
    prior non-holiday day of the same weekday.

    Only holidays whose 48 slots lie fully before ``end_index`` (default:
    the whole series) are smoothed; later ones are left for the
    post-sample resolution rule. Original values are retained in the
    series' presmoothing audit record, and the calendar entry is marked
    "smoothed". Holidays that fall before any same-weekday normal day
    fall back to the most recent non-holiday day of any weekday, with a
    warning.
    """
    if end_index is None:
        end_index = len(series)
    values = series.values.copy()
    presmoothing = dict(series.presmoothing)
    first_day = series.timestamp_at(0).date()
    for day in sorted(calendar.holiday_dates):
        try:
            start = series.day_start_index(day)
        except ValueError:
            continue
        if start < 0 or start + PERIODS_PER_DAY > end_index:
            continue
        donor = _find_donor_day(series, calendar, day, first_day)
        if donor is None:
            warnings.warn(f"no usable donor day for holiday {day} on meter "
                          f"{series.meter_id}; values left unchanged")
            continue
        donor_start = series.day_start_index(donor)
        presmoothing[day] = values[start:start + PERIODS_PER_DAY].copy()
        values[start:start + PERIODS_PER_DAY] = \
            values[donor_start:donor_start + PERIODS_PER_DAY]
        calendar.resolution[day] = "smoothed"
    return series.replace_values(values, presmoothing=presmoothing)


def _find_donor_day(series, calendar, day, first_day):
    def usable(candidate):
        if calendar.is_holiday(candidate):
            return False
        try:
            start = series.day_start_index(candidate)
        except ValueError:
            return False
        return 0 <= start and start + PERIODS_PER_DAY <= len(series)

    candidate = day - timedelta(days=7)
    while candidate >= first_day:
        if usable(candidate):
            return candidate
        candidate -= timedelta(days=7)
    # No prior same-weekday normal day: most recent non-holiday day.
    candidate = day - timedelta(days=1)
    while candidate >= first_day:
        if usable(candidate):
            warnings.warn(f"holiday {day} has no prior {day.strftime('%A')}; "
                          f"using {candidate} instead")
            return candidate
        candidate -= timedelta(days=1)
    return None


def mean_absolute_difference(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.mean(np.abs(a - b)))


def resolve_post_sample_holiday(series, holiday_date, reference_holiday_date):
    """Decide whether a post-sample holiday behaves like a working day or
    a Sunday.

    Compares the reference holiday (the last special day inside the
    estimation sample, using its pre-smoothing values) against the same
    weekday one week earlier and against the most recent Sunday, by mean
    absolute difference over the 48 half-hours. Ties go to "working-day".
    """
    ref = _day_values(series, reference_holiday_date, prefer_presmoothing=True)
    same_weekday = _day_values(series, reference_holiday_date - timedelta(days=7))
    sunday = reference_holiday_date - timedelta(days=1)
    while sunday.weekday() != 6:
        sunday -= timedelta(days=1)
    recent_sunday = _day_values(series, sunday)
    mad_working = mean_absolute_difference(ref, same_weekday)
    mad_sunday = mean_absolute_difference(ref, recent_sunday)
    return "working-day" if mad_working <= mad_sunday else "sunday"


@dataclass(frozen=True)
class MeterCategory:
    meter_id: str
    segment: str
    tariff: str
    stimulus: str

    @property
    def key(self):
        return f"{self.segment}|{self.tariff}|{self.stimulus}"


def load_categories(path):
    """Category file: meter_id,segment,tariff,stimulus."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"meter_id", "segment", "tariff", "stimulus"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MeterDataError(
                "category CSV must have columns meter_id,segment,tariff,stimulus")
        for row in reader:
            cat = MeterCategory(meter_id=row["meter_id"].strip(),
                                segment=row["segment"].strip(),
                                tariff=row["tariff"].strip(),
                                stimulus=row["stimulus"].strip())
            out[cat.meter_id] = cat
    return out


def load_holidays(path):
    """Holiday file: date,resolution with resolution in {auto, working-day, sunday}."""
    resolution = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "resolution"}.issubset(reader.fieldnames):
            raise MeterDataError("holiday CSV must have columns date,resolution")
        for row in reader:
            day = date.fromisoformat(row["date"].strip())
            res = row["resolution"].strip()
            if res not in ("auto", "working-day", "sunday"):
                raise MeterDataError(f"unknown holiday resolution {res!r} for {day}")
            resolution[day] = res
    return SpecialDayCalendar(resolution=resolution)
