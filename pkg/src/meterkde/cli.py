"""Command-line front end: validate, calibrate, forecast, evaluate, tariff.

Commands communicate only through files (the readings/category/holiday
CSVs in, parameter and report CSVs out), so they compose across runs.
All randomness flows from the seed in the config; reruns with the same
config produce byte-identical artifacts.
"""

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import calibration, dataio, density, estimators, evaluation, hwt, tariff
from .calibration import CalibrationPlan
from .dataio import SpecialDayCalendar, parse_timestamp
from .density import build_grid, quantile
from .evaluation import THETA_GRID, MeterModel
from .kernels import PERIODS_PER_WEEK

DEFAULT_METHODS = list(estimators.METHODS)

_INT_KEYS = ("seed", "workers", "window_weeks", "sample_count",
             "hwt_iterations", "cv_stride")


@dataclass
class RunConfig:
    readings: Path
    output_dir: Path
    in_sample_start: datetime
    cv_start: datetime
    post_sample_start: datetime
    post_sample_end: datetime
    categories: Path = None
    holidays: Path = None
    tariffs: Path = None
    methods: list = field(default_factory=lambda: list(DEFAULT_METHODS))
    tariff_method: str = None
    seed: int = 0
    workers: int = 1
    window_weeks: int = estimators.DEFAULT_WINDOW_WEEKS
    sample_count: int = 10000
    hwt_iterations: int = 10000
    cv_stride: int = 1

    def __post_init__(self):
        order = (self.in_sample_start, self.cv_start, self.post_sample_start,
                 self.post_sample_end)
        if not all(a < b for a, b in zip(order, order[1:])):
            raise ValueError("config ranges must be ordered: in_sample_start < "
                             "cv_start < post_sample_start < post_sample_end")
        for path in (self.readings, self.categories, self.holidays, self.tariffs):
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"configured file does not exist: {path}")
        if self.tariff_method is None:
            self.tariff_method = self.methods[0]
        for m in set(self.methods) | {self.tariff_method}:
            if m != "HWT" and m not in estimators.METHODS:
                raise ValueError(f"unknown method {m!r} in config")


def parse_config(path):
    """Flat key = value format; '#' starts a comment."""
    entries = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    base = Path(path).parent
    kwargs = {}
    for key in ("readings", "output_dir", "categories", "holidays", "tariffs"):
        if key in entries:
            p = Path(entries.pop(key))
            kwargs[key] = p if p.is_absolute() else base / p
    for key in ("in_sample_start", "cv_start", "post_sample_start",
                "post_sample_end"):
        if key not in entries:
            raise ValueError(f"config is missing required key {key!r}")
        kwargs[key] = parse_timestamp(entries.pop(key))
    if "methods" in entries:
        kwargs["methods"] = [m.strip() for m in entries.pop("methods").split(",")
                             if m.strip()]
    if "tariff_method" in entries:
        kwargs["tariff_method"] = entries.pop("tariff_method")
    for key in _INT_KEYS:
        if key in entries:
            kwargs[key] = int(entries.pop(key))
    if entries:
        raise ValueError(f"unknown config keys: {sorted(entries)}")
    if "readings" not in kwargs or "output_dir" not in kwargs:
        raise ValueError("config must set readings and output_dir")
    return RunConfig(**kwargs)


@dataclass
class PreparedMeter:
    series: object
    category: object
    calendar: object
    est_range: tuple
    cv_range: tuple
    post_range: tuple
    grid: object

    @property
    def in_sample_range(self):
        return (self.est_range[0], self.cv_range[1])


def prepare_meters(config):
    """Ingest, standardize, smooth in-sample holidays, and resolve
    post-sample ones; returns (prepared meters, ingest report, skipped)."""
    report = dataio.ingest(config.readings)
    categories = dataio.load_categories(config.categories) \
        if config.categories else {}
    base_calendar = dataio.load_holidays(config.holidays) \
        if config.holidays else SpecialDayCalendar()
    prepared = []
    skipped = []
    for series in report.series:
        try:
            prepared.append(_prepare_one(config, series, categories,
                                         base_calendar))
        except Exception as exc:
            skipped.append((series.meter_id, f"{type(exc).__name__}: {exc}"))
    return prepared, report, skipped


def _prepare_one(config, series, categories, base_calendar):
    est_start = series.index_of(config.in_sample_start)
    cv_start = series.index_of(config.cv_start)
    post_start = series.index_of(config.post_sample_start)
    post_end = series.index_of(config.post_sample_end)
    if est_start < 0 or post_end > len(series):
        raise ValueError("series does not cover the configured ranges")
    calendar = SpecialDayCalendar(resolution=dict(base_calendar.resolution))
    series = dataio.standardize(series, (est_start, post_start))
    series = dataio.smooth_special_days(series, calendar, end_index=post_start)
    _resolve_auto_holidays(series, calendar, post_start)
    grid = build_grid(series.values[est_start:post_start])
    return PreparedMeter(series=series,
                         category=categories.get(series.meter_id),
                         calendar=calendar,
                         est_range=(est_start, cv_start),
                         cv_range=(cv_start, post_start),
                         post_range=(post_start, post_end),
                         grid=grid)


def _resolve_auto_holidays(series, calendar, in_sample_end):
    smoothed = sorted(d for d, res in calendar.resolution.items()
                      if res == "smoothed")
    for day, res in sorted(calendar.resolution.items()):
        if res != "auto":
            continue
        if not smoothed:
            raise ValueError(f"holiday {day} needs auto resolution but no "
                             "in-sample reference holiday exists")
        calendar.resolution[day] = dataio.resolve_post_sample_holiday(
            series, day, smoothed[-1])


def _category_key(meter):
    if meter.category is None:
        return "unknown|none|none"
    return meter.category.key


def _load_params(config):
    path = Path(config.output_dir) / "params.csv"
    if not path.exists():
        raise FileNotFoundError(
            f"{path} not found; run the calibrate command first")
    return calibration.read_params_csv(path)


def _meter_model(meter, methods, pooled):
    cp = pooled.get(_category_key(meter))
    if cp is None:
        raise ValueError(f"no calibrated parameters for category "
                         f"{_category_key(meter)!r}")
    params = {}
    for m in methods:
        if m == "HWT":
            continue
        if m not in cp.params:
            raise ValueError(f"method {m} missing from calibrated parameters")
        params[m] = cp.params[m]
    return MeterModel(series=meter.series, grid=meter.grid,
                      method_params=params,
                      hwt_params=cp.hwt_params if "HWT" in methods else None,
                      calendar=meter.calendar)


# ---------------------------------------------------------------------------
# validate

def cmd_validate(config):
    report = dataio.ingest(config.readings)
    for line_no, message in report.row_errors:
        print(f"row {line_no}: {message}")
    for meter_id, reason in report.rejected_meters:
        print(f"meter {meter_id} rejected: {reason}")
    print(f"{len(report.series)} meter(s) accepted, "
          f"{len(report.rejected_meters)} rejected, "
          f"{len(report.row_errors)} bad row(s)")
    return 1 if report.rejected_meters else 0


# ---------------------------------------------------------------------------
# calibrate

def _calibrate_one(job):
    meter, methods, plan = job
    optima = {}
    for method in methods:
        if method == "HWT":
            optima["HWT"] = hwt.hwt_fit(meter.series,
                                        fit_range=(meter.est_range[0],
                                                   meter.cv_range[1]))
        else:
            optima[method] = calibration.optimize_params(
                meter.series, method, plan, grid=None, calendar=meter.calendar)
    return _category_key(meter), meter.series.meter_id, optima


def cmd_calibrate(config):
    prepared, _, skipped = prepare_meters(config)
    _report_skips(skipped)
    if not prepared:
        print("no usable meters", file=sys.stderr)
        return 1
    by_category = {}
    for meter in prepared:
        by_category.setdefault(_category_key(meter), {})[meter.series.meter_id] = meter

    jobs = []
    for key in sorted(by_category):
        meters = by_category[key]
        for meter_id in calibration.sample_meters(meters, fraction=0.10):
            meter = meters[meter_id]
            plan = CalibrationPlan(estimation_range=meter.est_range,
                                   cv_range=meter.cv_range,
                                   window_weeks=config.window_weeks,
                                   cv_stride=config.cv_stride)
            jobs.append((meter, config.methods, plan))

    results = _map_jobs(_calibrate_one, jobs, config.workers)
    per_category = {}
    for key, meter_id, optima in results:
        per_category.setdefault(key, {})[meter_id] = optima
    pooled = [calibration.pool_category(meters, key)
              for key, meters in sorted(per_category.items())]
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    calibration.write_params_csv(out_dir / "params.csv", pooled)
    print(f"calibrated {len(jobs)} meter(s) across {len(pooled)} categories "
          f"-> {out_dir / 'params.csv'}")
    return 0


def _map_jobs(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _report_skips(skipped):
    for meter_id, reason in skipped:
        print(f"skipping meter {meter_id}: {reason}", file=sys.stderr)


# ---------------------------------------------------------------------------
# forecast

def cmd_forecast(config, meter_id, origin_text, method):
    prepared, _, skipped = prepare_meters(config)
    _report_skips(skipped)
    by_id = {m.series.meter_id: m for m in prepared}
    if meter_id not in by_id:
        print(f"unknown meter {meter_id!r}", file=sys.stderr)
        return 1
    meter = by_id[meter_id]
    origin = meter.series.index_of(parse_timestamp(origin_text)) - 1
    pooled = _load_params(config)
    model = _meter_model(meter, [method], pooled)

    if method == "HWT":
        state = hwt.state_at(meter.series, model.hwt_params, origin,
                             start=meter.est_range[0])
        clamp_stats = {}
        forecasts = hwt.hwt_density(state, model.hwt_params,
                                    range(1, PERIODS_PER_WEEK + 1),
                                    config.hwt_iterations,
                                    np.random.SeedSequence([config.seed, origin]),
                                    meter.grid, origin=origin,
                                    clamp_stats=clamp_stats)
        if clamp_stats.get("negative_draws"):
            print(f"clamped {clamp_stats['negative_draws']} negative "
                  f"simulated draws to zero")
    else:
        forecasts = estimators.forecast_week(meter.series,
                                             model.method_params[method],
                                             origin, meter.grid,
                                             calendar=meter.calendar)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    density.write_forecast_csv(out_dir / "forecast_density.csv", meter_id,
                               forecasts)
    _write_fan_chart(out_dir / "forecast_quantiles.csv", forecasts)
    print(f"wrote {out_dir / 'forecast_density.csv'} and "
          f"{out_dir / 'forecast_quantiles.csv'}")
    return 0


def _write_fan_chart(path, forecasts):
    headers = ["horizon"] + [f"q{round(t * 100)}" for t in THETA_GRID]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for fc in forecasts:
            qs = quantile(fc, np.asarray(THETA_GRID))
            writer.writerow([fc.horizon] + [repr(float(q)) for q in qs])


# ---------------------------------------------------------------------------
# evaluate

def _evaluate_one(job):
    model, post_range, hwt_iterations, seed, methods, meter_index = job
    return evaluation.rolling_evaluate(
        [model], methods, post_range, hwt_iterations=hwt_iterations,
        seed=seed + meter_index)


def cmd_evaluate(config):
    prepared, _, skipped = prepare_meters(config)
    _report_skips(skipped)
    if not prepared:
        print("no usable meters; refusing to write empty reports",
              file=sys.stderr)
        return 1
    pooled = _load_params(config)
    jobs = []
    unparameterized = []
    for i, meter in enumerate(sorted(prepared, key=lambda m: m.series.meter_id)):
        try:
            model = _meter_model(meter, config.methods, pooled)
        except ValueError as exc:
            unparameterized.append((meter.series.meter_id, str(exc)))
            continue
        jobs.append((model, meter.post_range, config.hwt_iterations,
                     config.seed, config.methods, i))
    _report_skips(unparameterized)
    if not jobs:
        print("no meters with calibrated parameters; refusing to write "
              "empty reports", file=sys.stderr)
        return 1
    reports = _map_jobs(_evaluate_one, jobs, config.workers)
    report = reports[0]
    for other in reports[1:]:
        report.merge(other)
    for meter_id, reason in report.failures:
        print(f"meter {meter_id} failed: {reason}", file=sys.stderr)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    evaluation.write_scores_csv(report, out_dir / "scores_by_horizon.csv")
    evaluation.write_coverage_csv(report, out_dir / "coverage.csv")
    print(f"scored {report.meter_count} meter(s) over "
          f"{len(report.origins)} origin(s) -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# tariff

def _tariff_one(job):
    model, meter, allocated, criterion, catalog, config, meter_index = job
    p_start, p_end = meter.post_range
    origins = [o for o in range(p_start - 1, p_end - PERIODS_PER_WEEK)
               if meter.series.labels_at(o + 1)[0] == 1]
    forecaster = _week_forecaster(model, meter, config.tariff_method, config)
    return tariff.switching_simulation(
        meter.series, forecaster, origins, allocated, criterion,
        tariffs=catalog, holiday_calendar=meter.calendar,
        sample_count=config.sample_count, seed=config.seed + meter_index)


def cmd_tariff(config, criterion):
    prepared, _, skipped = prepare_meters(config)
    _report_skips(skipped)
    pooled = _load_params(config)
    catalog = tariff.load_tariffs(config.tariffs) if config.tariffs \
        else tariff.default_tariffs()
    method = config.tariff_method

    excluded = []
    jobs = []
    for meter_index, meter in enumerate(
            sorted(prepared, key=lambda m: m.series.meter_id)):
        allocated = meter.category.tariff if meter.category else None
        if allocated not in catalog:
            excluded.append((meter.series.meter_id,
                             f"no allocated TOU tariff ({allocated})"))
            continue
        try:
            model = _meter_model(meter, [method], pooled)
        except ValueError as exc:
            excluded.append((meter.series.meter_id, str(exc)))
            continue
        jobs.append((model, meter, allocated, criterion, catalog, config,
                     meter_index))

    records = _map_jobs(_tariff_one, jobs, config.workers)
    rows = []
    for record in records:
        for wk in record.weeks:
            rows.append([record.meter_id, criterion, wk.week, wk.chosen,
                         repr(wk.predicted_cost_mean), repr(wk.realized_cost),
                         repr(wk.allocated_realized_cost)])

    for meter_id, reason in excluded:
        print(f"excluded meter {meter_id}: {reason}", file=sys.stderr)
    if not records:
        print("no eligible meters with allocated tariffs", file=sys.stderr)
        return 1
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "switching_report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["meter_id", "criterion", "week", "chosen_tariff",
                         "predicted_cost_mean", "realized_cost",
                         "allocated_realized_cost"])
        writer.writerows(rows)
    summary = tariff.summarize_switching(records)
    with open(out_dir / "switching_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["criterion"] + list(summary))
        writer.writerow([criterion] + [repr(v) if isinstance(v, float) else v
                                       for v in summary.values()])
    print(f"criterion {criterion}: "
          f"{summary['pct_switching_cheaper']:.1f}% switching cheaper, "
          f"{summary['pct_allocated_cheaper']:.1f}% allocated cheaper, "
          f"{summary['pct_no_difference']:.1f}% no difference; "
          f"average saving {summary['average_saving_cents']:.1f} cents")
    return 0


def _week_forecaster(model, meter, method, config):
    if method == "HWT":
        def forecaster(origin):
            state = hwt.state_at(meter.series, model.hwt_params, origin,
                                 start=meter.est_range[0])
            return hwt.hwt_density(state, model.hwt_params,
                                   range(1, PERIODS_PER_WEEK + 1),
                                   config.hwt_iterations,
                                   np.random.SeedSequence([config.seed, origin]),
                                   meter.grid, origin=origin)
    else:
        def forecaster(origin):
            return estimators.forecast_week(meter.series,
                                            model.method_params[method],
                                            origin, meter.grid,
                                            calendar=meter.calendar)
    return forecaster


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="meterkde",
        description="Probabilistic half-hourly consumption forecasting and "
                    "time-of-use tariff simulation")
    parser.add_argument("--config", required=True, help="path to the run config")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", help="check the readings file")
    p_cal = sub.add_parser("calibrate",
                           help="select parameters by cross-validated CRPS")
    p_fc = sub.add_parser("forecast", help="one week of densities for one meter")
    p_fc.add_argument("--meter", required=True)
    p_fc.add_argument("--origin", required=True,
                      help="timestamp of the first forecast half-hour")
    p_ev = sub.add_parser("evaluate", help="rolling-origin post-sample scoring")
    p_tf = sub.add_parser("tariff", help="weekly tariff switching simulation")
    p_tf.add_argument("--criterion", choices=tariff.CRITERIA, default="mean")
    for p in (p_cal, p_fc, p_ev):
        p.add_argument("--methods", default=None,
                       help="comma-separated method list overriding the config"
                            " (forecast takes a single name)")
    for p in sub.choices.values():
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = parse_config(args.config)
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "methods", None):
        config.methods = [m.strip() for m in args.methods.split(",") if m.strip()]
        for m in config.methods:
            if m != "HWT" and m not in estimators.METHODS:
                print(f"unknown method {m!r}", file=sys.stderr)
                return 2
    if args.command == "validate":
        return cmd_validate(config)
    if args.command == "calibrate":
        return cmd_calibrate(config)
    if args.command == "forecast":
        if getattr(args, "methods", None) and len(config.methods) != 1:
            print("forecast takes exactly one method via --methods",
                  file=sys.stderr)
            return 2
        return cmd_forecast(config, args.meter, args.origin, config.methods[0])
    if args.command == "evaluate":
        return cmd_evaluate(config)
    if args.command == "tariff":
        return cmd_tariff(config, args.criterion)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
