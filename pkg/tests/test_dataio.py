import io
from datetime import date, datetime, timedelta

import numpy as np
import pytest

from meterkde.dataio import (MeterDataError,
                             SpecialDayCalendar, UnusableMeterError, ingest,
                             load_categories, load_holidays,
                             mean_absolute_difference, parse_timestamp,
                             resolve_post_sample_holiday, smooth_special_days,
                             standardize, write_readings_csv)
from meterkde.kernels import PERIODS_PER_DAY, PERIODS_PER_WEEK

from conftest import MONDAY, make_series


def readings_csv(rows):
    return io.StringIO("meter_id,timestamp,kwh\n" + "\n".join(rows) + "\n")


def make_rows(meter_id, start, values):
    ts = start
    out = []
    for v in values:
        out.append(f"{meter_id},{ts.strftime('%Y-%m-%dT%H:%M')},{v!r}")
        ts += timedelta(minutes=30)
    return out


class TestIngest:
    def test_three_rows_one_series(self):
        report = ingest(readings_csv(make_rows("a", MONDAY, [1.0, 2.0, 3.0])))
        assert report.ok
        assert len(report.series) == 1
        assert len(report.series[0]) == 3
        np.testing.assert_array_equal(report.series[0].values, [1.0, 2.0, 3.0])

    def test_gap_rejects_meter(self):
        rows = make_rows("a", MONDAY, [1.0, 2.0])
        rows.append(f"a,{(MONDAY + timedelta(minutes=90)).strftime('%Y-%m-%dT%H:%M')},3.0")
        report = ingest(readings_csv(rows))
        assert not report.series
        assert report.rejected_meters[0][0] == "a"
        assert "gap" in report.rejected_meters[0][1]

    def test_duplicate_timestamp_rejects_meter(self):
        rows = make_rows("a", MONDAY, [1.0, 2.0])
        rows.append(rows[-1])
        report = ingest(readings_csv(rows))
        assert report.rejected_meters and "duplicate" in report.rejected_meters[0][1]

    def test_bad_meter_does_not_poison_others(self):
        rows = make_rows("a", MONDAY, [1.0, 2.0, 3.0])
        rows += make_rows("b", MONDAY, [1.0])
        rows += make_rows("b", MONDAY + timedelta(minutes=60), [2.0])
        report = ingest(readings_csv(rows))
        assert [s.meter_id for s in report.series] == ["a"]
        assert report.rejected_meters[0][0] == "b"

    def test_two_interleaved_meters_full_sample_length(self):
        # 10128 half-hours each, rows interleaved between the meters.
        n = 10128
        ts = [MONDAY + timedelta(minutes=30 * i) for i in range(n)]
        rows = []
        for i, t in enumerate(ts):
            stamp = t.strftime('%Y-%m-%dT%H:%M')
            rows.append(f"a,{stamp},{float(i % 5)}")
            rows.append(f"b,{stamp},{float(i % 7)}")
        report = ingest(readings_csv(rows))
        assert [s.meter_id for s in report.series] == ["a", "b"]
        assert all(len(s) == n for s in report.series)

    def test_malformed_rows_reported_with_line_numbers(self):
        rows = make_rows("a", MONDAY, [1.0, 2.0])
        rows.insert(1, "a,not-a-timestamp,1.0")
        rows.append("a,2010-01-04T01:00,minus")
        rows.append("a,2010-01-04T01:00,-3.0")
        report = ingest(readings_csv(rows))
        lines = [line for line, _ in report.row_errors]
        assert lines == [3, 5, 6]
        assert "negative" in report.row_errors[-1][1]

    def test_header_required(self):
        with pytest.raises(MeterDataError):
            ingest(io.StringIO("a,2010-01-04T00:00,1.0\n"))

    def test_round_trip_bit_for_bit(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = make_rows("a", MONDAY, list(rng.random(100)))
        rows += make_rows("b", MONDAY, list(rng.random(50) * 3.7))
        first = ingest(readings_csv(rows))
        path = tmp_path / "out.csv"
        write_readings_csv(path, first.series)
        second = ingest(path)
        assert len(second.series) == len(first.series)
        for s1, s2 in zip(first.series, second.series):
            assert s1.meter_id == s2.meter_id
            assert s1.start == s2.start
            np.testing.assert_array_equal(s1.values, s2.values)


class TestLabels:
    def test_monday_start_is_period_one(self):
        series = make_series([0.1] * 4)
        assert series.period_of_week[0] == 1
        assert series.period_of_day[0] == 1
        assert not series.is_weekend[0]

    def test_period_advances_mod_336(self):
        series = make_series([0.0] * (2 * PERIODS_PER_WEEK))
        w = series.period_of_week
        assert np.all((w[1:] - w[:-1]) % PERIODS_PER_WEEK == 1)

    def test_day_label_derived_from_week_label(self):
        series = make_series([0.0] * PERIODS_PER_WEEK,
                             start=MONDAY + timedelta(hours=7))
        w = series.period_of_week
        d = series.period_of_day
        np.testing.assert_array_equal(d, ((w - 1) % PERIODS_PER_DAY) + 1)

    def test_midweek_start_offsets_labels(self):
        wednesday_ten = datetime(2010, 1, 6, 10, 30)
        series = make_series([0.0] * 4, start=wednesday_ten)
        assert series.period_of_week[0] == 2 * 48 + 21 + 1

    def test_weekend_flag(self):
        series = make_series([0.0] * PERIODS_PER_WEEK)
        flags = series.is_weekend
        assert not flags[:5 * 48].any()
        assert flags[5 * 48:].all()


class TestStandardize:
    def test_direct_division(self):
        series = make_series([2.0, 4.0, 1.0])
        out = standardize(series, (0, 3))
        np.testing.assert_array_equal(out.values, [0.5, 1.0, 0.25])
        assert out.max_raw == 4.0

    def test_post_sample_may_exceed_one(self):
        series = make_series([2.0, 4.0, 5.0])
        out = standardize(series, (0, 2))
        assert out.values[2] == pytest.approx(1.25)

    def test_constant_series(self):
        series = make_series([3.0, 3.0, 3.0])
        out = standardize(series, (0, 3))
        np.testing.assert_array_equal(out.values, [1.0, 1.0, 1.0])

    def test_in_sample_max_exactly_one(self):
        rng = np.random.default_rng(1)
        series = make_series(rng.random(500) * 7.3)
        out = standardize(series, (0, 400))
        assert out.values[:400].max() == 1.0
        assert out.values.min() >= 0.0

    def test_all_zero_range_flagged(self):
        series = make_series([0.0, 0.0, 1.0])
        with pytest.raises(UnusableMeterError):
            standardize(series, (0, 2))


def week_of_days(day_values):
    """Concatenate per-day 48-slot blocks."""
    return np.concatenate([np.full(PERIODS_PER_DAY, v) for v in day_values])


class TestSmoothSpecialDays:
    def test_holiday_replaced_by_prior_same_weekday(self):
        # Three Mondays: week 3's Monday is a holiday.
        values = np.concatenate([week_of_days([1, 2, 3, 4, 5, 6, 7]),
                                 week_of_days([8, 9, 10, 11, 12, 13, 14]),
                                 week_of_days([99, 16, 17, 18, 19, 20, 21])])
        series = make_series(values)
        calendar = SpecialDayCalendar({date(2010, 1, 18): "auto"})
        out = smooth_special_days(series, calendar)
        np.testing.assert_array_equal(out.values[2 * 336:2 * 336 + 48], 8.0)
        assert calendar.resolution[date(2010, 1, 18)] == "smoothed"
        # Audit record keeps the original values.
        np.testing.assert_array_equal(out.presmoothing[date(2010, 1, 18)], 99.0)

    def test_two_consecutive_holiday_mondays(self):
        values = np.concatenate([week_of_days([1, 2, 3, 4, 5, 6, 7]),
                                 week_of_days([88, 9, 10, 11, 12, 13, 14]),
                                 week_of_days([99, 16, 17, 18, 19, 20, 21])])
        series = make_series(values)
        calendar = SpecialDayCalendar({date(2010, 1, 11): "auto",
                                       date(2010, 1, 18): "auto"})
        out = smooth_special_days(series, calendar)
        # Both holiday Mondays take the last non-holiday Monday (week 1).
        np.testing.assert_array_equal(out.values[336:336 + 48], 1.0)
        np.testing.assert_array_equal(out.values[672:672 + 48], 1.0)

    def test_no_holidays_identity(self):
        series = make_series(np.arange(2 * 336, dtype=float))
        out = smooth_special_days(series, SpecialDayCalendar())
        np.testing.assert_array_equal(out.values, series.values)

    def test_changes_exactly_48_values_per_holiday(self):
        rng = np.random.default_rng(2)
        series = make_series(rng.random(3 * 336))
        calendar = SpecialDayCalendar({date(2010, 1, 13): "auto",
                                       date(2010, 1, 19): "auto"})
        out = smooth_special_days(series, calendar)
        changed = np.sum(out.values != series.values)
        assert changed == 2 * 48

    def test_first_week_holiday_falls_back_with_warning(self):
        rng = np.random.default_rng(3)
        series = make_series(rng.random(2 * 336))
        calendar = SpecialDayCalendar({date(2010, 1, 6): "auto"})
        with pytest.warns(UserWarning):
            out = smooth_special_days(series, calendar)
        # Replaced by the most recent prior non-holiday day (Tuesday).
        np.testing.assert_array_equal(out.values[2 * 48:3 * 48],
                                      series.values[48:96])

    def test_end_index_excludes_post_sample_holidays(self):
        rng = np.random.default_rng(4)
        series = make_series(rng.random(3 * 336))
        calendar = SpecialDayCalendar({date(2010, 1, 18): "auto"})
        out = smooth_special_days(series, calendar, end_index=2 * 336)
        np.testing.assert_array_equal(out.values, series.values)
        assert calendar.resolution[date(2010, 1, 18)] == "auto"


class TestResolvePostSampleHoliday:
    def build(self, monday_week2, sunday_week2):
        # Weeks: 1 (normal), 2 (reference week), 3 holds the ref holiday Monday.
        week1 = week_of_days([5, 2, 2, 2, 2, 3, 4])
        week2 = np.concatenate([np.full(48, monday_week2),
                                week_of_days([2, 2, 2, 2, 3])[:5 * 48],
                                np.full(48, sunday_week2)])
        ref_monday = np.full(48, 5.0)
        rest = week_of_days([2, 2, 2, 2, 3, 4])
        return make_series(np.concatenate([week1, week2, ref_monday, rest]))

    def test_reference_like_previous_monday(self):
        series = self.build(monday_week2=5.0, sunday_week2=9.0)
        res = resolve_post_sample_holiday(series, date(2010, 8, 2),
                                          date(2010, 1, 18))
        assert res == "working-day"

    def test_reference_like_recent_sunday(self):
        series = self.build(monday_week2=9.0, sunday_week2=5.0)
        res = resolve_post_sample_holiday(series, date(2010, 8, 2),
                                          date(2010, 1, 18))
        assert res == "sunday"

    def test_tie_breaks_to_working_day(self):
        series = self.build(monday_week2=6.0, sunday_week2=4.0)
        res = resolve_post_sample_holiday(series, date(2010, 8, 2),
                                          date(2010, 1, 18))
        assert res == "working-day"

    def test_uses_presmoothing_audit_values(self):
        # Reference holiday observed at 5.0; week 2 Monday is 2.0 and week 2
        # Sunday is 5.0. After smoothing the stored holiday values become
        # 2.0 (the donor Monday); only the audit record still shows the
        # observed 5.0 profile, which matches the Sunday.
        week1 = week_of_days([5, 2, 2, 2, 2, 3, 4])
        week2 = week_of_days([2, 2, 2, 2, 2, 3, 5])
        ref_monday = np.full(48, 5.0)
        rest = week_of_days([2, 2, 2, 2, 3, 4])
        series = make_series(np.concatenate([week1, week2, ref_monday, rest]))
        calendar = SpecialDayCalendar({date(2010, 1, 18): "auto"})
        smoothed = smooth_special_days(series, calendar)
        np.testing.assert_array_equal(smoothed.values[672:720], 2.0)
        res = resolve_post_sample_holiday(smoothed, date(2010, 8, 2),
                                          date(2010, 1, 18))
        assert res == "sunday"
        assert mean_absolute_difference(
            smoothed.presmoothing[date(2010, 1, 18)], np.full(48, 5.0)) == 0.0


class TestFileLoaders:
    def test_categories(self, tmp_path):
        p = tmp_path / "cats.csv"
        p.write_text("meter_id,segment,tariff,stimulus\n"
                     "a,residential,B,monthly\n"
                     "b,sme,A,web\n")
        cats = load_categories(p)
        assert cats["a"].key == "residential|B|monthly"
        assert cats["b"].segment == "sme"

    def test_holidays(self, tmp_path):
        p = tmp_path / "hols.csv"
        p.write_text("date,resolution\n2010-06-07,auto\n2010-08-02,sunday\n")
        cal = load_holidays(p)
        assert cal.resolution[date(2010, 6, 7)] == "auto"
        assert cal.resolution[date(2010, 8, 2)] == "sunday"

    def test_unknown_resolution_rejected(self, tmp_path):
        p = tmp_path / "hols.csv"
        p.write_text("date,resolution\n2010-06-07,maybe\n")
        with pytest.raises(MeterDataError):
            load_holidays(p)

    def test_timestamp_parsing(self):
        assert parse_timestamp("2010-01-04T00:30") == MONDAY + timedelta(minutes=30)
        with pytest.raises(ValueError):
            parse_timestamp("2010-01-04T00:15")
