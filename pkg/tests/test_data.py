from datetime import date

import numpy as np
import pytest

from fxcast.data import (
    FeatureTable,
    Frequency,
    TimeSeries,
    add_lags,
    align_mixed_frequency,
    calendar_feature_names,
    load_csv,
    load_manifest,
    make_supervised,
    resample_weekly,
    summarize,
)
from fxcast.errors import (
    AlignmentError,
    ConfigError,
    FrequencyError,
    InsufficientDataError,
    ParseError,
    ValidationError,
)


def series(name, dates, values, freq=Frequency.DAILY):
    return TimeSeries(name=name, frequency=freq, dates=tuple(dates), values=np.asarray(values, float))


def daily_dates(start, n):
    from datetime import timedelta

    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


# ---------------------------------------------------------------------------
# load_csv


def test_load_csv_negative_oil_close(tmp_path):
    p = tmp_path / "oil.csv"
    p.write_text("2020-04-17,18.27\n2020-04-20,-36.98\n2020-04-21,10.01\n")
    ts = load_csv(p, "Oil", Frequency.DAILY)
    assert ts.values[1] == pytest.approx(-36.98)
    assert ts.dates[1] == date(2020, 4, 20)


def test_load_csv_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ValidationError):
        load_csv(p, "x", Frequency.DAILY)


def test_load_csv_sorts_and_rejects_duplicates(tmp_path):
    p = tmp_path / "out_of_order.csv"
    p.write_text("2020-01-03,3\n2020-01-02,2\n2020-01-01,1\n")
    ts = load_csv(p, "x", Frequency.DAILY)
    assert list(ts.values) == [1.0, 2.0, 3.0]

    p2 = tmp_path / "dup.csv"
    p2.write_text("2020-01-02,1\n2020-01-02,2\n")
    with pytest.raises(ValidationError):
        load_csv(p2, "x", Frequency.DAILY)


def test_load_csv_parse_errors_carry_line_numbers(tmp_path):
    p = tmp_path / "bad_date.csv"
    p.write_text("2020-01-01,1\nnot-a-date,2\n")
    with pytest.raises(ParseError) as exc:
        load_csv(p, "x", Frequency.DAILY)
    assert exc.value.line == 2

    p2 = tmp_path / "bad_num.csv"
    p2.write_text("2020-01-01,1\n2020-01-02,abc\n")
    with pytest.raises(ParseError) as exc:
        load_csv(p2, "x", Frequency.DAILY)
    assert exc.value.line == 2

    with pytest.raises(ParseError):
        load_csv(tmp_path / "missing.csv", "x", Frequency.DAILY)


def test_load_csv_header_flag_and_crlf(tmp_path):
    p = tmp_path / "hdr.csv"
    p.write_text("date,value\r\n2020-01-01,1.5\r\n2020-01-02,2.5\r\n")
    ts = load_csv(p, "x", Frequency.DAILY, has_header=True)
    assert len(ts) == 2


# ---------------------------------------------------------------------------
# TimeSeries invariants


def test_timeseries_invariants():
    with pytest.raises(ValidationError):
        series("x", [], [])
    with pytest.raises(ValidationError):
        series("x", [date(2020, 1, 2), date(2020, 1, 1)], [1, 2])
    with pytest.raises(ValidationError):
        series("x", [date(2020, 1, 1)], [np.nan])


# ---------------------------------------------------------------------------
# align_mixed_frequency


def test_align_monthly_forward_fill_from_observation_date():
    days = [date(2020, 1, d) for d in range(13, 25) if date(2020, 1, d).weekday() < 5]
    daily = series("px", days, np.arange(len(days), dtype=float))
    monthly = series(
        "ir",
        [date(2019, 12, 15), date(2020, 1, 15), date(2020, 2, 15)],
        [7.0, 9.0, 11.0],
        freq=Frequency.MONTHLY,
    )
    table = align_mixed_frequency([daily, monthly], Frequency.DAILY)
    ir = table.column("ir")
    for t, v in zip(table.timestamps, ir):
        assert v == (9.0 if t >= date(2020, 1, 15) else 7.0)
    assert table.n_rows == len(days)  # December obs covers the leading days


def test_align_drops_leading_unfilled_rows():
    days = [date(2020, 1, d) for d in (2, 3, 6, 7, 8)]
    daily = series("px", days, [1, 2, 3, 4, 5])
    monthly = series("m", [date(2020, 1, 6)], [42.0], freq=Frequency.MONTHLY)
    table = align_mixed_frequency([daily, monthly], Frequency.DAILY)
    assert table.timestamps[0] == date(2020, 1, 6)
    assert table.n_rows == 3


def test_align_disjoint_ranges_error():
    a = series("a", [date(2020, 1, 1), date(2020, 1, 2)], [1, 2])
    b = series("b", [date(2021, 1, 1), date(2021, 1, 2)], [1, 2])
    with pytest.raises(AlignmentError):
        align_mixed_frequency([a, b], Frequency.DAILY)


def test_align_idempotent_on_aligned_table(daily_table):
    again = align_mixed_frequency(
        [
            TimeSeries(
                name=n,
                frequency=Frequency.DAILY,
                dates=daily_table.timestamps,
                values=daily_table.values[:, i],
            )
            for i, n in enumerate(daily_table.names)
        ],
        Frequency.DAILY,
    )
    assert again.timestamps == daily_table.timestamps
    np.testing.assert_array_equal(again.values, daily_table.values)


def test_align_weekly_resamples_daily_sources(synth_series):
    table = align_mixed_frequency(list(synth_series.values()), Frequency.WEEKLY)
    assert table.frequency == Frequency.WEEKLY
    # one row per ISO week
    weeks = [t.isocalendar()[:2] for t in table.timestamps]
    assert len(weeks) == len(set(weeks))


# ---------------------------------------------------------------------------
# resample_weekly


def test_resample_weekly_takes_last_business_day():
    days = daily_dates(date(2020, 1, 6), 10)  # two full Mon-Fri weeks
    ts = series("px", days, np.arange(10, dtype=float))
    weekly = resample_weekly(ts)
    assert len(weekly) == 2
    assert weekly.dates[0] == date(2020, 1, 10) and weekly.values[0] == 4.0
    assert weekly.dates[1] == date(2020, 1, 17) and weekly.values[1] == 9.0


def test_resample_weekly_holiday_week_uses_thursday():
    days = [date(2020, 1, 6), date(2020, 1, 7), date(2020, 1, 8), date(2020, 1, 9)]  # no Friday
    ts = series("px", days, [1.0, 2.0, 3.0, 4.0])
    weekly = resample_weekly(ts)
    assert len(weekly) == 1
    assert weekly.dates[0] == date(2020, 1, 9)
    assert weekly.values[0] == 4.0


def test_resample_weekly_count_ratio(synth_series):
    daily = synth_series["Oil"]
    weekly = resample_weekly(daily)
    assert len(weekly) == pytest.approx(len(daily) / 5, abs=2)


def test_resample_weekly_rejects_non_daily(synth_series):
    weekly = resample_weekly(synth_series["Oil"])
    with pytest.raises(FrequencyError):
        resample_weekly(weekly)


# ---------------------------------------------------------------------------
# make_supervised / add_lags


def small_table(n=12):
    days = daily_dates(date(2020, 3, 2), n)
    vals = np.column_stack([np.arange(n, dtype=float), 10 + np.arange(n, dtype=float)])
    return FeatureTable(
        timestamps=tuple(days), names=("tgt", "feat"), values=vals, frequency=Frequency.DAILY
    )


def test_make_supervised_shift_and_row_drop():
    table = small_table(100)
    ds = make_supervised(table, target="tgt", horizon=1)
    assert ds.n_rows == 99
    ds10 = make_supervised(table, target="tgt", horizon=10)
    assert ds10.n_rows == 90
    assert ds10.y[0] == table.column("tgt")[10]


def test_make_supervised_shift_consistency_exhaustive():
    table = small_table(12)
    tgt = table.column("tgt")
    for h in (1, 2, 5):
        ds = make_supervised(table, target="tgt", horizon=h)
        for t in range(ds.n_rows):
            assert ds.y[t] == tgt[t + h]
            assert ds.timestamps[t] == table.timestamps[t]
            assert ds.target_current[t] == tgt[t]


def test_make_supervised_calendar_only():
    table = small_table(20)
    ds = make_supervised(table, target="tgt", horizon=1, include_calendar=True, feature_subset=[])
    assert ds.feature_names == tuple(calendar_feature_names(Frequency.DAILY))
    assert ds.X.shape[1] == 3
    # day-of-week/month ranges
    assert set(ds.X[:, 0]) <= set(range(7))
    assert set(ds.X[:, 1]) <= {1, 2, 3, 4, 5}
    assert set(ds.X[:, 2]) <= set(range(1, 13))


def test_make_supervised_weekly_calendar_omits_day_of_week(weekly_table):
    ds = make_supervised(weekly_table, target="CADUSD", horizon=1, include_calendar=True, feature_subset=[])
    assert ds.X.shape[1] == 2
    assert ds.feature_names == ("cal_week_of_month", "cal_month_of_year")


def test_make_supervised_errors():
    table = small_table(10)
    with pytest.raises(ConfigError):
        make_supervised(table, target="nope", horizon=1)
    with pytest.raises(ConfigError):
        make_supervised(table, target="tgt", horizon=1, feature_subset=["ghost"])
    with pytest.raises(InsufficientDataError):
        make_supervised(table, target="tgt", horizon=10)


def test_add_lags_alignment():
    table = small_table(5)  # tgt = 0..4
    ds = make_supervised(table, target="tgt", horizon=1)  # rows 0..3
    lagged = add_lags(ds, "tgt", 1)
    assert lagged.n_rows == 3
    assert lagged.feature_names[-1] == "tgt_lag1"
    np.testing.assert_array_equal(lagged.X[:, -1], [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(lagged.y, ds.y[1:])


def test_add_lags_k5_shape():
    table = small_table(30)
    ds = make_supervised(table, target="tgt", horizon=1)
    lagged = add_lags(ds, "tgt", 5)
    assert lagged.n_rows == ds.n_rows - 5
    assert lagged.n_features == ds.n_features + 5
    for j in range(1, 6):
        col = lagged.X[:, lagged.feature_names.index(f"tgt_lag{j}")]
        np.testing.assert_array_equal(col, lagged.target_current - j)


def test_add_lags_k_too_large():
    table = small_table(6)
    ds = make_supervised(table, target="tgt", horizon=1)  # 5 rows
    with pytest.raises(InsufficientDataError):
        add_lags(ds, "tgt", 5)


def test_add_lags_feature_column():
    table = small_table(8)
    ds = make_supervised(table, target="tgt", horizon=1)
    lagged = add_lags(ds, "feat", 2)
    feat = ds.X[:, ds.feature_names.index("feat")]
    np.testing.assert_array_equal(lagged.X[:, -2], feat[1:-1])  # feat_lag1
    np.testing.assert_array_equal(lagged.X[:, -1], feat[:-2])  # feat_lag2


# ---------------------------------------------------------------------------
# manifest + stats


def test_manifest_round_trip(tmp_path):
    (tmp_path / "a.csv").write_text("2020-01-01,1\n2020-01-02,2\n")
    (tmp_path / "b.csv").write_text("2020-01-01,5\n2020-01-02,6\n")
    manifest_doc = {
        "T": {"path": "a.csv", "frequency": "daily", "role": "target"},
        "F": {"path": "b.csv", "frequency": "daily", "role": "feature"},
    }
    import json

    mp = tmp_path / "manifest.json"
    mp.write_text(json.dumps(manifest_doc))
    manifest = load_manifest(mp)
    assert manifest.target == "T"
    assert manifest.names() == ["T", "F"]


def test_manifest_requires_single_target(tmp_path):
    import json

    mp = tmp_path / "manifest.json"
    mp.write_text(json.dumps({"A": {"path": "a.csv", "frequency": "daily", "role": "feature"}}))
    with pytest.raises(ConfigError):
        load_manifest(mp)


def test_summarize_single_point_has_zero_sd_and_undefined_skew():
    st = summarize(series("x", [date(2020, 1, 1)], [3.0]))
    assert st.sd == 0.0
    assert st.skew is None
    assert st.count == 1
