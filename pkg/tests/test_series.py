import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhpg import (
    CovariatePanel,
    DataError,
    DatedSeries,
    align,
    describe,
    load_covariates_csv,
    load_series_csv,
    log_returns,
    zscore_normalize,
)
from nhpg.series import write_panel_csv, write_series_csv


def dated(values, start="2020-01-01", name="s"):
    values = np.asarray(values, float)
    dates = np.datetime64(start) + np.arange(len(values))
    return DatedSeries(dates, values, name)


class TestDatedSeries:
    def test_rejects_unsorted_dates(self):
        with pytest.raises(DataError, match="increasing"):
            DatedSeries(["2020-01-02", "2020-01-01"], [1.0, 2.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(DataError, match="non-finite"):
            dated([1.0, np.nan, 2.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(DataError):
            DatedSeries(["2020-01-01"], [1.0, 2.0])

    def test_values_are_readonly(self):
        s = dated([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 9.0

    def test_window(self):
        s = dated([1, 2, 3, 4, 5])
        w = s.window("2020-01-02", "2020-01-04")
        assert list(w.values) == [2, 3, 4]


class TestLogReturns:
    def test_constant_series_gives_zero(self):
        assert np.allclose(log_returns(dated([10, 10, 10])).values, [0.0, 0.0])

    def test_log_identity(self):
        out = log_returns(dated([1.0, math.e]))
        assert out.values[0] == pytest.approx(1.0, abs=1e-15)

    def test_double_and_halve(self):
        out = log_returns(dated([2.0, 4.0, 2.0]))
        assert out.values == pytest.approx([math.log(2), -math.log(2)], abs=1e-12)

    def test_dates_shift_by_one(self):
        prices = dated([1, 2, 3])
        out = log_returns(prices)
        assert np.array_equal(out.dates, prices.dates[1:])

    def test_rejects_nonpositive_naming_date(self):
        with pytest.raises(DataError, match="2020-01-02"):
            log_returns(dated([1.0, -3.0, 2.0]))

    def test_rejects_short_series(self):
        with pytest.raises(DataError, match="at least 2"):
            log_returns(dated([1.0]))

    @given(
        st.lists(st.floats(min_value=0.1, max_value=1e4), min_size=2, max_size=60),
    )
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_recovers_prices(self, prices):
        series = dated(prices)
        r = log_returns(series)
        rebuilt = prices[0] * np.exp(np.cumsum(r.values))
        assert np.allclose(rebuilt, prices[1:], rtol=1e-10)


def panel(columns, names=None, start="2020-01-01"):
    matrix = np.column_stack([np.asarray(c, float) for c in columns])
    names = names or [f"c{i}" for i in range(matrix.shape[1])]
    dates = np.datetime64(start) + np.arange(matrix.shape[0])
    return CovariatePanel(dates, names, matrix)


class TestZscoreNormalize:
    def test_symmetric_three_points(self):
        out = zscore_normalize(panel([[1, 2, 3]]))
        assert out.matrix[:, 0] == pytest.approx([-1, 0, 1], abs=1e-12)

    def test_two_level_column(self):
        out = zscore_normalize(panel([[0, 0, 3, 3]]))
        v = 1.5 / math.sqrt(3.0)
        assert out.matrix[:, 0] == pytest.approx([-v, -v, v, v], abs=1e-12)

    def test_constant_column_rejected_by_name(self):
        with pytest.raises(DataError, match="flat"):
            zscore_normalize(panel([[1, 2, 3], [5, 5, 5]], names=["ok", "flat"]))

    def test_moments_after_normalization(self, rng):
        p = panel(rng.normal(3.0, 7.0, size=(4, 200)))
        out = zscore_normalize(p)
        assert np.abs(out.matrix.mean(axis=0)).max() < 1e-10
        assert np.abs(out.matrix.var(axis=0, ddof=1) - 1).max() < 1e-8

    def test_idempotent(self, rng):
        p = panel(rng.normal(size=(3, 50)) * 4 + 2)
        once = zscore_normalize(p)
        twice = zscore_normalize(once)
        assert np.allclose(once.matrix, twice.matrix, atol=1e-10)

    def test_retains_transform_parameters(self):
        out = zscore_normalize(panel([[1, 2, 3]]))
        assert out.norm_means[0] == pytest.approx(2.0)
        assert out.norm_sds[0] == pytest.approx(1.0)


class TestAlign:
    def test_weekend_forward_fill(self):
        # price observed all 7 days, covariate only Mon-Fri
        price = dated(np.arange(7.0) + 1, start="2021-01-04")  # Monday
        cov = DatedSeries(
            np.datetime64("2021-01-04") + np.arange(5), [10, 11, 12, 13, 14.0], "m"
        )
        out_price, out_panel = align(price, [cov])
        assert len(out_price) == 7
        assert out_panel.matrix[5, 0] == 14.0  # Saturday carries Friday
        assert out_panel.matrix[6, 0] == 14.0  # Sunday carries Friday

    def test_leading_gap_drops_price_rows(self):
        price = dated([1, 2, 3, 4, 5, 6])
        cov = DatedSeries(
            np.datetime64("2020-01-04") + np.arange(3), [7.0, 8.0, 9.0], "c"
        )
        out_price, out_panel = align(price, [cov])
        assert len(out_price) == 3
        assert str(out_price.dates[0]) == "2020-01-04"

    def test_identical_calendars_identity_join(self):
        price = dated([1, 2, 3])
        cov = dated([4, 5, 6], name="c")
        out_price, out_panel = align(price, [cov])
        assert np.array_equal(out_price.values, price.values)
        assert np.array_equal(out_panel.matrix[:, 0], cov.values)

    def test_empty_overlap_rejected(self):
        price = dated([1, 2], start="2020-01-01")
        cov = dated([1, 2], start="2021-06-01", name="c")
        with pytest.raises(DataError, match="overlap"):
            align(price, [cov])

    def test_one_row_per_price_date_all_finite(self, rng):
        price = dated(rng.uniform(1, 2, size=30))
        covs = [
            DatedSeries(
                np.datetime64("2020-01-01") + np.sort(
                    rng.choice(40, size=20, replace=False)
                ),
                rng.normal(size=20),
                f"c{i}",
            )
            for i in range(3)
        ]
        out_price, out_panel = align(price, covs)
        assert len(out_price) == out_panel.nrows
        assert np.all(np.isfinite(out_panel.matrix))
        assert np.array_equal(out_price.dates, out_panel.dates)


class TestDescribe:
    def test_small_sample_by_hand(self):
        d = describe(dated([1, 2, 3, 4]))
        assert d.mean == pytest.approx(2.5)
        assert d.variance == pytest.approx(5.0 / 3.0)

    def test_standard_normal_moments(self, rng):
        d = describe(rng.standard_normal(100_000))
        assert 2.9 < d.kurtosis < 3.1
        assert -0.05 < d.skewness < 0.05

    def test_permutation_invariant(self, rng):
        x = rng.normal(size=500)
        d1 = describe(x)
        d2 = describe(x[rng.permutation(500)])
        assert (d1.mean, d1.variance, d1.kurtosis, d1.skewness) == (
            d2.mean, d2.variance, d2.kurtosis, d2.skewness,
        )

    @given(st.lists(st.floats(-100, 100), min_size=4, max_size=80))
    @settings(max_examples=100, deadline=None)
    def test_kurtosis_lower_bound(self, values):
        x = np.asarray(values)
        if x.var() == 0:
            return
        d = describe(x)
        assert d.kurtosis >= d.skewness**2 + 1 - 1e-9
        assert d.variance >= 0

    def test_degenerate_rejected(self):
        with pytest.raises(DataError):
            describe(dated([3, 3, 3, 3]))
        with pytest.raises(DataError):
            describe(dated([1, 2, 3]))


class TestCsv:
    def test_series_roundtrip(self, tmp_path, rng):
        s = dated(rng.uniform(1, 9, 20), name="price")
        path = tmp_path / "p.csv"
        write_series_csv(path, s)
        back = load_series_csv(path)
        assert back.name == "price"
        assert np.array_equal(back.values, s.values)
        assert np.array_equal(back.dates, s.dates)

    def test_wide_covariates_roundtrip(self, tmp_path, rng):
        p = panel(rng.normal(size=(3, 10)), names=["a", "b", "c"])
        path = tmp_path / "c.csv"
        write_panel_csv(path, p)
        covs = load_covariates_csv([path])
        assert [c.name for c in covs] == ["a", "b", "c"]
        assert np.allclose(covs[1].values, p.matrix[:, 1])

    def test_rejects_nan_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,v\n2020-01-01,1.0\n2020-01-02,nan\n")
        with pytest.raises(DataError, match="non-finite"):
            load_series_csv(path)

    def test_rejects_bad_date(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,v\nnot-a-date,1.0\n")
        with pytest.raises(DataError, match="bad date"):
            load_series_csv(path)

    def test_rejects_nonnumeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,v\n2020-01-01,oops\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_series_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_series_csv(tmp_path / "absent.csv")
