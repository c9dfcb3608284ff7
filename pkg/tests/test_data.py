import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from dii_causal.data import (
    TimeSeriesPanel,
    acf,
    adf_p_value,
    adf_test,
    compute_returns,
    descriptive_stats,
    pacf,
    read_csv,
    standardize,
    write_csv,
)
from dii_causal.errors import (
    ConstantColumn,
    DimensionMismatch,
    InputError,
    MalformedInput,
    NonFinite,
    SeriesTooShort,
    UnknownVariable,
    ZeroPrice,
)

statsmodels = pytest.importorskip("statsmodels.tsa.stattools")


def test_panel_validation():
    with pytest.raises(NonFinite) as e:
        TimeSeriesPanel(("a", "b"), [[1.0, 2.0], [np.nan, 1.0]])
    assert e.value.row == 1 and e.value.col == "a"
    with pytest.raises(DimensionMismatch):
        TimeSeriesPanel(("a",), [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(InputError):
        TimeSeriesPanel(("a", "a"), [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(SeriesTooShort):
        TimeSeriesPanel(("a",), [[1.0]])
    p = TimeSeriesPanel(("a", "b"), [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(UnknownVariable):
        p.column("c")
    assert not p.values.flags.writeable


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    p = TimeSeriesPanel(("eua", "gas"), rng.normal(size=(7, 2)), [f"2021-01-0{i + 1}" for i in range(7)])
    path = tmp_path / "p.csv"
    write_csv(p, path)
    q = read_csv(path)
    assert q.names == p.names and q.times == p.times
    assert np.array_equal(q.values, p.values)


def test_csv_without_dates(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n1,2\n3,4\n5,6\n")
    p = read_csv(path)
    assert p.times is None and p.shape == (3, 2)


def test_csv_drops_missing_rows(tmp_path, caplog):
    path = tmp_path / "p.csv"
    path.write_text("date,a,b\nd1,1,2\nd2,,4\nd3,5,NaN\nd4,7,8\n")
    with caplog.at_level(logging.WARNING):
        p = read_csv(path)
    assert p.times == ("d1", "d4")
    assert "dropped 2 rows" in caplog.text


def test_csv_ragged_row_reports_line(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n1,2\n3,4,5\n")
    with pytest.raises(MalformedInput, match="line 3"):
        read_csv(path)


def test_csv_non_numeric(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n1,2\n3,x\n")
    with pytest.raises(MalformedInput, match="line 3"):
        read_csv(path)


def test_returns_values_and_dates():
    prices = TimeSeriesPanel(("p",), [100.0, 110.0, 99.0], ("d0", "d1", "d2"))
    r = compute_returns(prices)
    np.testing.assert_allclose(r.values[:, 0], [0.1, -0.1])
    assert r.times == ("d0", "d1")


def test_returns_zero_price():
    with pytest.raises(ZeroPrice) as e:
        compute_returns(TimeSeriesPanel(("p", "q"), [[1.0, 2.0], [2.0, 0.0], [3.0, 1.0]]))
    assert (e.value.row, e.value.col) == (1, "q")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 40), st.integers(1, 4)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_standardize_moments(x):
    if np.any(np.ptp(x, axis=0) < 1e-3):
        return
    z = standardize(TimeSeriesPanel(tuple(f"c{i}" for i in range(x.shape[1])), x)).values
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(z.std(axis=0, ddof=1), 1, rtol=1e-10)


def test_standardize_constant_column():
    with pytest.raises(ConstantColumn, match="b"):
        standardize(TimeSeriesPanel(("a", "b"), [[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))


def test_standardize_invariant_to_column_scale():
    x = np.random.default_rng(1).normal(size=(50, 3))
    y = x.copy()
    y[:, 1] *= 1000.0
    a = standardize(TimeSeriesPanel(("a", "b", "c"), x)).values
    b = standardize(TimeSeriesPanel(("a", "b", "c"), y)).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_descriptive_stats_against_scipy():
    x = np.random.default_rng(2).gamma(2.0, size=(500, 2))
    d = descriptive_stats(TimeSeriesPanel(("a", "b"), x))
    np.testing.assert_allclose(d.skewness, stats.skew(x, axis=0), rtol=1e-12)
    np.testing.assert_allclose(d.kurtosis, stats.kurtosis(x, axis=0, fisher=False), rtol=1e-12)
    np.testing.assert_allclose(d.p50, np.median(x, axis=0))
    assert list(d.rows())[0]["variable"] == "a"


def test_descriptive_zero_variance():
    d = descriptive_stats(TimeSeriesPanel(("a",), [1.0, 1.0, 1.0]))
    assert np.isnan(d.skewness[0]) and np.isnan(d.kurtosis[0])
    assert d.std[0] == 0


def test_adf_p_value_interpolation():
    assert adf_p_value(-2.862543) == pytest.approx(0.05)
    assert adf_p_value(-3.432621) == pytest.approx(0.01)
    assert adf_p_value(-2.567304) == pytest.approx(0.10)
    assert adf_p_value(-30.0) == 0.001
    assert adf_p_value(5.0) == 0.999


@pytest.mark.parametrize("max_lag", [0, 2, 8])
def test_adf_matches_statsmodels(max_lag):
    rng = np.random.default_rng(3)
    y = np.cumsum(rng.normal(size=300)) * 0.1 + rng.normal(size=300)
    ours = adf_test(y, max_lag=max_lag)
    ref = statsmodels.adfuller(y, maxlag=max_lag, regression="c", autolag="AIC" if max_lag else None)
    assert ours.statistic == pytest.approx(ref[0], rel=1e-10)
    assert ours.used_lag == ref[2]
    assert ours.nobs == ref[3]


def test_adf_separates_stationary_from_random_walk():
    rng = np.random.default_rng(4)
    e = rng.normal(size=1000)
    assert adf_test(e).stationary
    assert not adf_test(np.cumsum(e)).stationary


def test_adf_short_series():
    with pytest.raises(SeriesTooShort):
        adf_test(np.arange(10.0))


def test_acf_pacf_match_statsmodels():
    rng = np.random.default_rng(5)
    y = rng.normal(size=400)
    for t in range(1, 400):
        y[t] += 0.6 * y[t - 1]
    np.testing.assert_allclose(acf(y, 10), statsmodels.acf(y, nlags=10), atol=1e-12)
    np.testing.assert_allclose(pacf(y, 10), statsmodels.pacf(y, nlags=10, method="ldb"), atol=1e-12)


def test_pacf_of_ar1_cuts_off():
    rng = np.random.default_rng(6)
    y = np.zeros(5000)
    for t in range(1, 5000):
        y[t] = 0.5 * y[t - 1] + rng.normal()
    p = pacf(y, 5)
    assert p[1] == pytest.approx(0.5, abs=0.05)
    assert np.all(np.abs(p[2:]) < 0.05)
