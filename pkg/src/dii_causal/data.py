"""Panel ingestion, return computation, standardisation and diagnostics."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    InputError,
    MalformedInput,
    NonFinite,
    SeriesTooShort,
    UnknownVariable,
    ZeroPrice,
)

log = logging.getLogger(__name__)

# Dickey-Fuller critical values (constant, no trend, large sample).
ADF_CRITICAL_VALUES = {"1%": -3.432621, "5%": -2.862543, "10%": -2.567304}


@dataclass(frozen=True)
class TimeSeriesPanel:
    """A T x D block of observations with named columns and optional dates."""

    names: tuple
    values: np.ndarray
    times: tuple = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatch("values must be a T x D matrix")
        t, d = values.shape
        if d < 1 or d != len(names):
            raise DimensionMismatch(f"{len(names)} names for {d} columns")
        if t < 2:
            raise SeriesTooShort(f"need at least 2 rows, got {t}")
        if len(set(names)) != len(names):
            raise InputError(f"duplicate variable names in {names}")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise NonFinite(int(r), names[c])
        times = None if self.times is None else tuple(str(s) for s in self.times)
        if times is not None and len(times) != t:
            raise DimensionMismatch(f"{len(times)} timestamps for {t} rows")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)

    @property
    def shape(self):
        return self.values.shape

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariable(name) from None

    def column(self, name):
        return self.values[:, self.index(name)]

    def select(self, names):
        cols = [self.index(n) for n in names]
        return TimeSeriesPanel(tuple(names), self.values[:, cols], self.times)

    def with_values(self, values, times=None):
        return TimeSeriesPanel(self.names, values, self.times if times is None else times)


def read_csv(path):
    """Read a panel from CSV.

    The header holds variable names; an optional first column named ``date``
    holds timestamps. Rows with any empty field are dropped (count logged);
    a ragged row or unparseable number raises :class:`MalformedInput` with
    the 1-based line number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedInput(f"{path}: empty file") from None
        has_date = bool(header) and header[0].lower() == "date"
        names = header[1:] if has_date else header
        if not names:
            raise MalformedInput(f"{path}: no variable columns in header")
        rows, times, dropped = [], [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise MalformedInput(
                    f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}"
                )
            fields = [f.strip() for f in row]
            data = fields[1:] if has_date else fields
            if any(f == "" or f.lower() in ("nan", "na") for f in data):
                dropped += 1
                continue
            try:
                rows.append([float(f) for f in data])
            except ValueError:
                raise MalformedInput(f"{path}: line {lineno} has a non-numeric field") from None
            if has_date:
                times.append(fields[0])
    if dropped:
        log.warning("dropped %d rows with missing values from %s", dropped, path)
    if len(rows) < 2:
        raise SeriesTooShort(f"{path}: fewer than 2 complete rows")
    values = np.array(rows)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonFinite(int(r), names[c], f"{path}: non-finite value in column {names[c]!r}")
    return TimeSeriesPanel(tuple(names), values, tuple(times) if has_date else None)


def write_csv(panel, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if panel.times is not None:
            writer.writerow(["date", *panel.names])
            for t, row in zip(panel.times, panel.values):
                writer.writerow([t, *(repr(float(v)) for v in row)])
        else:
            writer.writerow(panel.names)
            for row in panel.values:
                writer.writerow([repr(float(v)) for v in row])


def compute_returns(prices):
    """Simple returns ``(P[t+1] - P[t]) / P[t]``; output row t is dated at t."""
    p = prices.values
    zero = np.argwhere(p[:-1] == 0)
    if len(zero):
        r, c = zero[0]
        raise ZeroPrice(int(r), prices.names[c])
    ret = (p[1:] - p[:-1]) / p[:-1]
    times = None if prices.times is None else prices.times[:-1]
    return TimeSeriesPanel(prices.names, ret, times)


def standardize(panel):
    """Centre each column and scale it to unit sample standard deviation."""
    v = panel.values
    sd = v.std(axis=0, ddof=1)
    for name, s in zip(panel.names, sd):
        if s == 0:
            raise ConstantColumn(name)
    return panel.with_values((v - v.mean(axis=0)) / sd)


@dataclass(frozen=True)
class DescriptiveStats:
    names: tuple
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    p25: np.ndarray
    p50: np.ndarray
    p75: np.ndarray
    max: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray

    def rows(self):
        cols = ("mean", "std", "min", "p25", "p50", "p75", "max", "skewness", "kurtosis")
        for i, name in enumerate(self.names):
            yield {"variable": name, **{c: float(getattr(self, c)[i]) for c in cols}}


def descriptive_stats(panel):
    """Moments and quartiles per column.

    Skewness is the standardised third central moment and kurtosis the raw
    (non-excess) fourth, both with population (1/T) moments; quartiles use
    linear interpolation between order statistics. A zero-variance column
    reports NaN skewness and kurtosis.
    """
    v = panel.values
    mean = v.mean(axis=0)
    centred = v - mean
    m2 = np.mean(centred**2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        skew = np.where(m2 > 0, np.mean(centred**3, axis=0) / m2**1.5, np.nan)
        kurt = np.where(m2 > 0, np.mean(centred**4, axis=0) / m2**2, np.nan)
    p25, p50, p75 = np.percentile(v, [25, 50, 75], axis=0, method="linear")
    return DescriptiveStats(
        names=panel.names,
        mean=mean,
        std=v.std(axis=0, ddof=1),
        min=v.min(axis=0),
        p25=p25,
        p50=p50,
        p75=p75,
        max=v.max(axis=0),
        skewness=skew,
        kurtosis=kurt,
    )


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    p_value: float
    stationary: bool
    used_lag: int
    nobs: int
    critical_values: dict = field(default_factory=lambda: dict(ADF_CRITICAL_VALUES))


def adf_p_value(statistic):
    """Piecewise-linear interpolation through the tabulated critical values.

    Outside the tabulated range the end segments are extended and the result
    clamped to [0.001, 0.999].
    """
    xs = [ADF_CRITICAL_VALUES["1%"], ADF_CRITICAL_VALUES["5%"], ADF_CRITICAL_VALUES["10%"]]
    ps = [0.01, 0.05, 0.10]
    if statistic <= xs[1]:
        x0, x1, p0, p1 = xs[0], xs[1], ps[0], ps[1]
    else:
        x0, x1, p0, p1 = xs[1], xs[2], ps[1], ps[2]
    p = p0 + (statistic - x0) * (p1 - p0) / (x1 - x0)
    return float(min(max(p, 0.001), 0.999))


def _adf_design(y, lag, start):
    """Regress dy_t on [1, y_{t-1}, dy_{t-1}, ..., dy_{t-lag}] for t >= start."""
    dy = np.diff(y)
    # dy[t-1] = y[t] - y[t-1]; index rows by t in [start, len(y))
    t = np.arange(start, len(y))
    cols = [np.ones(len(t)), y[t - 1]]
    for j in range(1, lag + 1):
        cols.append(dy[t - 1 - j])
    return np.column_stack(cols), dy[t - 1]


def _ols(X, y):
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid, rank


def adf_test(series, max_lag=None):
    """Augmented Dickey-Fuller test with a constant and no trend.

    The number of lagged differences is chosen by AIC over ``0..max_lag`` on a
    common sample, then the chosen regression is refitted on all usable
    observations. ``max_lag`` defaults to ``12 * (T/100)**0.25``.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n < 25:
        raise SeriesTooShort(f"ADF needs at least 25 observations, got {n}")
    if not np.all(np.isfinite(y)):
        raise InputError("series contains non-finite values")
    if max_lag is None:
        max_lag = int(math.ceil(12.0 * (n / 100.0) ** 0.25))
    if max_lag < 0:
        raise InputError("max_lag must be >= 0")
    max_lag = min(max_lag, n // 2 - 3)
    start = max_lag + 1
    best_lag, best_aic = 0, np.inf
    for lag in range(max_lag + 1):
        X, dy = _adf_design(y, lag, start)
        _, resid, _ = _ols(X, dy)
        m = len(dy)
        rss = float(resid @ resid)
        if rss <= 0:
            aic = -np.inf
        else:
            aic = m * math.log(rss / m) + 2 * X.shape[1]
        if aic < best_aic:
            best_lag, best_aic = lag, aic
    X, dy = _adf_design(y, best_lag, best_lag + 1)
    beta, resid, rank = _ols(X, dy)
    m, k = X.shape
    if rank < k:
        raise InputError("ADF regression is singular (constant series?)")
    sigma2 = float(resid @ resid) / (m - k)
    cov = sigma2 * np.linalg.inv(X.T @ X)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))
    return AdfResult(
        statistic=stat,
        p_value=adf_p_value(stat),
        stationary=stat < ADF_CRITICAL_VALUES["5%"],
        used_lag=best_lag,
        nobs=m,
    )


def acf(series, max_lag):
    """Sample autocorrelations at lags ``0..max_lag`` (biased 1/T autocovariance)."""
    y = np.asarray(series, dtype=float)
    n = len(y)
    if not 0 <= max_lag < n:
        raise InputError(f"max_lag must lie in [0, {n - 1}]")
    yc = y - y.mean()
    denom = float(yc @ yc)
    if denom == 0:
        raise ConstantColumn("series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for h in range(1, max_lag + 1):
        out[h] = float(yc[h:] @ yc[:-h]) / denom
    return out


def pacf(series, max_lag):
    """Partial autocorrelations by the Durbin-Levinson recursion on :func:`acf`."""
    y = np.asarray(series, dtype=float)
    if not 0 <= max_lag < len(y) / 2:
        raise InputError("max_lag must be below T/2")
    rho = acf(y, max_lag)
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    phi = np.zeros(max_lag + 1)
    prev = np.zeros(max_lag + 1)
    for h in range(1, max_lag + 1):
        num = rho[h] - np.dot(prev[1:h], rho[h - 1:0:-1])
        den = 1.0 - np.dot(prev[1:h], rho[1:h])
        phi_hh = num / den
        phi[h] = phi_hh
        phi[1:h] = prev[1:h] - phi_hh * prev[h - 1:0:-1]
        out[h] = phi_hh
        prev[: h + 1] = phi[: h + 1]
    return out
