"""Linear baseline: VAR(p) least squares, lag-order criteria and Granger F-tests."""

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .errors import DegenerateRss, InputError, SeriesTooShort, SingularDesign

CONDITION_LIMIT = 1e12


@dataclass
class VarModel:
    names: tuple
    order: int
    coefficients: list  # A_1..A_p, each K x K; row = equation
    intercept: np.ndarray
    residuals: np.ndarray
    residual_covariance: np.ndarray  # denominator = number of fitted rows
    std_errors: list  # same layout as coefficients

    @property
    def nobs(self):
        return self.residuals.shape[0]


def _lag_design(values, p, start=None):
    """Rows t = start..T-1 of ``[1, v_{t-1}, ..., v_{t-p}]`` and the matching ``v_t``."""
    start = p if start is None else start
    t = values.shape[0]
    blocks = [np.ones((t - start, 1))]
    for i in range(1, p + 1):
        blocks.append(values[start - i : t - i])
    return np.hstack(blocks), values[start:]


def _lstsq(X, Y):
    beta, _, rank, sv = np.linalg.lstsq(X, Y, rcond=None)
    if rank < X.shape[1] or sv[-1] == 0 or sv[0] / sv[-1] > CONDITION_LIMIT:
        cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
        raise SingularDesign(f"design matrix is numerically singular (condition {cond:.3g})")
    return beta, Y - X @ beta


def _check_order(values, p):
    t, k = values.shape
    if p < 1:
        raise InputError("VAR order must be >= 1")
    if t <= k * p + 10:
        raise SeriesTooShort(f"T = {t} too short for VAR({p}) in {k} variables")


def fit_var(panel, p=1):
    """Equation-by-equation OLS with intercept."""
    v = panel.values
    _check_order(v, p)
    k = v.shape[1]
    X, Y = _lag_design(v, p)
    beta, resid = _lstsq(X, Y)
    n, npar = X.shape
    sigma = resid.T @ resid / n
    # per-equation coefficient standard errors with the dof-corrected variance
    xtx_inv = np.linalg.inv(X.T @ X)
    s2 = np.sum(resid**2, axis=0) / (n - npar)
    se = np.sqrt(np.outer(np.diag(xtx_inv), s2))
    coefs = [beta[1 + i * k : 1 + (i + 1) * k].T.copy() for i in range(p)]
    ses = [se[1 + i * k : 1 + (i + 1) * k].T.copy() for i in range(p)]
    return VarModel(
        names=panel.names,
        order=p,
        coefficients=coefs,
        intercept=beta[0].copy(),
        residuals=resid,
        residual_covariance=sigma,
        std_errors=ses,
    )


def causal_weights(model, target):
    """Linear causal weight of every other variable on ``target``.

    ``|A_1[target, a]|`` for order 1; for higher orders the largest
    absolute coefficient across lags.
    """
    ti = model.names.index(target) if isinstance(target, str) else int(target)
    stacked = np.abs(np.stack([a[ti] for a in model.coefficients]))
    best = stacked.max(axis=0)
    return {name: float(best[j]) for j, name in enumerate(model.names) if j != ti}


@dataclass
class LagSelection:
    per_lag: dict  # p -> {"aic", "bic", "fpe", "hqic"}
    chosen: int
    nobs: int

    def to_json(self, **kw):
        return json.dumps(
            {
                "chosen": self.chosen,
                "nobs": self.nobs,
                "per_lag": {str(p): v for p, v in self.per_lag.items()},
            },
            **kw,
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "aic", "bic", "fpe", "hqic"])
            for p, crit in self.per_lag.items():
                writer.writerow([p, *(repr(crit[c]) for c in ("aic", "bic", "fpe", "hqic"))])


def select_lag(panel, max_lag):
    """Information criteria for VAR(1..max_lag) fitted on a common sample.

    With ``n`` fitted rows, ``K`` variables, ``s = K p + 1`` parameters per
    equation and ``m = K s`` in total, and ``S`` the ML residual covariance:
    AIC = ln|S| + 2m/n, BIC = ln|S| + m ln(n)/n, HQIC = ln|S| + 2m ln(ln n)/n,
    FPE = |S| ((n + s)/(n - s))**K.
    """
    v = panel.values
    _check_order(v, max_lag)
    k = v.shape[1]
    per_lag = {}
    n = v.shape[0] - max_lag
    for p in range(1, max_lag + 1):
        X, Y = _lag_design(v, p, start=max_lag)
        _, resid = _lstsq(X, Y)
        sigma = resid.T @ resid / n
        sign, logdet = np.linalg.slogdet(sigma)
        logdet = float(logdet)
        if sign <= 0:
            raise SingularDesign(f"residual covariance of VAR({p}) is not positive definite")
        s = k * p + 1
        m = k * s
        per_lag[p] = {
            "aic": logdet + 2.0 * m / n,
            "bic": logdet + m * math.log(n) / n,
            "fpe": math.exp(logdet) * ((n + s) / (n - s)) ** k,
            "hqic": logdet + 2.0 * m * math.log(math.log(n)) / n,
        }
    chosen = min(per_lag, key=lambda p: per_lag[p]["aic"])
    return LagSelection(per_lag=per_lag, chosen=chosen, nobs=n)


@dataclass
class GrangerResult:
    target: str
    candidate: str
    f_statistic: float
    p_value: float
    q: int
    nobs: int
    k: int
    rss_restricted: float
    rss_unrestricted: float

    def to_dict(self):
        return asdict(self)


def f_survival(f, d1, d2):
    """P(F > f) for an F(d1, d2) variable via the regularised incomplete beta."""
    if f <= 0:
        return 1.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def granger_f(panel, target, candidate, p=1):
    """F-test that all ``p`` lags of ``candidate`` vanish in the ``target`` equation."""
    if target == candidate:
        raise InputError("candidate must differ from target")
    ti, ci = panel.index(target), panel.index(candidate)
    v = panel.values
    _check_order(v, p)
    kv = v.shape[1]
    X, Y = _lag_design(v, p)
    y = Y[:, ti]
    _, ru = _lstsq(X, y)
    drop = [1 + i * kv + ci for i in range(p)]
    _, rr = _lstsq(np.delete(X, drop, axis=1), y)
    rss_u = float(ru @ ru)
    rss_r = max(float(rr @ rr), rss_u)
    if rss_u < 1e-12:
        raise DegenerateRss(f"unrestricted RSS {rss_u:.3g} is numerically zero")
    n, k = X.shape
    f = ((rss_r - rss_u) / p) / (rss_u / (n - k))
    return GrangerResult(
        target=target,
        candidate=candidate,
        f_statistic=f,
        p_value=f_survival(f, p, n - k),
        q=p,
        nobs=n,
        k=k,
        rss_restricted=rss_r,
        rss_unrestricted=rss_u,
    )
