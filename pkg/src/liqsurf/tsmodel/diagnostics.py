"""Score-series diagnostics: ACF, ADF, no-intercept AR(1) and reversion time."""

import math
from typing import NamedTuple

import numpy as np
from statsmodels.tsa.stattools import adfuller

from .._validation import check_series
from ..exceptions import UndefinedVarianceError, ValidationError


class ACF(NamedTuple):
    values: np.ndarray
    band: float  # 95% pointwise cutoff 1.96/sqrt(T)


class ADFResult(NamedTuple):
    statistic: float
    p_value: float
    used_lag: int
    nobs: int


def acf(series, max_lag):
    """Sample autocorrelations at lags 0..max_lag."""
    y = check_series(series)
    if int(max_lag) != max_lag or max_lag < 0 or max_lag >= y.size:
        raise ValidationError(f"max_lag must be in [0, {y.size - 1}], got {max_lag}")
    d = y - y.mean()
    denom = float(d @ d)
    if denom == 0 or np.all(y == y[0]):
        raise UndefinedVarianceError("autocorrelation of a constant series")
    vals = np.array([1.0] + [float(d[k:] @ d[:-k]) / denom for k in range(1, int(max_lag) + 1)])
    return ACF(vals, 1.96 / math.sqrt(y.size))


def fit_ar1(series):
    """Least-squares phi for y_t = phi * y_{t-1} + e_t (no intercept)."""
    y = check_series(series, min_length=3)
    x = y[:-1]
    sxx = float(x @ x)
    if sxx == 0:
        raise UndefinedVarianceError("AR(1) regressor has zero variance")
    phi = float(x @ y[1:]) / sxx
    return phi, y[1:] - phi * x


def acf_squared_ar1_residuals(series, max_lag):
    _, resid = fit_ar1(series)
    return acf(resid**2, max_lag)


def mean_reversion_time(phi):
    """-1/log|phi| in sampling intervals; inf for |phi| >= 1 and 0 for phi = 0."""
    a = abs(float(phi))
    if a == 0:
        return 0.0
    if a >= 1:
        return math.inf
    return -1.0 / math.log(a)


def adf_test(series):
    """Augmented Dickey-Fuller test with constant and linear trend.

    Lag order is chosen by AIC up to floor(12 (T/100)^(1/4)); the p-value
    comes from MacKinnon's response-surface approximation.
    """
    y = check_series(series)
    if y.size < 25:
        raise ValidationError(f"ADF needs at least 25 observations, got {y.size}")
    if np.all(y == y[0]):
        raise UndefinedVarianceError("ADF test on a constant series")
    maxlag = int(12 * (y.size / 100) ** 0.25)
    stat, p, used, nobs, *_ = adfuller(y, maxlag=maxlag, regression="ct", autolag="AIC")
    return ADFResult(float(stat), float(p), int(used), int(nobs))
