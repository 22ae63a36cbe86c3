"""Conditional-variance recursions and mean-model residual filters.

Filtering and simulation share ``_sigma2_step`` so that a simulated path
filtered back through its own residuals reproduces the variance path.

Start-up convention for the first observation, given a backcast variance
s0 = sigma_0^2: lagged eps^2 -> s0, lagged eps^2 1{eps<0} -> s0/2,
lagged |eps| -> kappa*sqrt(s0), lagged |eps|1{eps<0} -> kappa*sqrt(s0)/2,
lagged standardized shock terms -> their expectations (|e| - kappa -> 0, e -> 0).
"""

import math

import numpy as np
from numba import njit

VOL_MODELS = (
    "Constant",
    "ARCH(1)",
    "GARCH(1,1)",
    "EGARCH(1,0,1)",
    "EGARCH(1,1,1)",
    "GJR-GARCH(1,1,1)",
    "TARCH(1,1,1)",
)
VOL_CODES = {name: i for i, name in enumerate(VOL_MODELS)}
GARCH_FAMILY = ("GARCH(1,1)", "EGARCH(1,0,1)", "EGARCH(1,1,1)", "GJR-GARCH(1,1,1)", "TARCH(1,1,1)")

_LOG_VAR_BOUND = 700.0


@njit(cache=True)
def _sigma2_step(code, omega, alpha, gamma, beta, kappa, sq, sq_neg, ab, ab_neg, e_abs_dev, e, s2_lag):
    if code == 0:
        return omega
    if code == 1:
        return omega + alpha * sq
    if code == 2:
        return omega + alpha * sq + beta * s2_lag
    if code == 5:
        return omega + alpha * sq + gamma * sq_neg + beta * s2_lag
    if code == 6:
        sd = omega + alpha * ab + gamma * ab_neg + beta * math.sqrt(s2_lag)
        return sd * sd
    lv = omega + alpha * e_abs_dev + beta * math.log(s2_lag)
    if code == 4:
        lv += gamma * e
    lv = min(max(lv, -_LOG_VAR_BOUND), _LOG_VAR_BOUND)
    return math.exp(lv)


@njit(cache=True)
def _startup_step(code, omega, alpha, gamma, beta, kappa, s0):
    sd0 = math.sqrt(s0)
    return _sigma2_step(
        code, omega, alpha, gamma, beta, kappa,
        s0, 0.5 * s0, kappa * sd0, 0.5 * kappa * sd0, 0.0, 0.0, s0,
    )


@njit(cache=True)
def _lagged_step(code, omega, alpha, gamma, beta, kappa, eps, s2):
    neg = 1.0 if eps < 0 else 0.0
    sq = eps * eps
    ab = abs(eps)
    e = eps / math.sqrt(s2)
    return _sigma2_step(
        code, omega, alpha, gamma, beta, kappa,
        sq, sq * neg, ab, ab * neg, abs(e) - kappa, e, s2,
    )


@njit(cache=True)
def variance_filter(code, params, eps, s0):
    """sigma^2 path for residuals ``eps``; params = (omega, alpha, gamma, beta, kappa)."""
    omega, alpha, gamma, beta, kappa = params[0], params[1], params[2], params[3], params[4]
    n = eps.size
    out = np.empty(n)
    if n == 0:
        return out
    out[0] = _startup_step(code, omega, alpha, gamma, beta, kappa, s0)
    for t in range(1, n):
        out[t] = _lagged_step(code, omega, alpha, gamma, beta, kappa, eps[t - 1], out[t - 1])
    return out


@njit(cache=True)
def simulate_errors(code, params, z, s0):
    """Run the recursion forward with innovations ``z``; returns (eps, sigma^2)."""
    omega, alpha, gamma, beta, kappa = params[0], params[1], params[2], params[3], params[4]
    n = z.size
    eps = np.empty(n)
    s2 = np.empty(n)
    if n == 0:
        return eps, s2
    s2[0] = _startup_step(code, omega, alpha, gamma, beta, kappa, s0)
    eps[0] = math.sqrt(s2[0]) * z[0]
    for t in range(1, n):
        s2[t] = _lagged_step(code, omega, alpha, gamma, beta, kappa, eps[t - 1], s2[t - 1])
        eps[t] = math.sqrt(s2[t]) * z[t]
    return eps, s2


@njit(cache=True)
def arma_residuals(y, ar, ma, start):
    """eps_t = y_t - sum_i ar_i y_{t-i} - ma * eps_{t-1}, for t >= start.

    The moving-average recursion starts from eps_{start-1} = 0.
    """
    n = y.size
    p = ar.size
    out = np.empty(n - start)
    prev = 0.0
    for t in range(start, n):
        m = 0.0
        for i in range(p):
            m += ar[i] * y[t - 1 - i]
        eps = y[t] - m - ma * prev
        out[t - start] = eps
        prev = eps
    return out


@njit(cache=True)
def log_variance_term(s2):
    """-0.5 * sum(log sigma_t^2); the density term is added separately."""
    total = 0.0
    for t in range(s2.size):
        total -= 0.5 * math.log(s2[t])
    return total
