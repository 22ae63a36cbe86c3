"""Unit-variance innovation laws: normal, Student t, Hansen skew-t, GED.

Shape parameters are passed as a tuple: ``()`` for normal, ``(nu,)`` for t,
``(nu, lam)`` for skew-t and ``(shape,)`` for GED (restricted to shape > 2).
"""

import math

import numpy as np
from numba import njit
from scipy import integrate
from scipy.special import gammaln, stdtr

from ..exceptions import ValidationError

DISTRIBUTIONS = ("normal", "t", "skewt", "ged")
DIST_CODES = {name: i for i, name in enumerate(DISTRIBUTIONS)}
N_SHAPE = {"normal": 0, "t": 1, "skewt": 2, "ged": 1}
DEFAULT_SHAPE = {"normal": (), "t": (8.0,), "skewt": (8.0, 0.0), "ged": (2.5,)}
SHAPE_NAMES = {"normal": (), "t": ("nu",), "skewt": ("nu", "lambda"), "ged": ("shape",)}

_LOG_PI = math.log(math.pi)
_LOG_2 = math.log(2.0)


def check_dist(dist, shape=None):
    if dist not in DIST_CODES:
        raise ValidationError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")
    if shape is None:
        return DEFAULT_SHAPE[dist]
    shape = tuple(float(s) for s in shape)
    if len(shape) != N_SHAPE[dist]:
        raise ValidationError(f"{dist} takes {N_SHAPE[dist]} shape parameters, got {len(shape)}")
    if dist in ("t", "skewt") and not shape[0] > 2:
        raise ValidationError(f"degrees of freedom must exceed 2, got {shape[0]}")
    if dist == "skewt" and not abs(shape[1]) < 1:
        raise ValidationError(f"skew parameter must lie in (-1, 1), got {shape[1]}")
    if dist == "ged" and not shape[0] > 2:
        raise ValidationError(f"GED shape is restricted to values above 2, got {shape[0]}")
    return shape


@njit(cache=True)
def _t_log_const(nu):
    return math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * (_LOG_PI + math.log(nu - 2))


@njit(cache=True)
def _logpdf_kernel(code, shape, z, out):
    n = z.size
    if code == 0:
        c = -0.5 * math.log(2 * math.pi)
        for i in range(n):
            out[i] = c - 0.5 * z[i] * z[i]
    elif code == 1:
        nu = shape[0]
        c = _t_log_const(nu)
        for i in range(n):
            out[i] = c - (nu + 1) / 2 * math.log1p(z[i] * z[i] / (nu - 2))
    elif code == 2:
        nu = shape[0]
        lam = shape[1]
        logc = _t_log_const(nu)
        a = 4 * lam * math.exp(logc) * (nu - 2) / (nu - 1)
        b = math.sqrt(1 + 3 * lam * lam - a * a)
        head = math.log(b) + logc
        for i in range(n):
            s = 1 - lam if z[i] < -a / b else 1 + lam
            u = (b * z[i] + a) / s
            out[i] = head - (nu + 1) / 2 * math.log1p(u * u / (nu - 2))
    else:
        p = shape[0]
        log_scale = 0.5 * (-2.0 / p * _LOG_2 + math.lgamma(1 / p) - math.lgamma(3 / p))
        scale = math.exp(log_scale)
        head = math.log(p) - log_scale - (1 + 1 / p) * _LOG_2 - math.lgamma(1 / p)
        for i in range(n):
            out[i] = head - 0.5 * abs(z[i] / scale) ** p
    return out


def log_density(dist, z, shape=None):
    """Log density of the unit-variance innovation law at ``z``."""
    shape = check_dist(dist, shape)
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = _logpdf_kernel(
        DIST_CODES[dist], np.asarray(shape, dtype=float), z_arr.ravel(), np.empty(z_arr.size)
    ).reshape(z_arr.shape)
    return float(out[0]) if np.ndim(z) == 0 else out


def _skewt_ab(nu, lam):
    c = math.exp(gammaln((nu + 1) / 2) - gammaln(nu / 2)) / math.sqrt(math.pi * (nu - 2))
    a = 4 * lam * c * (nu - 2) / (nu - 1)
    return a, math.sqrt(1 + 3 * lam * lam - a * a)


def _ged_scale(p):
    return math.sqrt(2 ** (-2 / p) * math.exp(gammaln(1 / p) - gammaln(3 / p)))


def abs_moment(dist, shape=None):
    """E|Z| under the unit-variance law (centring constant for EGARCH)."""
    shape = check_dist(dist, shape)
    if dist == "normal":
        return math.sqrt(2 / math.pi)
    if dist == "t":
        nu = shape[0]
        return (
            2 * math.sqrt(nu - 2) * math.exp(gammaln((nu + 1) / 2) - gammaln(nu / 2))
            / (math.sqrt(math.pi) * (nu - 1))
        )
    if dist == "ged":
        p = shape[0]
        return _ged_scale(p) * 2 ** (1 / p) * math.exp(gammaln(2 / p) - gammaln(1 / p))
    return _skewt_abs_moment(*shape)


def _t_partial(nu, x):
    """(F(x), int_{-inf}^x t f(t) dt) for the standard Student t."""
    if x == -np.inf:
        return 0.0, 0.0
    log_pdf = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(nu * math.pi) \
        - (nu + 1) / 2 * math.log1p(x * x / nu)
    return float(stdtr(nu, x)), -(nu + x * x) / (nu - 1) * math.exp(log_pdf)


def _skewt_abs_moment(nu, lam):
    # W = bZ + a is a two-piece scaled t with E[W] = a, so
    # E|Z| = 2 E[(a - W)^+] / b, computed from Student t partial moments.
    a, b = _skewt_ab(nu, lam)
    r = math.sqrt((nu - 2) / nu)

    def piece(s, lo, hi):
        F_lo, P_lo = _t_partial(nu, lo / (s * r))
        F_hi, P_hi = _t_partial(nu, hi / (s * r))
        return s * (a * (F_hi - F_lo) - s * r * (P_hi - P_lo))

    if a <= 0:
        total = piece(1 - lam, -np.inf, a)
    else:
        total = piece(1 - lam, -np.inf, 0.0) + piece(1 + lam, 0.0, a)
    return 2 * total / b


def _skewt_abs_moment_quad(nu, lam):
    """E|Z| for the skew-t by adaptive quadrature (reference route)."""
    a, b = _skewt_ab(nu, lam)
    shape = (nu, lam)
    kink = -a / b
    sh = np.array(shape)

    def f(z):
        return abs(z) * math.exp(_logpdf_kernel(2, sh, np.array([z]), np.empty(1))[0])

    pts = sorted({kink, 0.0})
    total = 0.0
    edges = [-np.inf] + pts + [np.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)[0]
    return total


def sample(dist, shape, size, rng=None):
    """Draw unit-variance innovations."""
    shape = check_dist(dist, shape)
    rng = np.random.default_rng(rng)
    if dist == "normal":
        return rng.standard_normal(size)
    if dist == "t":
        nu = shape[0]
        return rng.standard_t(nu, size) * math.sqrt((nu - 2) / nu)
    if dist == "skewt":
        nu, lam = shape
        a, b = _skewt_ab(nu, lam)
        w = np.abs(rng.standard_t(nu, size)) * math.sqrt((nu - 2) / nu)
        # left branch carries probability (1 - lam)/2
        left = rng.random(size) < (1 - lam) / 2
        return np.where(left, -(1 - lam) * w, (1 + lam) * w) / b - a / b
    p = shape[0]
    g = rng.gamma(1 / p, 1.0, size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * _ged_scale(p) * (2 * g) ** (1 / p)


# -- unconstrained parameterisation ------------------------------------------


def shape_to_free(dist, shape):
    if dist == "normal":
        return []
    if dist == "t":
        return [math.log(shape[0] - 2)]
    if dist == "skewt":
        return [math.log(shape[0] - 2), math.atanh(shape[1])]
    return [math.log(shape[0] - 2)]


def shape_from_free(dist, free):
    if dist == "normal":
        return ()
    # cap the exponent so extreme steps stay finite
    nu = 2 + math.exp(min(free[0], 15.0))
    if dist == "skewt":
        return (nu, math.tanh(free[1]))
    return (nu,)
