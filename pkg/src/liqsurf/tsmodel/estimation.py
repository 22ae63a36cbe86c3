"""Maximum-likelihood fitting of mean x volatility x innovation models and BIC sweeps."""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_series
from ..exceptions import SweepError, ValidationError
from . import distributions as dists
from .recursions import (
    GARCH_FAMILY,
    VOL_CODES,
    VOL_MODELS,
    arma_residuals,
    log_variance_term,
    simulate_errors,
    variance_filter,
)

MEAN_MODELS = ("AR(1)", "AR(2)", "AR(3)", "ARMA(1,1)", "Zero")
_AR_ORDER = {"AR(1)": 1, "AR(2)": 2, "AR(3)": 3, "ARMA(1,1)": 1, "Zero": 0}
_N_VOL = {
    "Constant": 1,
    "ARCH(1)": 2,
    "GARCH(1,1)": 3,
    "EGARCH(1,0,1)": 3,
    "EGARCH(1,1,1)": 4,
    "GJR-GARCH(1,1,1)": 4,
    "TARCH(1,1,1)": 4,
}
EVIDENCE_CUTOFFS = (
    (2.0, "not worth a bare mention"),
    (6.0, "positive"),
    (10.0, "strong"),
    (math.inf, "very strong"),
)
SWEEP_HEADER = ["series_id", "mean", "vol", "dist", "converged", "loglik", "d", "bic", "delta_bic", "label"]
REL_TOL = 1e-8
FREE_BOUND = 12.0
PENALTY = 1e-3


@dataclass(frozen=True)
class ModelSpec:
    mean: str = "AR(1)"
    vol: str = "GARCH(1,1)"
    dist: str = "normal"

    def __post_init__(self):
        if self.mean not in MEAN_MODELS:
            raise ValidationError(f"unknown mean model {self.mean!r}; expected one of {MEAN_MODELS}")
        if self.vol not in VOL_CODES:
            raise ValidationError(f"unknown volatility model {self.vol!r}; expected one of {VOL_MODELS}")
        dists.check_dist(self.dist)

    def __str__(self):
        return f"{self.mean}-{self.vol}-{self.dist}"

    @property
    def n_params(self):
        n_mean = 2 if self.mean == "ARMA(1,1)" else _AR_ORDER[self.mean]
        return n_mean + _N_VOL[self.vol] + dists.N_SHAPE[self.dist]


@dataclass(frozen=True)
class VolParams:
    omega: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    kappa: float = math.sqrt(2 / math.pi)

    def as_array(self):
        return np.array([self.omega, self.alpha, self.gamma, self.beta, self.kappa])

    def check(self, vol):
        """Raise if the parameters violate the positivity constraints of ``vol``."""
        if vol in ("EGARCH(1,0,1)", "EGARCH(1,1,1)"):
            if not all(map(math.isfinite, (self.omega, self.alpha, self.beta, self.gamma))):
                raise ValidationError("EGARCH parameters must be finite")
            return
        if not self.omega > 0:
            raise ValidationError(f"{vol}: omega must be positive, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError(f"{vol}: alpha and beta must be non-negative")
        if vol in ("GJR-GARCH(1,1,1)", "TARCH(1,1,1)") and self.alpha + self.gamma < 0:
            raise ValidationError(f"{vol}: alpha + gamma must be non-negative")

    def is_stationary(self, vol):
        if vol == "GARCH(1,1)":
            return self.alpha + self.beta < 1
        if vol == "GJR-GARCH(1,1,1)":
            return self.alpha + self.gamma / 2 + self.beta < 1
        if vol == "TARCH(1,1,1)":
            return (self.alpha + self.gamma / 2) * self.kappa + self.beta < 1
        if vol in ("EGARCH(1,0,1)", "EGARCH(1,1,1)"):
            return abs(self.beta) < 1
        if vol == "ARCH(1)":
            return self.alpha < 1
        return vol == "Constant"


@dataclass
class TsFit:
    spec: ModelSpec
    mean_params: dict
    vol_params: VolParams
    dist_params: dict
    loglik: float
    bic: float
    n_params: int
    nobs: int
    converged: bool
    sigma_path: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    init_loglik: float = -math.inf

    def to_dict(self, include_sigma=False):
        out = {
            "mean": self.spec.mean,
            "vol": self.spec.vol,
            "dist": self.spec.dist,
            "mean_params": self.mean_params,
            "vol_params": {
                "omega": self.vol_params.omega,
                "alpha": self.vol_params.alpha,
                "beta": self.vol_params.beta,
                "gamma": self.vol_params.gamma,
                "kappa": self.vol_params.kappa,
            },
            "dist_params": self.dist_params,
            "loglik": self.loglik,
            "bic": self.bic,
            "d": self.n_params,
            "nobs": self.nobs,
            "converged": self.converged,
            "stationary": bool(self.vol_params.is_stationary(self.spec.vol)),
        }
        if include_sigma:
            out["sigma_path"] = self.sigma_path.tolist()
        return out


def bic(loglik, d, T):
    """-2 loglik + d log T"""
    if T < 1 or d < 0:
        raise ValidationError("BIC needs T >= 1 and d >= 0")
    return -2.0 * loglik + d * math.log(T)


def evidence_label(delta):
    """Kass-Raftery evidence band for a BIC difference against the best model."""
    if delta == 0:
        return "—"
    if delta < 0:
        raise ValidationError("BIC differences are measured against the minimum")
    for cutoff, label in EVIDENCE_CUTOFFS:
        if delta < cutoff:
            return label


# -- parameter packing --------------------------------------------------------


def _softmax_last_zero(u):
    z = np.append(np.asarray(u, dtype=float), 0.0)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def _logit(p):
    return math.log(p / (1 - p))


def _vol_from_free(vol, u, kappa):
    if vol == "Constant":
        return VolParams(math.exp(u[0]), kappa=kappa)
    if vol == "ARCH(1)":
        return VolParams(math.exp(u[0]), alpha=float(expit(u[1])), kappa=kappa)
    if vol == "GARCH(1,1)":
        p = float(expit(u[1]))
        s = _softmax_last_zero(u[2:3])
        return VolParams(math.exp(u[0]), alpha=p * s[0], beta=p * s[1], kappa=kappa)
    if vol in ("GJR-GARCH(1,1,1)", "TARCH(1,1,1)"):
        # persistence p = c (a1 + a2)/2 + beta with a1 = alpha, a2 = alpha + gamma,
        # c = 1 for squared shocks and c = kappa for absolute shocks
        c = kappa if vol == "TARCH(1,1,1)" else 1.0
        p = float(expit(u[1]))
        s = _softmax_last_zero(u[2:4])
        a1, a2 = 2 * p * s[0] / c, 2 * p * s[1] / c
        return VolParams(math.exp(u[0]), alpha=a1, beta=p * s[2], gamma=a2 - a1, kappa=kappa)
    beta = math.tanh(u[-1])
    gamma = float(u[2]) if vol == "EGARCH(1,1,1)" else 0.0
    return VolParams(float(u[0]), alpha=float(u[1]), beta=beta, gamma=gamma, kappa=kappa)


def _vol_to_free(vol, vp):
    if vol == "Constant":
        return [math.log(vp.omega)]
    if vol == "ARCH(1)":
        return [math.log(vp.omega), _logit(vp.alpha)]
    if vol == "GARCH(1,1)":
        p = vp.alpha + vp.beta
        return [math.log(vp.omega), _logit(p), math.log(vp.alpha / vp.beta)]
    if vol in ("GJR-GARCH(1,1,1)", "TARCH(1,1,1)"):
        c = vp.kappa if vol == "TARCH(1,1,1)" else 1.0
        a1, a2 = c * vp.alpha, c * (vp.alpha + vp.gamma)
        p = (a1 + a2) / 2 + vp.beta
        s = np.array([a1 / (2 * p), a2 / (2 * p), vp.beta / p])
        return [math.log(vp.omega), _logit(p), math.log(s[0] / s[2]), math.log(s[1] / s[2])]
    out = [vp.omega, vp.alpha]
    if vol == "EGARCH(1,1,1)":
        out.append(vp.gamma)
    return out + [math.atanh(vp.beta)]


def _mean_from_free(mean, u):
    if mean == "ARMA(1,1)":
        return np.array([u[0]]), math.tanh(u[1])
    return np.asarray(u, dtype=float), 0.0


def _n_mean(mean):
    return 2 if mean == "ARMA(1,1)" else _AR_ORDER[mean]


class _Likelihood:
    """Negative log-likelihood over the unconstrained parameter vector."""

    def __init__(self, y, spec, hold_back):
        self.y = y
        self.spec = spec
        self.start = hold_back
        self.code = VOL_CODES[spec.vol]
        self.dist_code = dists.DIST_CODES[spec.dist]
        self.n_mean = _n_mean(spec.mean)
        self.n_vol = _N_VOL[spec.vol]
        self.nobs = y.size - hold_back

    def unpack(self, theta):
        i, j = self.n_mean, self.n_mean + self.n_vol
        ar, ma = _mean_from_free(self.spec.mean, theta[:i])
        shape = dists.shape_from_free(self.spec.dist, theta[j:])
        # kappa only enters the EGARCH and TARCH recursions
        kappa = dists.abs_moment(self.spec.dist, shape) if self.code in (3, 4, 6) else math.sqrt(2 / math.pi)
        vp = _vol_from_free(self.spec.vol, theta[i:j], kappa)
        return ar, ma, vp, shape

    def residuals(self, ar, ma):
        return arma_residuals(self.y, ar, ma, self.start)

    def evaluate(self, ar, ma, vp, shape):
        eps = self.residuals(ar, ma)
        s0 = float(np.var(eps))
        if not s0 > 0:
            return -math.inf, eps, None
        s2 = variance_filter(self.code, vp.as_array(), eps, s0)
        z = eps / np.sqrt(s2)
        dens = dists._logpdf_kernel(self.dist_code, np.asarray(shape, dtype=float), z, np.empty(z.size))
        ll = float(dens.sum()) + log_variance_term(s2)
        return (ll if math.isfinite(ll) else -math.inf), eps, s2

    def __call__(self, theta):
        try:
            with np.errstate(all="ignore"):
                ll = self.evaluate(*self.unpack(theta))[0]
        except (OverflowError, ValueError, ZeroDivisionError):
            return math.inf
        if not math.isfinite(ll):
            return math.inf
        # keep saturating transforms (tanh, logistic) away from their flat tails
        excess = np.maximum(np.abs(theta) - FREE_BOUND, 0.0)
        return -ll + PENALTY * float(excess @ excess)


def _ar_ls(y, p, start):
    if p == 0:
        return np.zeros(0)
    X = np.column_stack([y[start - 1 - i : y.size - 1 - i] for i in range(p)])
    coef, *_ = np.linalg.lstsq(X, y[start:], rcond=None)
    return coef


def initial_params(y, spec, hold_back, alpha=0.05, beta=0.90):
    """Deterministic starting point: LS mean, variance targeting, nu=8, lambda=0."""
    p = _AR_ORDER[spec.mean]
    ar = _ar_ls(y, p, hold_back)
    free = list(ar)
    if spec.mean == "ARMA(1,1)":
        free.append(0.0)
    eps = arma_residuals(y, ar, 0.0, hold_back)
    var = max(float(np.var(eps)), 1e-300)
    shape = dists.DEFAULT_SHAPE[spec.dist]
    kappa = dists.abs_moment(spec.dist, shape)
    if spec.vol == "Constant":
        vp = VolParams(var)
    elif spec.vol == "ARCH(1)":
        vp = VolParams(var * (1 - alpha), alpha=alpha)
    elif spec.vol in ("GARCH(1,1)", "GJR-GARCH(1,1,1)"):
        vp = VolParams(var * (1 - alpha - beta), alpha=alpha, beta=beta)
    elif spec.vol == "TARCH(1,1,1)":
        sd = math.sqrt(var)
        vp = VolParams(sd * (1 - alpha * kappa - beta), alpha=alpha, beta=beta, kappa=kappa)
    else:
        vp = VolParams(math.log(var) * (1 - beta), alpha=0.1, beta=beta)
    return np.array(free + _vol_to_free(spec.vol, vp) + dists.shape_to_free(spec.dist, shape))


def _optimize(nll, theta0, max_rounds=4):
    """Simplex search refined by BFGS until the objective stops moving."""
    best_x, best_f = np.asarray(theta0, dtype=float), nll(theta0)
    n = best_x.size
    converged = False
    for _ in range(max_rounds):
        prev = best_f
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nm = minimize(
                nll, best_x, method="Nelder-Mead",
                options={"maxfev": 400 * n, "xatol": 1e-7, "fatol": 1e-10, "adaptive": n > 4},
            )
            if nm.fun < best_f:
                best_x, best_f = nm.x, nm.fun
            if math.isfinite(best_f):
                qn = minimize(nll, best_x, method="BFGS", options={"gtol": 1e-6, "maxiter": 200})
                if qn.fun < best_f:
                    best_x, best_f = qn.x, qn.fun
        if math.isfinite(best_f) and math.isfinite(prev) and abs(prev - best_f) <= REL_TOL * max(1.0, abs(best_f)):
            converged = True
            break
    return best_x, best_f, converged


def fit_mle(series, spec, hold_back=None, max_restarts=5, random_state=0):
    """Maximize the conditional log-likelihood of ``spec`` on ``series``.

    Parameters
    ----------
    series : array-like of shape (T,)
    spec : ModelSpec
    hold_back : int, optional
        Leading observations used only as lags. Defaults to the AR order of
        the mean model; sweeps pass a common value so every model sees the
        same sample.
    max_restarts : int
        Randomized restarts attempted when the first optimization does not
        converge.
    random_state : int or Generator

    Returns
    -------
    TsFit
    """
    y = check_series(series, min_length=50)
    if not isinstance(spec, ModelSpec):
        spec = ModelSpec(*spec)
    lag = _AR_ORDER[spec.mean]
    hold_back = lag if hold_back is None else int(hold_back)
    if hold_back < lag:
        raise ValidationError(f"hold_back {hold_back} is shorter than the mean lag {lag}")
    nll = _Likelihood(y, spec, hold_back)
    theta0 = initial_params(y, spec, hold_back)
    init_f = nll(theta0)
    x, f, converged = _optimize(nll, theta0)
    if spec.vol != "Constant":
        alt = initial_params(y, spec, hold_back, alpha=0.15, beta=0.75)
        x_a, f_a, c_a = _optimize(nll, alt)
        if f_a < f - REL_TOL * max(1.0, abs(f)):
            x, f, converged = x_a, f_a, c_a
    rng = np.random.default_rng(random_state)
    tries = 0
    while not converged and tries < max_restarts:
        tries += 1
        x_r, f_r, c_r = _optimize(nll, theta0 + rng.normal(scale=0.5, size=theta0.size))
        if c_r and (f_r <= f or not math.isfinite(f)):
            x, f, converged = x_r, f_r, True
        elif f_r < f:
            x, f = x_r, f_r
    if not f <= init_f:
        x, f = theta0, init_f
    ar, ma, vp, shape = nll.unpack(x)
    ll, eps, s2 = nll.evaluate(ar, ma, vp, shape)
    mean_params = {f"phi_{i + 1}": float(v) for i, v in enumerate(ar)}
    if spec.mean == "ARMA(1,1)":
        mean_params["theta"] = float(ma)
    d = spec.n_params
    return TsFit(
        spec=spec,
        mean_params=mean_params,
        vol_params=vp,
        dist_params=dict(zip(dists.SHAPE_NAMES[spec.dist], map(float, shape))),
        loglik=ll,
        bic=bic(ll, d, nll.nobs) if math.isfinite(ll) else math.inf,
        n_params=d,
        nobs=nll.nobs,
        converged=bool(converged and math.isfinite(ll)),
        sigma_path=np.sqrt(s2) if s2 is not None else np.full(eps.size, np.nan),
        residuals=eps,
        init_loglik=-init_f,
    )


def volatility_filter(vol, params, residuals, sigma0_sq, dist="normal", shape=None):
    """Conditional variance path of ``vol`` driven by ``residuals``.

    ``params`` is a :class:`VolParams`; its kappa is replaced by E|Z| under
    ``dist`` so EGARCH and TARCH are centred on the innovation law.
    """
    if vol not in VOL_CODES:
        raise ValidationError(f"unknown volatility model {vol!r}")
    if not isinstance(params, VolParams):
        params = VolParams(**params)
    params.check(vol)
    if not sigma0_sq > 0:
        raise ValidationError(f"initial variance must be positive, got {sigma0_sq}")
    eps = check_series(residuals, min_length=1)
    kappa = dists.abs_moment(dist, shape)
    vp = VolParams(params.omega, params.alpha, params.beta, params.gamma, kappa)
    s2 = variance_filter(VOL_CODES[vol], vp.as_array(), eps, float(sigma0_sq))
    if not np.all(s2 > 0):
        raise ValidationError(f"{vol} produced a non-positive variance")
    return s2


def loglik_at(series, spec, mean_params, vol_params, dist_shape=None, hold_back=None):
    """Log-likelihood of ``series`` at given constrained parameters."""
    y = check_series(series)
    hold_back = _AR_ORDER[spec.mean] if hold_back is None else hold_back
    nll = _Likelihood(y, spec, hold_back)
    ar = np.asarray(mean_params[0] if isinstance(mean_params, tuple) else mean_params, dtype=float)
    ma = float(mean_params[1]) if isinstance(mean_params, tuple) else 0.0
    shape = dists.check_dist(spec.dist, dist_shape)
    return nll.evaluate(ar, ma, vol_params, shape)[0]


def simulate(spec_vol, vol_params, dist, shape, n, rng=None, s0=None, burn=500):
    """Simulate zero-mean errors from a volatility model.

    Returns (eps, sigma2) of length ``n`` after discarding ``burn`` steps.
    """
    shape = dists.check_dist(dist, shape)
    if not isinstance(vol_params, VolParams):
        vol_params = VolParams(**vol_params)
    vol_params.check(spec_vol)
    code = VOL_CODES[spec_vol]
    kappa = dists.abs_moment(dist, shape)
    vp = VolParams(vol_params.omega, vol_params.alpha, vol_params.beta, vol_params.gamma, kappa)
    if s0 is None:
        s0 = _unconditional_variance(spec_vol, vp)
    z = dists.sample(dist, shape, n + burn, rng)
    eps, s2 = simulate_errors(code, vp.as_array(), z, float(s0))
    return eps[burn:], s2[burn:]


def _unconditional_variance(vol, vp):
    if vol == "Constant":
        return vp.omega
    if vol == "ARCH(1)" and vp.alpha < 1:
        return vp.omega / (1 - vp.alpha)
    if vol == "GARCH(1,1)" and vp.alpha + vp.beta < 1:
        return vp.omega / (1 - vp.alpha - vp.beta)
    if vol == "GJR-GARCH(1,1,1)" and vp.alpha + vp.gamma / 2 + vp.beta < 1:
        return vp.omega / (1 - vp.alpha - vp.gamma / 2 - vp.beta)
    if vol in ("EGARCH(1,0,1)", "EGARCH(1,1,1)") and abs(vp.beta) < 1:
        return math.exp(vp.omega / (1 - vp.beta))
    if vol == "TARCH(1,1,1)":
        denom = 1 - (vp.alpha + vp.gamma / 2) * vp.kappa - vp.beta
        if denom > 0:
            return (vp.omega / denom) ** 2
    return vp.omega if vp.omega > 0 else 1.0


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    series_id: str
    spec: ModelSpec
    converged: bool
    loglik: float
    d: int
    bic: float
    delta_bic: float
    label: str

    def as_csv_row(self):
        return [
            self.series_id, self.spec.mean, self.spec.vol, self.spec.dist,
            str(self.converged).lower(), repr(self.loglik), self.d, repr(self.bic),
            repr(self.delta_bic), self.label,
        ]


def _fit_quiet(y, spec, hold_back, seed):
    try:
        return fit_mle(y, spec, hold_back=hold_back, random_state=seed)
    except (ValidationError, np.linalg.LinAlgError, FloatingPointError):
        return None


def bic_sweep(
    series,
    mean_models=("AR(1)",),
    vol_models=VOL_MODELS,
    distributions=dists.DISTRIBUTIONS,
    series_id="series",
    n_jobs=1,
    random_state=0,
):
    """Fit every mean x volatility x distribution combination and rank by BIC.

    Non-converged fits stay in the table, flagged, but never define the
    minimum. Ties go to the earlier spec in iteration order.

    Returns
    -------
    list of SweepRow
        In spec iteration order (mean, then volatility, then distribution).
    """
    y = check_series(series, min_length=50)
    specs = [ModelSpec(m, v, d) for m in mean_models for v in vol_models for d in distributions]
    if not specs:
        raise ValidationError("empty model grid")
    hold_back = max(_AR_ORDER[s.mean] for s in specs)
    fits = Parallel(n_jobs=n_jobs)(
        delayed(_fit_quiet)(y, s, hold_back, random_state) for s in specs
    )
    ok = [f for f in fits if f is not None and f.converged and math.isfinite(f.bic)]
    if not ok:
        raise SweepError(f"no model converged for series {series_id!r}")
    best = min(ok, key=lambda f: f.bic)
    rows = []
    for s, f in zip(specs, fits):
        if f is None:
            rows.append(SweepRow(series_id, s, False, math.nan, s.n_params, math.nan, math.nan, "failed"))
            continue
        delta = f.bic - best.bic
        if f is best:
            label = evidence_label(0.0)
        elif delta < 0:
            label = "unconverged"
        else:
            label = evidence_label(delta)
        rows.append(SweepRow(series_id, s, f.converged, f.loglik, f.n_params, f.bic, delta, label))
    return rows


def best_row(rows):
    return next(r for r in rows if r.label == "—")


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow(r.as_csv_row())


def write_fit_json(fit, path, include_sigma=False):
    with open(path, "w") as fh:
        json.dump(fit.to_dict(include_sigma=include_sigma), fh, indent=2)


def is_garch_family(spec):
    return spec.vol in GARCH_FAMILY


class VolatilityModel(BaseEstimator):
    """Estimator wrapper around :func:`fit_mle`.

    Parameters
    ----------
    mean : str, default='AR(1)'
    vol : str, default='GARCH(1,1)'
    dist : str, default='normal'
    hold_back : int or None
    random_state : int, default=0
    """

    def __init__(self, mean="AR(1)", vol="GARCH(1,1)", dist="normal", hold_back=None, random_state=0):
        self.mean = mean
        self.vol = vol
        self.dist = dist
        self.hold_back = hold_back
        self.random_state = random_state

    def fit(self, X, y=None):
        series = np.asarray(X, dtype=float).ravel()
        self.fit_ = fit_mle(
            series, ModelSpec(self.mean, self.vol, self.dist),
            hold_back=self.hold_back, random_state=self.random_state,
        )
        self.loglik_ = self.fit_.loglik
        self.bic_ = self.fit_.bic
        self.converged_ = self.fit_.converged
        return self

    def score(self, X, y=None):
        """Log-likelihood of ``X`` under the fitted parameters."""
        check_is_fitted(self, "fit_")
        f = self.fit_
        ar = np.array([v for k, v in f.mean_params.items() if k.startswith("phi")])
        ma = f.mean_params.get("theta", 0.0)
        return loglik_at(
            np.asarray(X, dtype=float).ravel(), f.spec, (ar, ma), f.vol_params,
            tuple(f.dist_params.values()), self.hold_back,
        )
