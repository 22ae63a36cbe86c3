"""Rolling-window decompositions, subspace drift, shocks and score forecasts."""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from ._validation import check_matrix, check_odd_M, check_rank, check_series
from .basis import legendre_grid_basis, projection_distance, random_subspace_baseline
from .exceptions import ValidationError
from .factor import decompose, pve_cpve, reconstruct
from .ingest import SurfaceGrid

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
QUANTILE_HEADER = ["h", "x", "q05", "q25", "q50", "q75", "q95"]
DRIFT_HEADER = ["window_start_block", "K", "d_to_inception", "d_to_legendre", "baseline"]


@dataclass(frozen=True)
class RollingConfig:
    window: int = 400
    step: int = 10
    K_set: tuple = (3, 4, 5, 6, 7)
    M: int = 201

    def __post_init__(self):
        if int(self.step) != self.step or self.step < 1:
            raise ValidationError(f"step must be a positive integer, got {self.step!r}")
        if int(self.window) != self.window or self.window < 2:
            raise ValidationError(f"window must be an integer >= 2, got {self.window!r}")
        check_odd_M(self.M)
        ks = tuple(sorted({check_rank(k, self.M) for k in self.K_set}))
        if not ks:
            raise ValidationError("K_set is empty")
        object.__setattr__(self, "K_set", ks)
        if self.window < self.M:
            warnings.warn(
                f"window of {self.window} rows is shorter than M={self.M}; "
                "the sample covariance is rank deficient",
                stacklevel=2,
            )

    def window_starts(self, n_rows):
        if n_rows < self.window:
            raise ValidationError(f"surface has {n_rows} rows, fewer than one window of {self.window}")
        return list(range(0, n_rows - self.window + 1, self.step))


@dataclass(frozen=True)
class WindowResult:
    start: int
    start_block: int
    eigenvalues: np.ndarray
    basis: np.ndarray  # leading max(K_set) eigenvectors
    mean_row: np.ndarray
    scores: np.ndarray
    cpve: dict

    def basis_K(self, K):
        return self.basis[:, :K]


def _window(surface, start, config, center):
    sub = surface.rows(start, start + config.window)
    dec = decompose(sub, center=center)
    kmax = max(config.K_set)
    _, cpve = pve_cpve(dec.eigenvalues)
    return WindowResult(
        start=start,
        start_block=int(sub.block_numbers[0]),
        eigenvalues=dec.eigenvalues,
        basis=dec.basis[:, :kmax].copy(),
        mean_row=dec.mean_row,
        scores=dec.scores[:, :kmax].copy(),
        cpve={K: float(cpve[K - 1]) for K in config.K_set},
    )


def rolling_decompose(surface, config=None, center=True, n_jobs=1):
    """Independent decomposition of every window t_j = 0, step, 2 step, ...

    Returns
    -------
    list of WindowResult
    """
    config = config or RollingConfig()
    if not isinstance(surface, SurfaceGrid):
        raise ValidationError("rolling_decompose expects a SurfaceGrid")
    if surface.M != config.M:
        surface = surface.central(config.M)
    starts = config.window_starts(surface.T)
    return Parallel(n_jobs=n_jobs)(delayed(_window)(surface, s, config, center) for s in starts)


@dataclass(frozen=True)
class DriftSeries:
    window_starts: np.ndarray
    K_set: tuple
    d_to_inception: np.ndarray  # (n_windows, len(K_set))
    d_to_legendre: np.ndarray
    baselines: np.ndarray

    def rows(self):
        for i, b in enumerate(self.window_starts):
            for j, K in enumerate(self.K_set):
                yield int(b), K, self.d_to_inception[i, j], self.d_to_legendre[i, j], self.baselines[j]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DRIFT_HEADER)
            for b, K, d0, dl, base in self.rows():
                w.writerow([b, K, repr(float(d0)), repr(float(dl)), repr(float(base))])


def drift_series(windows, K_set=None, legendre_bases=None):
    """Projection distances of each window's basis to the first window and to Legendre.

    Parameters
    ----------
    windows : sequence of WindowResult
    K_set : iterable of int, optional
        Defaults to every rank available in the windows.
    legendre_bases : dict K -> (M, K) orthonormal array, optional
        Defaults to the orthonormalized Legendre columns on the standard grid.
    """
    if not windows:
        raise ValidationError("need at least one window")
    M, kmax = windows[0].basis.shape
    K_set = tuple(sorted(K_set or range(1, kmax + 1)))
    if K_set[-1] > kmax:
        raise ValidationError(f"windows store only {kmax} basis columns")
    if legendre_bases is None:
        legendre_bases = {K: legendre_grid_basis(M, K) for K in K_set}
    first = windows[0]
    d0 = np.empty((len(windows), len(K_set)))
    dl = np.empty_like(d0)
    for i, w in enumerate(windows):
        for j, K in enumerate(K_set):
            d0[i, j] = 0.0 if w is first else projection_distance(w.basis_K(K), first.basis_K(K))
            dl[i, j] = projection_distance(w.basis_K(K), legendre_bases[K])
    return DriftSeries(
        np.array([w.start_block for w in windows]),
        K_set,
        d0,
        dl,
        np.array([random_subspace_baseline(K, M) for K in K_set]),
    )


def write_eigenvalue_csv(windows, path, n_eigen=None):
    n = windows[0].eigenvalues.size if n_eigen is None else min(n_eigen, windows[0].eigenvalues.size)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start_block"] + [f"lambda_{k}" for k in range(1, n + 1)])
        for win in windows:
            w.writerow([win.start_block] + [repr(float(v)) for v in win.eigenvalues[:n]])


def write_cpve_csv(windows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start_block", "K", "cpve"])
        for win in windows:
            for K, v in win.cpve.items():
                w.writerow([win.start_block, K, repr(v)])


# -- shocks and forecasts -----------------------------------------------------


def shock_cross_section(scores_row, basis, mean_row, k, amount=None, window_scores=None):
    """Curves before and after adding ``amount`` to the k-th score (1-based).

    ``amount`` defaults to the sample standard deviation of column k of
    ``window_scores``.
    """
    beta = check_series(scores_row, "scores_row")
    U = check_matrix(basis, "basis")
    if U.shape[1] != beta.size:
        raise ValidationError(f"{beta.size} scores for a basis with {U.shape[1]} columns")
    if int(k) != k or not 1 <= k <= beta.size:
        raise ValidationError(f"component k must lie in 1..{beta.size}, got {k!r}")
    if amount is None:
        if window_scores is None:
            raise ValidationError("either amount or window_scores is required")
        S = check_matrix(window_scores, "window_scores")
        amount = float(np.std(S[:, k - 1], ddof=1))
    shocked = beta.copy()
    shocked[k - 1] += amount
    baseline = reconstruct(beta, U, mean_row)[0]
    return baseline, reconstruct(shocked, U, mean_row)[0]


def _phi(fit):
    if hasattr(fit, "mean_params"):
        return float(fit.mean_params["phi_1"])
    return float(fit)


def forecast_scores(fits, current_scores, h, score_means=None):
    """phi_k^h (beta_k - m_k) + m_k for each factor; m defaults to zero."""
    if int(h) != h or h < 0:
        raise ValidationError(f"horizon must be a non-negative integer, got {h!r}")
    beta = check_series(current_scores, "current_scores")
    phis = np.array([_phi(f) for f in fits])
    if phis.size != beta.size:
        raise ValidationError(f"{phis.size} AR fits for {beta.size} scores")
    if h == 0:
        return beta.copy()
    m = np.zeros_like(beta) if score_means is None else np.asarray(score_means, dtype=float)
    return phis ** int(h) * (beta - m) + m


def forecast_curve(fits, current_scores, basis, mean_row, h, score_means=None):
    """Curve forecast assembled by linearity from the per-factor AR(1) forecasts."""
    return reconstruct(forecast_scores(fits, current_scores, h, score_means), basis, mean_row)[0]


# -- VAR(1) with constant-correlation GARCH(1,1) errors -----------------------


@dataclass(frozen=True)
class VarGarchParams:
    """beta_{t+1} = a + A beta_t + eps_{t+1}, eps ~ t_nu(0, D R D), D = diag(sigma)."""

    a: np.ndarray
    A: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    R: np.ndarray
    nu: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        K = a.size
        A = np.asarray(self.A, dtype=float).reshape(K, K)
        fields = {"a": a, "A": A}
        for name in ("omega", "alpha", "beta"):
            fields[name] = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (K,)).copy()
        R = np.asarray(self.R, dtype=float).reshape(K, K)
        fields["R"] = R
        for name, v in fields.items():
            object.__setattr__(self, name, v)
        if not all(np.all(np.isfinite(v)) for v in fields.values()):
            raise ValidationError("VAR-GARCH parameters must be finite")
        if np.any(self.omega <= 0) or np.any(self.alpha < 0) or np.any(self.beta < 0):
            raise ValidationError("GARCH margins need omega > 0 and alpha, beta >= 0")
        if not self.nu > 2:
            raise ValidationError(f"nu must exceed 2, got {self.nu}")
        if np.max(np.abs(R - R.T)) > 1e-12 or np.any(np.abs(np.diag(R) - 1) > 1e-12):
            raise ValidationError("R must be a symmetric matrix with unit diagonal")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValidationError("correlation matrix R is not positive definite") from None

    @property
    def K(self):
        return self.a.size

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def unconditional_variance(self):
        persistence = self.alpha + self.beta
        return np.where(persistence < 1, self.omega / np.maximum(1 - persistence, 1e-300), self.omega)


def _mvt_loglik(nu, U, R_inv, logdet):
    K = U.shape[1]
    q = np.einsum("ti,ij,tj->t", U, R_inv, U)
    c = gammaln((nu + K) / 2) - gammaln(nu / 2) - K / 2 * math.log((nu - 2) * math.pi) - 0.5 * logdet
    return float(np.sum(c - (nu + K) / 2 * np.log1p(q / (nu - 2))))


def fit_var_garch(scores, random_state=0):
    """Two-step fit: OLS VAR(1), per-factor GARCH(1,1) margins, then R and nu.

    Returns
    -------
    params : VarGarchParams
    sigma2_next : ndarray of shape (K,)
        One-step-ahead conditional variances after the last observation.
    """
    from .tsmodel.estimation import ModelSpec, fit_mle

    B = check_matrix(scores, "scores")
    T, K = B.shape
    if T < 60:
        raise ValidationError(f"VAR-GARCH fitting needs at least 60 observations, got {T}")
    X = np.column_stack([np.ones(T - 1), B[:-1]])
    coef, *_ = np.linalg.lstsq(X, B[1:], rcond=None)
    a, A = coef[0], coef[1:].T
    resid = B[1:] - X @ coef
    omega, alpha, beta = np.empty(K), np.empty(K), np.empty(K)
    std = np.empty_like(resid)
    s2_next = np.empty(K)
    for k in range(K):
        f = fit_mle(resid[:, k], ModelSpec("Zero", "GARCH(1,1)", "normal"), random_state=random_state)
        vp = f.vol_params
        omega[k], alpha[k], beta[k] = vp.omega, vp.alpha, vp.beta
        std[:, k] = resid[:, k] / f.sigma_path
        s2_next[k] = vp.omega + vp.alpha * resid[-1, k] ** 2 + vp.beta * f.sigma_path[-1] ** 2
    R = np.corrcoef(std, rowvar=False).reshape(K, K)
    R = (R + R.T) / 2
    np.fill_diagonal(R, 1.0)
    sign, logdet = np.linalg.slogdet(R)
    R_inv = np.linalg.inv(R)
    res = minimize_scalar(
        lambda nu: -_mvt_loglik(nu, std, R_inv, logdet), bounds=(2.05, 500.0), method="bounded"
    )
    return VarGarchParams(a, A, omega, alpha, beta, R, float(res.x)), s2_next


def _path_innovations(seed, start, stop, horizon, K, nu):
    # one generator per path so ensembles do not depend on batching
    g = np.empty((stop - start, horizon, K))
    w = np.empty((stop - start, horizon))
    for i, p in enumerate(range(start, stop)):
        rng = np.random.default_rng([seed, p])
        g[i] = rng.standard_normal((horizon, K))
        w[i] = rng.chisquare(nu, horizon)
    return g, w


def _simulate_batch(params, beta0, s2_next, horizon, seed, start, stop):
    K = params.K
    L = np.linalg.cholesky(params.R)
    g, w = _path_innovations(seed, start, stop, horizon, K, params.nu)
    z = (g @ L.T) * np.sqrt((params.nu - 2) / w)[..., None]
    n = stop - start
    out = np.empty((n, horizon, K))
    state = np.broadcast_to(beta0, (n, K)).copy()
    s2 = np.broadcast_to(s2_next, (n, K)).copy()
    for h in range(horizon):
        eps = np.sqrt(s2) * z[:, h]
        state = params.a + state @ params.A.T + eps
        out[:, h] = state
        s2 = params.omega + params.alpha * eps * eps + params.beta * s2
    return out


def simulate_var_garch(params, current_scores, horizon, n_paths, seed, sigma2_next=None,
                       batch_size=4096, n_jobs=1):
    """Monte Carlo score paths under the VAR(1)-CCC-GARCH(1,1)-t model.

    Path p draws its innovations from a generator seeded with (seed, p), so
    the ensemble is identical for any batch size or worker count.

    Returns
    -------
    ndarray of shape (n_paths, horizon, K)
        Entry [:, h-1] holds the score vector at horizon h.
    """
    if not isinstance(params, VarGarchParams):
        raise ValidationError("params must be a VarGarchParams")
    beta0 = check_series(current_scores, "current_scores")
    if beta0.size != params.K:
        raise ValidationError(f"{beta0.size} current scores for a {params.K}-factor model")
    if int(horizon) != horizon or horizon < 1 or int(n_paths) != n_paths or n_paths < 1:
        raise ValidationError("horizon and n_paths must be positive integers")
    if params.spectral_radius >= 1:
        warnings.warn(f"VAR spectral radius {params.spectral_radius:.4f} >= 1", stacklevel=2)
    s2 = params.unconditional_variance() if sigma2_next is None else np.asarray(sigma2_next, dtype=float)
    if s2.shape != (params.K,) or np.any(s2 <= 0):
        raise ValidationError("sigma2_next must hold K positive variances")
    seed = int(seed)
    bounds = [(s, min(s + batch_size, n_paths)) for s in range(0, int(n_paths), batch_size)]
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_batch)(params, beta0, s2, int(horizon), seed, lo, hi) for lo, hi in bounds
    )
    return np.concatenate(parts, axis=0)


def curve_quantiles(paths, basis, mean_row, quantiles=QUANTILES):
    """Pointwise quantiles of the reconstructed curves, shape (horizon, M, n_q)."""
    U = check_matrix(basis, "basis")
    n, H, K = paths.shape
    if U.shape[1] != K:
        raise ValidationError(f"paths have {K} factors, basis has {U.shape[1]} columns")
    out = np.empty((H, U.shape[0], len(quantiles)))
    for h in range(H):
        curves = reconstruct(paths[:, h], U, mean_row)
        out[h] = np.quantile(curves, quantiles, axis=0).T
    return out


def write_quantile_csv(q, grid_x, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUANTILE_HEADER)
        for h in range(q.shape[0]):
            for m, x in enumerate(grid_x):
                w.writerow([h + 1, f"{x:.6f}"] + [repr(float(v)) for v in q[h, m]])
