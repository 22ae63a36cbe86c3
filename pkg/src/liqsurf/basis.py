"""Legendre basis on the rank grid, quadrature projection and subspace distance."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_odd_M, check_orthonormal, check_rank
from .exceptions import ConditioningError, ValidationError
from .ingest import SurfaceGrid, standard_grid

PROJECTION_METHODS = ("gls", "simpson-sum")
MAX_CONDITION = 1e12


def legendre_eval(n, x):
    """Legendre polynomial P_n(x) by the Bonnet three-term recurrence."""
    if int(n) != n or n < 0:
        raise ValidationError(f"degree must be a non-negative integer, got {n!r}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValidationError("Legendre evaluation is restricted to [-1, 1]")
    p_prev, p = np.ones_like(x), x.copy()
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    for k in range(1, int(n)):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    return p if p.ndim else float(p)


def legendre_design(grid_x, K):
    """M x K matrix with column k holding P_{k-1} on the grid."""
    x = np.asarray(grid_x, dtype=float)
    Psi = np.empty((x.size, K))
    Psi[:, 0] = 1.0
    if K > 1:
        Psi[:, 1] = x
    for k in range(1, K - 1):
        Psi[:, k + 1] = ((2 * k + 1) * x * Psi[:, k] - k * Psi[:, k - 1]) / (k + 1)
    return Psi


def simpson_weights(M, interval=(-1.0, 1.0)):
    """Composite Simpson weights (h/3)(1, 4, 2, 4, ..., 2, 4, 1)."""
    if int(M) != M or M < 3 or M % 2 == 0:
        raise ValidationError(f"Simpson's rule needs an odd number of points >= 3, got {M!r}")
    a, b = interval
    h = (b - a) / (M - 1)
    w = np.full(int(M), 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3


@dataclass(frozen=True)
class FixedBasis:
    """Sampled basis functions with their quadrature weights."""

    grid_x: np.ndarray
    columns: np.ndarray
    weights: np.ndarray

    @classmethod
    def legendre(cls, grid_or_M, K):
        grid = (
            standard_grid(grid_or_M)
            if np.ndim(grid_or_M) == 0
            else np.asarray(grid_or_M, dtype=float)
        )
        M = check_odd_M(grid.size)
        K = check_rank(K, M)
        return cls(grid, legendre_design(grid, K), simpson_weights(M))

    @property
    def K(self):
        return self.columns.shape[1]


def project_fixed_basis(surface_rows, basis, K=None, method="gls", analytic_norms=None):
    """Coefficients of each row on the first K basis columns.

    ``method='gls'`` solves the weighted normal equations
    (Psi' W Psi) beta = Psi' W y, exact for rows in the span. ``'simpson-sum'``
    evaluates the quadrature inner products directly and divides by the
    squared norms of the basis functions (analytic Legendre norms 2/(2k-1) by
    default).

    No demeaning is applied to the rows.
    """
    Y = check_matrix(surface_rows.values if isinstance(surface_rows, SurfaceGrid) else surface_rows)
    K = basis.K if K is None else check_rank(K, basis.K)
    if Y.shape[1] != basis.columns.shape[0]:
        raise ValidationError(f"rows have {Y.shape[1]} points, basis has {basis.columns.shape[0]}")
    Psi = basis.columns[:, :K]
    W = basis.weights
    if method == "gls":
        G = Psi.T @ (W[:, None] * Psi)
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise ConditioningError(f"normal matrix condition number {cond:.3e}")
        return np.linalg.solve(G, Psi.T @ (W[:, None] * Y.T)).T
    if method == "simpson-sum":
        if analytic_norms is None:
            analytic_norms = 2.0 / (2 * np.arange(1, K + 1) - 1)
        return (Y * W) @ Psi / np.asarray(analytic_norms)[:K]
    raise ValidationError(f"unknown projection method {method!r}")


def orthonormal_grid_basis(basis, K=None):
    """Orthonormalize sampled basis columns (QR with positive diagonal)."""
    K = basis.K if K is None else check_rank(K, basis.K)
    Q, R = np.linalg.qr(basis.columns[:, :K])
    d = np.diag(R)
    if np.any(np.abs(d) <= np.abs(d).max() * basis.columns.shape[0] * np.finfo(float).eps):
        raise ValidationError("basis columns are rank deficient")
    return Q * np.sign(d)


def legendre_grid_basis(grid_or_M, K):
    """Orthonormalized Legendre columns on the rank grid."""
    return orthonormal_grid_basis(FixedBasis.legendre(grid_or_M, K))


def projection_distance(U1, U2):
    """Half the squared Frobenius distance between the two projectors.

    Ranges over [0, min(K, M-K)] and is zero exactly when the spans agree.
    """
    U1 = check_orthonormal(U1, "U1")
    U2 = check_orthonormal(U2, "U2")
    if U1.shape != U2.shape:
        raise ValidationError(f"subspace shapes differ: {U1.shape} vs {U2.shape}")
    M, K = U1.shape
    D = U1 @ U1.T - U2 @ U2.T
    d = 0.5 * float(np.sum(D * D))
    return min(max(d, 0.0), float(min(K, M - K)))


def random_subspace_baseline(K, M):
    """Expected projection distance to a Haar-random K-subspace, K(1 - K/M)."""
    K = check_rank(K, M)
    return K * (1 - K / M)


def haar_subspace(M, K, rng=None):
    """Orthonormal M x K frame drawn from the Haar measure."""
    rng = np.random.default_rng(rng)
    Q, R = np.linalg.qr(rng.standard_normal((M, K)))
    return Q * np.sign(np.diag(R))


class LegendreProjector(TransformerMixin, BaseEstimator):
    """Project curves onto the first ``n_components`` Legendre polynomials.

    Parameters
    ----------
    n_components : int, default=5
    method : {'gls', 'simpson-sum'}, default='gls'
    """

    def __init__(self, n_components=5, method="gls"):
        self.n_components = n_components
        self.method = method

    def fit(self, X, y=None):
        Y = X.values if isinstance(X, SurfaceGrid) else check_matrix(X)
        if self.method not in PROJECTION_METHODS:
            raise ValidationError(f"unknown projection method {self.method!r}")
        self.basis_ = FixedBasis.legendre(Y.shape[1], self.n_components)
        self.n_features_in_ = Y.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return project_fixed_basis(X, self.basis_, method=self.method)

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        B = np.atleast_2d(np.asarray(X, dtype=float))
        return B @ self.basis_.columns[:, : B.shape[1]].T


def write_coefficients_csv(block_numbers, coefficients, path):
    """CSV with header block,beta_1,...,beta_K."""
    B = check_matrix(coefficients, "coefficients")
    blocks = np.asarray(block_numbers)
    if blocks.shape != (B.shape[0],):
        raise ValidationError("one block number per coefficient row is required")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["block"] + [f"beta_{k}" for k in range(1, B.shape[1] + 1)]) + "\n")
        for b, row in zip(blocks, B):
            fh.write(",".join([str(int(b))] + [repr(float(v)) for v in row]) + "\n")


def read_coefficients_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "block" or header[1:] != [f"beta_{k}" for k in range(1, len(header))]:
            raise ValidationError(f"{path}: unexpected coefficient header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValidationError(f"{path}: no coefficient rows")
    return data[:, 0].astype(np.int64), data[:, 1:]


def write_basis_csv(grid_x, mean_row, columns, path):
    """CSV with header x,mean,u_1,...,u_K; one row per grid point."""
    U = check_matrix(columns, "columns")
    x = np.asarray(grid_x, dtype=float)
    mean_row = np.zeros(x.size) if mean_row is None else np.asarray(mean_row, dtype=float)
    if U.shape[0] != x.size or mean_row.shape != x.shape:
        raise ValidationError("grid, mean and basis columns disagree in length")
    with open(path, "w") as fh:
        fh.write(",".join(["x", "mean"] + [f"u_{k}" for k in range(1, U.shape[1] + 1)]) + "\n")
        for xm, mm, row in zip(x, mean_row, U):
            fh.write(",".join([f"{xm:.6f}", repr(float(mm))] + [repr(float(v)) for v in row]) + "\n")


def read_basis_csv(path):
    """Returns (grid_x, mean_row, columns); grid_x is rebuilt exactly from M."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["x", "mean"] or header[2:] != [f"u_{k}" for k in range(1, len(header) - 1)]:
            raise ValidationError(f"{path}: unexpected basis header")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = standard_grid(data.shape[0])
    if np.max(np.abs(grid - data[:, 0])) > 5e-7:
        raise ValidationError(f"{path}: x column is not the standard rank grid")
    return grid, data[:, 1], data[:, 2:]
