"""Covariance eigendecomposition of a surface and rank-K reconstruction."""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_rank
from .exceptions import UndefinedVarianceError, ValidationError
from .ingest import SurfaceGrid


def _values(surface):
    if isinstance(surface, SurfaceGrid):
        return surface.values
    return check_matrix(surface, "surface")


@dataclass(frozen=True)
class FactorDecomposition:
    mean_row: np.ndarray
    eigenvalues: np.ndarray
    basis: np.ndarray
    scores: np.ndarray
    centered: bool

    @property
    def numerical_rank(self):
        lam = self.eigenvalues
        if lam.size == 0 or lam[0] == 0:
            return 0
        return int(np.sum(lam > lam[0] * lam.size * np.finfo(float).eps))

    def to_dict(self, k_max=10):
        k = min(k_max, self.basis.shape[1])
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "basis": self.basis[:, :k].tolist(),
            "scores": self.scores[:, :k].tolist(),
            "mean_row": self.mean_row.tolist(),
            "centered": bool(self.centered),
            "numerical_rank": self.numerical_rank,
        }

    def to_json(self, path, k_max=10):
        with open(path, "w") as fh:
            json.dump(self.to_dict(k_max), fh)


def covariance(surface, center=True):
    """Sample covariance (1/T) Y'Y, optionally after removing the column means."""
    Y = _values(surface)
    if center:
        Y = Y - Y.mean(axis=0)
    C = Y.T @ Y / Y.shape[0]
    return (C + C.T) / 2


def _fix_signs(U):
    # largest-magnitude entry of each column is made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def eigendecompose(cov, tol=1e-8):
    """Full spectral decomposition with descending eigenvalues.

    Negative round-off eigenvalues are clamped to zero. Each eigenvector
    is signed so that its largest-magnitude entry is positive.
    """
    C = check_matrix(cov, "cov")
    if C.shape[0] != C.shape[1]:
        raise ValidationError(f"covariance must be square, got {C.shape}")
    scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    if C.size and np.max(np.abs(C - C.T)) > tol * scale:
        raise ValidationError("covariance matrix is not symmetric")
    lam, U = np.linalg.eigh((C + C.T) / 2)
    order = np.argsort(lam, kind="stable")[::-1]
    lam = np.clip(lam[order], 0.0, None)
    return lam, _fix_signs(U[:, order])


def decompose(surface, center=True):
    Y = _values(surface)
    mean_row = Y.mean(axis=0) if center else np.zeros(Y.shape[1])
    lam, U = eigendecompose(covariance(Y, center=center))
    return FactorDecomposition(mean_row, lam, U, (Y - mean_row) @ U, bool(center))


def scores(surface, decomposition, K):
    """Inner products of the (centered) rows with the leading K eigenvectors."""
    Y = _values(surface)
    K = check_rank(K, decomposition.basis.shape[1])
    return (Y - decomposition.mean_row) @ decomposition.basis[:, :K]


def pve_cpve(eigenvalues):
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValidationError("eigenvalues must be a non-empty 1-D array")
    if np.any(lam < 0):
        raise ValidationError("eigenvalues must be non-negative")
    running = np.cumsum(lam)
    total = running[-1]
    if total <= 0:
        raise UndefinedVarianceError("all eigenvalues are zero")
    return lam / total, running / total


def write_eigenvalue_csv(eigenvalues, path):
    """CSV with header k,eigenvalue,pve,cpve."""
    pve, cpve = pve_cpve(eigenvalues)
    with open(path, "w") as fh:
        fh.write("k,eigenvalue,pve,cpve\n")
        for k, (lam, p, c) in enumerate(zip(eigenvalues, pve, cpve), start=1):
            fh.write(f"{k},{float(lam)!r},{float(p)!r},{float(c)!r}\n")


def reconstruct(scores, basis_columns, mean_row=None):
    """mean_row + scores @ basis_columns.T"""
    B = np.atleast_2d(np.asarray(scores, dtype=float))
    U = np.asarray(basis_columns, dtype=float)
    if U.ndim != 2 or B.shape[1] != U.shape[1]:
        raise ValidationError(f"scores {B.shape} and basis {U.shape} are not conformable")
    out = B @ U.T
    if mean_row is not None:
        mean_row = np.asarray(mean_row, dtype=float)
        if mean_row.shape != (U.shape[0],):
            raise ValidationError(f"mean_row must have length {U.shape[0]}")
        out = out + mean_row
    return out


class FunctionalPCA(TransformerMixin, BaseEstimator):
    """Eigen-decomposition of a discretised curve sample.

    Parameters
    ----------
    n_components : int or None
        Number of factors returned by ``transform``. ``None`` keeps all M.
    center : bool, default=True
        Remove the sample mean curve before forming the covariance.

    Attributes
    ----------
    mean_ : ndarray of shape (M,)
    eigenvalues_ : ndarray of shape (M,)
    components_ : ndarray of shape (M, M)
        Eigenvectors as columns.
    explained_variance_ratio_ : ndarray of shape (M,)
    cumulative_variance_ratio_ : ndarray of shape (M,)
    """

    def __init__(self, n_components=None, center=True):
        self.n_components = n_components
        self.center = center

    def fit(self, X, y=None):
        Y = _values(X)
        dec = decompose(Y, center=self.center)
        self.n_components_ = (
            Y.shape[1] if self.n_components is None else check_rank(self.n_components, Y.shape[1])
        )
        self.decomposition_ = dec
        self.mean_ = dec.mean_row
        self.eigenvalues_ = dec.eigenvalues
        self.components_ = dec.basis
        if dec.eigenvalues.sum() > 0:
            self.explained_variance_ratio_, self.cumulative_variance_ratio_ = pve_cpve(dec.eigenvalues)
        else:
            self.explained_variance_ratio_ = self.cumulative_variance_ratio_ = np.zeros_like(dec.eigenvalues)
        self.n_features_in_ = Y.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        return scores(X, self.decomposition_, self.n_components_)

    def inverse_transform(self, X):
        check_is_fitted(self, "components_")
        B = np.atleast_2d(np.asarray(X, dtype=float))
        return reconstruct(B, self.components_[:, : B.shape[1]], self.mean_)
