"""Small input-validation helpers used across modules."""

import numpy as np

from .exceptions import ValidationError


def check_odd_M(M):
    if int(M) != M or M < 3 or M % 2 == 0:
        raise ValidationError(f"M must be an odd integer >= 3, got {M!r}")
    return int(M)


def check_matrix(Y, name="Y", allow_empty=False):
    """Return ``Y`` as a finite 2-D float array."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {Y.shape}")
    if not allow_empty and Y.shape[0] == 0:
        raise ValidationError(f"{name} has no rows")
    if not np.all(np.isfinite(Y)):
        raise ValidationError(f"{name} contains non-finite values")
    return Y


def check_series(y, name="series", min_length=1):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size < min_length:
        raise ValidationError(f"{name} needs at least {min_length} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise ValidationError(f"{name} contains non-finite values")
    return y


def check_rank(K, M):
    if int(K) != K or not 1 <= K <= M:
        raise ValidationError(f"rank K must satisfy 1 <= K <= {M}, got {K!r}")
    return int(K)


def check_orthonormal(U, name="U", tol=1e-8):
    U = check_matrix(U, name)
    K = U.shape[1]
    err = np.max(np.abs(U.T @ U - np.eye(K))) if K else 0.0
    if err > tol:
        raise ValidationError(f"{name} columns are not orthonormal (max |U'U - I| = {err:.2e})")
    return U
