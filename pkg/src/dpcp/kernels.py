"""Dense matrix primitives shared by the centralized and distributed solvers."""

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError


class SvdResult(NamedTuple):
    """Thin SVD ``A = U @ diag(sigma) @ V.T``.

    ``U`` is rows x k, ``V`` is cols x k with k = min(rows, cols); ``sigma``
    is descending and keeps zero singular values.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def as_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def soft_threshold(x, lam):
    """Soft-thresholding ``sign(x) * max(|x| - lam, 0)``, entrywise on arrays.

    Scalars in give a Python float back.
    """
    if lam < 0:
        raise ValidationError(f"threshold must be nonnegative, got {lam}")
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def svd(A):
    """Thin SVD of a finite dense matrix (LAPACK ``gesdd``).

    Raises
    ------
    NumericalError
        If the LAPACK routine fails to converge.
    """
    A = as_matrix(A)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return SvdResult(U, s, Vt.T)


def svt(A, tau):
    """Singular value thresholding: the proximal map of ``tau * ||.||_*``."""
    if tau < 0:
        raise ValidationError(f"tau must be nonnegative, got {tau}")
    U, s, V = svd(A)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ V[:, keep].T


def nuclear_norm(A):
    return float(np.sum(svd(A).sigma))


def spectral_norm(A):
    s = svd(A).sigma
    return float(s[0]) if s.size else 0.0


def apply_mask(A, mask):
    """Sampling operator: zero the entries of ``A`` where ``mask`` is 0."""
    A = np.asarray(A, dtype=float)
    mask = np.asarray(mask)
    if A.shape != mask.shape:
        raise ValidationError(f"shape mismatch: {A.shape} vs mask {mask.shape}")
    return np.where(mask.astype(bool), A, 0.0)


def solve_small_spd(G, b):
    """Solve ``G x = b`` for a small symmetric positive-definite ``G``.

    Uses a Cholesky factorization; failure to factor means ``G`` is not
    numerically positive definite and is reported as a `NumericalError`.
    """
    G = np.asarray(G, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(G, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b)
