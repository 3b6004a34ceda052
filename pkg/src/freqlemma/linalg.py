"""
Dense real/complex linear-algebra primitives.

Everything here is a thin, validated layer over scipy.linalg so that the
rest of the package shares one rank convention:

    tol = max(rows, cols) * sigma_max * 2**-52

which can be overridden wherever a rank decision is made.
"""
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import InvalidInput


EPS = np.finfo(float).eps  # 2**-52


class SvdResult(NamedTuple):
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


class LeastSquaresResult(NamedTuple):
    x: np.ndarray
    residual_norm: float


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return `m` as a 2-D float or complex array."""
    arr = np.asarray(m)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInput(f"{name} is empty")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def default_tolerance(singular_values: np.ndarray, shape) -> float:
    if singular_values.size == 0:
        return 0.0
    return max(shape) * float(singular_values[0]) * EPS


def svd(m) -> SvdResult:
    """Thin SVD with nonincreasing singular values and V (not V^H)."""
    a = as_matrix(m)
    u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
    return SvdResult(u, s, vh.conj().T)


def singular_values(m) -> np.ndarray:
    return scipy.linalg.svdvals(as_matrix(m))


def rank(m, tolerance: Optional[float] = None) -> int:
    a = as_matrix(m)
    return int(np.linalg.matrix_rank(a, tol=tolerance))


def least_squares(a, b) -> LeastSquaresResult:
    """
    Minimum-norm least-squares solution of A x = b.

    `b` may be a vector or a matrix of right-hand sides; the reported
    residual is the 2-norm (Frobenius for several right-hand sides).
    """
    a = as_matrix(a, "A")
    b = np.asarray(b)
    if b.shape[0] != a.shape[0]:
        raise InvalidInput(
            f"dimension mismatch: A has {a.shape[0]} rows, b has {b.shape[0]}"
        )
    if not np.all(np.isfinite(b)):
        raise InvalidInput("b has non-finite entries")
    x, *_ = scipy.linalg.lstsq(a, b, lapack_driver="gelsd")
    residual = float(np.linalg.norm(a @ x - b))
    return LeastSquaresResult(x, residual)


def kernel_basis(m, tolerance: Optional[float] = None) -> np.ndarray:
    """Orthonormal columns spanning ker(m); singular values <= tol count as zero."""
    a = as_matrix(m)
    s = scipy.linalg.svdvals(a)
    smax = float(s[0]) if s.size else 0.0
    if smax == 0.0:
        return np.eye(a.shape[1], dtype=a.dtype)
    tol = default_tolerance(s, a.shape) if tolerance is None else float(tolerance)
    return scipy.linalg.null_space(a, rcond=tol / smax)


def row_space_basis(m, tolerance: Optional[float] = None) -> np.ndarray:
    """Orthonormal columns spanning the row space of m (i.e. range(m^H))."""
    u, s, v = svd(m)
    tol = default_tolerance(s, np.shape(m)) if tolerance is None else float(tolerance)
    return v[:, s > tol]


def pseudo_inverse(m, tolerance: Optional[float] = None) -> np.ndarray:
    a = as_matrix(m)
    if tolerance is None:
        return scipy.linalg.pinv(a)
    return scipy.linalg.pinv(a, atol=tolerance, rtol=0.0)
