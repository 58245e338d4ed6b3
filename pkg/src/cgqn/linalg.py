"""Small dense linear algebra helpers.

Vectors and matrices are plain float64 numpy arrays. The helpers here add
the finiteness/shape validation and the pivot thresholds the rest of the
package relies on.
"""

import warnings

import numpy as np
import scipy.linalg

from .errors import SingularMatrix

SYMMETRY_RTOL = 1e-12
SINGULAR_PIVOT_RTOL = 1e-14
PD_PIVOT_RTOL = 1e-12


def as_vector(v, n=None, name="vector"):
    """Return ``v`` as a finite 1-D float64 array, optionally of length ``n``."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(M, n=None, name="matrix"):
    """Return ``M`` as a finite square float64 array."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} is {arr.shape[0]}x{arr.shape[0]}, expected {n}x{n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def asymmetry(M):
    """max |M_ij - M_ji| relative to max |M| (0 for the zero matrix)."""
    M = np.asarray(M, dtype=np.float64)
    scale = np.max(np.abs(M)) if M.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(M - M.T)) / scale)


def is_symmetric(M, rtol=SYMMETRY_RTOL):
    return asymmetry(np.asarray(M, dtype=np.float64)) <= rtol


def mat_vec(M, v):
    M = as_matrix(M)
    v = as_vector(v)
    if M.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {M.shape} matrix times length-{v.shape[0]} vector")
    return M @ v


def solve_linear(M, b):
    """Solve ``M x = b`` by LU with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides. Raises
    :class:`SingularMatrix` when a pivot falls below ``1e-14 * max|M|``.
    """
    M = as_matrix(M)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != M.shape[0]:
        raise ValueError(f"dimension mismatch: {M.shape} system with rhs of shape {b.shape}")
    scale = np.max(np.abs(M))
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    smallest = float(np.min(pivots))
    if smallest <= SINGULAR_PIVOT_RTOL * scale:
        raise SingularMatrix(
            f"pivot {smallest:.3e} below {SINGULAR_PIVOT_RTOL:g} * max|M| = {SINGULAR_PIVOT_RTOL * scale:.3e}"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def is_positive_definite(M):
    """Cholesky test on the symmetric part of ``M``.

    Every squared pivot must exceed ``1e-12 * trace(M) / n``.
    """
    M = as_matrix(M)
    if not is_symmetric(M):
        raise ValueError(f"matrix is not symmetric (relative asymmetry {asymmetry(M):.3e})")
    S = 0.5 * (M + M.T)
    n = S.shape[0]
    mean_diag = np.trace(S) / n
    if mean_diag <= 0.0:
        return False
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(L)) ** 2 > PD_PIVOT_RTOL * mean_diag)


def random_orthogonal(n, seed):
    """Seeded Haar-distributed orthogonal matrix (QR of a Gaussian matrix)."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs
