"""Dense real matrix primitives shared by all modules.

Everything operates on plain float ndarrays.  Problem sizes stay small
(at most a few hundred rows), so all routines are dense and delegate the
heavy lifting to numpy/scipy LAPACK wrappers.
"""

import numpy as np
import scipy.linalg as sla

from .exceptions import DimensionError, NumericalFailureError

__all__ = [
    "as_matrix", "check_square", "kron", "dsum", "sy", "expm", "eig",
    "min_eig_sym", "max_eig_sym", "symmetrize", "is_symmetric",
]

#: relative asymmetry above which `symmetrize` refuses the input
SYM_REJECT_TOL = 1e-9


def as_matrix(a, name="matrix"):
    """Coerce to a 2-D float ndarray and require finite entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected 2-D array, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name}: non-finite entries")
    return arr


def check_square(a, name="matrix"):
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name}: expected square, got {a.shape}")
    return a


def kron(a, b):
    """Kronecker product of two matrices."""
    return np.kron(as_matrix(a), as_matrix(b))


def dsum(*blocks):
    """Direct (block-diagonal) sum of matrices.

    Accepts either ``dsum(A, B, C)`` or ``dsum([A, B, C])``.  Empty
    (zero-sized) blocks are allowed and contribute nothing.
    """
    if len(blocks) == 1 and isinstance(blocks[0], (list, tuple)):
        blocks = tuple(blocks[0])
    mats = [as_matrix(b) for b in blocks]
    if not mats:
        return np.zeros((0, 0))
    return sla.block_diag(*mats)


def sy(a):
    """Sum of a square matrix with its transpose, ``a + a.T``."""
    a = check_square(a, "sy")
    return a + a.T


def expm(a):
    """Matrix exponential (scaling-and-squaring Pade, via scipy)."""
    a = check_square(a, "expm")
    if a.size == 0:
        return np.zeros((0, 0))
    return sla.expm(a)


def eig(a):
    """All eigenvalues of a square matrix as a complex array."""
    a = check_square(a, "eig")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigenvalue iteration failed: {exc}") from exc


def min_eig_sym(a):
    """Smallest eigenvalue of a symmetric matrix."""
    a = symmetrize(a)
    if a.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(a)[0])


def max_eig_sym(a):
    """Largest eigenvalue of a symmetric matrix."""
    a = symmetrize(a)
    if a.size == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(a)[-1])


def is_symmetric(a, tol=SYM_REJECT_TOL):
    a = check_square(a, "is_symmetric")
    if a.size == 0:
        return True
    scale = max(np.abs(a).max(), 1.0)
    return np.abs(a - a.T).max() <= tol * scale


def symmetrize(a, tol=SYM_REJECT_TOL):
    """Return ``(a + a.T) / 2`` after checking the input is nearly symmetric.

    Rejects inputs whose asymmetry exceeds ``tol`` relative to the max
    entry; LMI assembly must never silently accept asymmetric blocks.
    """
    a = check_square(a, "symmetrize")
    if a.size == 0:
        return a
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise DimensionError(
            f"matrix is not symmetric (asymmetry {np.abs(a - a.T).max():.3e}, "
            f"scale {scale:.3e})")
    return 0.5 * (a + a.T)
