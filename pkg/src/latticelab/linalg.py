"""Dense real linear algebra kernels shared by the decoding pipeline.

Matrices are plain float64 numpy arrays throughout the package; complex
inputs appear only at the channel boundary and are mapped to their real
form with :func:`real_embedding`.  All kernels validate finiteness and
refuse rank-deficient input instead of silently producing garbage.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

# Pivot floor for rank decisions, relative to the largest column norm of
# the input.  Columns whose triangular pivot falls below this are treated
# as numerically dependent.
RANK_TOL = 1e-12


class RankDeficiencyError(ValueError):
    """Raised when a kernel needs full column rank and does not get it."""


def _as_finite_array(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def real_embedding(a) -> np.ndarray:
    """Map a complex m x n matrix to its real 2m x 2n form.

    The image is [[Re A, -Im A], [Im A, Re A]], which represents the same
    linear map on stacked (real, imag) coordinate vectors.  Every singular
    value of the complex matrix appears twice in the embedded matrix.
    """
    ac = np.asarray(a, dtype=complex)
    if ac.ndim != 2:
        raise ValueError("real_embedding expects a 2-d matrix")
    _as_finite_array(ac.view(float), "matrix")
    re, im = ac.real, ac.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    return np.vstack([top, bot]).astype(float)


def thin_qr(a) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization A = Q R with a positive diagonal on R.

    A must be m x n with m >= n and full column rank; Q is m x n with
    orthonormal columns and R is n x n upper triangular with R[i, i] > 0,
    which makes the factorization unique.  Rank deficiency (any pivot at
    or below RANK_TOL times the largest column norm) raises
    RankDeficiencyError.
    """
    arr = _as_finite_array(a, "matrix").astype(float)
    if arr.ndim != 2 or arr.shape[0] < arr.shape[1]:
        raise ValueError("thin_qr expects a tall (m >= n) matrix")
    q, r = np.linalg.qr(arr, mode="reduced")
    # LAPACK does not fix pivot signs; flip rows/columns so diag(R) > 0.
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    q = q * signs
    r = signs[:, None] * r
    col_norms = np.linalg.norm(arr, axis=0)
    floor = RANK_TOL * (col_norms.max() if col_norms.size else 0.0)
    if np.any(np.diag(r) <= floor):
        raise RankDeficiencyError("matrix is numerically rank deficient")
    return q, r


def singular_values(a) -> np.ndarray:
    """Singular values of a real matrix, ascending.

    Returned ascending so that [0] is the smallest -- the quantity the
    decoding-complexity diagnostics care about.
    """
    arr = _as_finite_array(a, "matrix").astype(float)
    if arr.ndim != 2:
        raise ValueError("singular_values expects a 2-d matrix")
    return np.linalg.svd(arr, compute_uv=False)[::-1].copy()


def smallest_singular_value(a) -> float:
    return float(singular_values(a)[0])


def solve_upper(r, b) -> np.ndarray:
    """Solve R x = b for upper-triangular R by back substitution."""
    rm = _as_finite_array(r, "matrix").astype(float)
    bv = _as_finite_array(b, "rhs").astype(float)
    if np.any(np.abs(np.diag(rm)) <= 0.0):
        raise RankDeficiencyError("triangular solve with zero pivot")
    return solve_triangular(rm, bv, lower=False)


def solve_lower(l, b) -> np.ndarray:
    """Solve L x = b for lower-triangular L by forward substitution."""
    lm = _as_finite_array(l, "matrix").astype(float)
    bv = _as_finite_array(b, "rhs").astype(float)
    if np.any(np.abs(np.diag(lm)) <= 0.0):
        raise RankDeficiencyError("triangular solve with zero pivot")
    return solve_triangular(lm, bv, lower=True)
