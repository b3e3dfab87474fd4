"""Receiver-side preprocessing: regularized QR and LLL basis reduction.

The regularized factorization stacks the effective lattice matrix M on
top of alpha * I and takes a thin QR, so R satisfies
R^T R = M^T M + alpha^2 I and the receive statistic r = Q1^T y carries a
metric penalized by alpha^2 ||s||^2.  With alpha = rho^(-rT/kappa) this
keeps the smallest singular value of R bounded away from zero at any
fixed rho, which is what tames the search tree.

lll_reduce runs LLL directly on the triangular factor, restoring
triangularity after each column swap with a single Givens rotation.  The
unimodular change of basis and its inverse are tracked exactly in 64-bit
integers; arithmetic that could wrap raises instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import _as_finite_array, thin_qr

DEFAULT_DELTA = 0.75

# Flop model for reduction cost accounting (one flop = one real
# multiply-add).  A size-reduction touches one length-kappa column; a
# swap plus Givens re-triangularization touches four.  Only the growth
# rate of the total matters for the complexity diagnostics.
SIZE_REDUCTION_FLOPS = 1  # multiplied by kappa at run time
SWAP_FLOPS = 4            # multiplied by kappa at run time

# Entries of the unimodular tracker beyond this magnitude abort the
# reduction: the next update could exceed the int64 range.
_OVERFLOW_LIMIT = 2**61


class ReductionOverflowError(OverflowError):
    """Unimodular bookkeeping left the exactly-representable int64 range."""


@dataclass(frozen=True)
class PreprocessedLattice:
    """Regularized triangular model: R, the top block Q1, and alpha."""

    r_mat: np.ndarray = field(repr=False)  # kappa x kappa upper triangular
    q1: np.ndarray = field(repr=False)     # n x kappa, top block of Q
    alpha: float


@dataclass(frozen=True)
class ReducedLattice:
    """LLL output: R T = Q~ R~ with T unimodular and R~ upper triangular."""

    t_mat: np.ndarray = field(repr=False)    # kappa x kappa int64
    t_inv: np.ndarray = field(repr=False)    # exact integer inverse of t_mat
    r_tilde: np.ndarray = field(repr=False)  # kappa x kappa upper triangular
    q_tilde: np.ndarray = field(repr=False)  # kappa x kappa orthogonal
    lll_flops: int
    n_swaps: int = 0
    n_size_reductions: int = 0


def regularization_alpha(rho: float, r: float, t: int, kappa: int) -> float:
    """Regularization weight alpha = rho^(-rT/kappa)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return float(rho ** (-r * t / kappa))


def mmse_preprocess(m: np.ndarray, alpha: float) -> PreprocessedLattice:
    """Thin QR of [M; alpha I] -> triangular search model.

    Post: R^T R = M^T M + alpha^2 I with diag(R) > 0, and
    sigma_min(R) >= alpha regardless of how degenerate M is.
    """
    m = _as_finite_array(m, "lattice matrix").astype(float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n, kappa = m.shape
    stacked = np.vstack([m, alpha * np.eye(kappa)])
    q, r_mat = thin_qr(stacked)
    return PreprocessedLattice(r_mat=r_mat, q1=q[:n].copy(), alpha=float(alpha))


def receive_statistic(pre: PreprocessedLattice, y: np.ndarray) -> np.ndarray:
    """Project the observation onto the triangular model: r = Q1^T y."""
    yv = _as_finite_array(y, "observation").astype(float)
    return pre.q1.T @ yv


def _guard_update(mu: int, dst: np.ndarray, src: np.ndarray):
    # Bound |dst -+ mu * src| in exact Python ints before touching the
    # int64 arrays; numpy would wrap silently on overflow.
    bound = abs(mu) * int(np.abs(src).max()) + int(np.abs(dst).max())
    if bound >= _OVERFLOW_LIMIT:
        raise ReductionOverflowError("unimodular tracker exceeds the int64 safe range")


def lll_reduce(r_mat: np.ndarray, delta: float = DEFAULT_DELTA, max_rounds: int | None = None) -> ReducedLattice:
    """LLL-reduce an upper-triangular basis, keeping it triangular.

    Returns T (unimodular, with exact integer inverse), the reduced
    triangular factor R~ and the orthogonal Q~ with Q~ R~ = R T.  The
    reduced basis satisfies the size-reduction condition
    |R~[j, k]| <= R~[j, j] / 2 for j < k and the delta Lovasz condition
    delta * R~[k-1, k-1]^2 <= R~[k-1, k]^2 + R~[k, k]^2.
    """
    r_in = _as_finite_array(r_mat, "triangular basis").astype(float)
    if r_in.ndim != 2 or r_in.shape[0] != r_in.shape[1]:
        raise ValueError("lll_reduce expects a square matrix")
    if not 0.25 < delta < 1.0:
        raise ValueError("delta must lie in (1/4, 1)")
    kappa = r_in.shape[0]
    if np.any(np.abs(np.diag(r_in)) == 0.0):
        raise ValueError("triangular basis is singular")
    if np.linalg.norm(np.tril(r_in, -1)) > 1e-10 * np.linalg.norm(r_in):
        raise ValueError("basis must be upper triangular")

    rt = np.triu(r_in)
    q = np.eye(kappa)
    t = np.eye(kappa, dtype=np.int64)
    t_inv = np.eye(kappa, dtype=np.int64)
    flops = 0
    swaps = 0
    reductions = 0

    # Normalize signs so the diagonal is positive (row flip on R~ paired
    # with a column flip on Q~ keeps Q~ R~ invariant).
    for i in range(kappa):
        if rt[i, i] < 0:
            rt[i, i:] *= -1.0
            q[:, i] *= -1.0

    def size_reduce(j: int, k: int):
        nonlocal flops, reductions
        mu = round(rt[j, k] / rt[j, j])
        if mu == 0:
            return
        if abs(mu) >= 2**52:
            raise ReductionOverflowError("size-reduction coefficient too large")
        _guard_update(mu, t[:, k], t[:, j])
        _guard_update(mu, t_inv[j, :], t_inv[k, :])
        rt[: j + 1, k] -= mu * rt[: j + 1, j]
        t[:, k] -= mu * t[:, j]
        t_inv[j, :] += mu * t_inv[k, :]
        flops += SIZE_REDUCTION_FLOPS * kappa
        reductions += 1

    limit = max_rounds if max_rounds is not None else 10_000 * kappa * kappa
    rounds = 0
    k = 1
    while k < kappa:
        rounds += 1
        if rounds > limit:
            raise RuntimeError("reduction failed to terminate (numerical loop)")
        size_reduce(k - 1, k)
        if delta * rt[k - 1, k - 1] ** 2 > rt[k - 1, k] ** 2 + rt[k, k] ** 2:
            # Swap columns, then one Givens rotation on the row pair
            # restores triangularity.
            rt[:, [k - 1, k]] = rt[:, [k, k - 1]]
            t[:, [k - 1, k]] = t[:, [k, k - 1]]
            t_inv[[k - 1, k], :] = t_inv[[k, k - 1], :]
            a, b = rt[k - 1, k - 1], rt[k, k - 1]
            norm = np.hypot(a, b)
            c, s = a / norm, b / norm
            g = np.array([[c, s], [-s, c]])
            rt[k - 1 : k + 1, k - 1 :] = g @ rt[k - 1 : k + 1, k - 1 :]
            q[:, k - 1 : k + 1] = q[:, k - 1 : k + 1] @ g.T
            rt[k, k - 1] = 0.0
            if rt[k, k] < 0:
                rt[k, k:] *= -1.0
                q[:, k] *= -1.0
            flops += SWAP_FLOPS * kappa
            swaps += 1
            k = max(k - 1, 1)
        else:
            for j in range(k - 2, -1, -1):
                size_reduce(j, k)
            k += 1

    return ReducedLattice(
        t_mat=t,
        t_inv=t_inv,
        r_tilde=rt,
        q_tilde=q,
        lll_flops=flops,
        n_swaps=swaps,
        n_size_reductions=reductions,
    )
