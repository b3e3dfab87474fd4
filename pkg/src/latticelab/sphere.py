"""Fixed-radius depth-first search over triangular lattice models.

Layer semantics: for an upper-triangular kappa x kappa matrix R and a
statistic vector r, layer k of the tree holds the partial integer vectors
over the LAST k coordinates whose partial metric -- squared distance to
the last k entries of r under the lower-right k x k block of R -- is
within the squared search radius.  The search visits exactly those
partial vectors, so nodes_per_layer[k-1] is the cardinality of layer k.

Interval endpoints are rounded inward with a small guard so that points
lying exactly on the sphere boundary survive float flutter; the default
profile never shrinks the radius on leaf discovery, keeping node counts
comparable to the fixed-radius theory (radius updating is available
behind a flag).

Flop model (one flop = one real multiply-add equivalent, constants chosen
so the cost of visiting a node is bounded and independent of SNR):
expanding a node's child interval costs 2, accepting a node costs 3,
rejecting a boundary candidate costs 1.  Without a budget the total is
at most 8x the node count plus a small constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import _as_finite_array

BOUNDARY_GUARD = 1e-12

EXPAND_FLOPS = 2
VISIT_FLOPS = 3
REJECT_FLOPS = 1

STATUS_COMPLETE = "complete"
STATUS_TIMEOUT = "timeout"
STATUS_EMPTY = "empty-sphere"

ENUMERATIONS = ("natural", "nearest-first")

# Exhaustive oracles refuse boxes beyond this many points.
MAX_ORACLE_POINTS = 10_000_000
_FULL_GRID_LIMIT = 2**21


@dataclass(frozen=True)
class SearchConfig:
    """Search profile: radius, optional budget, ordering, optional box."""

    radius: float
    flop_budget: float | None = None
    enumeration: str = "natural"
    box: tuple[np.ndarray, np.ndarray] | None = None  # inclusive (lo, hi)
    shrink_radius: bool = False

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")
        if self.enumeration not in ENUMERATIONS:
            raise ValueError(f"unknown enumeration order {self.enumeration!r}")
        if self.flop_budget is not None and self.flop_budget < 0:
            raise ValueError("flop budget must be nonnegative")


@dataclass(frozen=True)
class SearchOutcome:
    best: np.ndarray | None
    best_metric: float | None
    nodes_per_layer: np.ndarray = field(repr=False)
    total_nodes: int
    flops: int
    status: str
    # Incumbent at abort time; diagnostics only, never a decode output.
    best_so_far: np.ndarray | None = field(default=None, repr=False)


def radius_from_z(z: float, rho: float) -> float:
    """Search radius xi = sqrt(z ln rho).

    z trades the chance of excluding the transmitted point against tree
    size; the natural-log base is a convention absorbed by z.
    """
    if z <= 0:
        raise ValueError("z must be positive")
    if rho <= 1:
        raise ValueError("rho must exceed 1 so the radius is real")
    return math.sqrt(z * math.log(rho))


def sphere_search(r_mat: np.ndarray, target: np.ndarray, cfg: SearchConfig) -> SearchOutcome:
    """Depth-first fixed-radius search; see module docstring for semantics.

    target may be longer than kappa, in which case its last kappa entries
    are used (they are the coordinates the triangular model acts on).
    """
    r_arr = _as_finite_array(r_mat, "triangular matrix").astype(float)
    if r_arr.ndim != 2 or r_arr.shape[0] != r_arr.shape[1]:
        raise ValueError("sphere_search expects a square matrix")
    kappa = r_arr.shape[0]
    if kappa < 1:
        raise ValueError("empty model")
    if np.abs(np.tril(r_arr, -1)).max(initial=0.0) != 0.0:
        raise ValueError("matrix must be upper triangular")
    diag = np.diag(r_arr)
    if np.any(diag == 0.0):
        raise ValueError("triangular matrix is singular")
    y_full = _as_finite_array(target, "statistic").astype(float).ravel()
    if y_full.size < kappa:
        raise ValueError("statistic shorter than the model dimension")
    y = y_full[-kappa:]

    box_lo = box_hi = None
    if cfg.box is not None:
        box_lo = np.asarray(cfg.box[0], dtype=np.int64)
        box_hi = np.asarray(cfg.box[1], dtype=np.int64)
        if box_lo.shape != (kappa,) or box_hi.shape != (kappa,):
            raise ValueError("box bounds must have length kappa")
        if np.any(box_hi < box_lo):
            raise ValueError("box has hi < lo")
        box_lo = box_lo.tolist()
        box_hi = box_hi.tolist()

    natural = cfg.enumeration == "natural"
    budget = math.inf if cfg.flop_budget is None else float(cfg.flop_budget)

    xi2 = cfg.radius * cfg.radius
    accept = xi2 * (1.0 + BOUNDARY_GUARD) + BOUNDARY_GUARD

    dg = diag.tolist()
    # cols[t][i] = R[i, t] for i < t: the column slice a descent subtracts.
    cols = [r_arr[:t, t].tolist() for t in range(kappa)]

    nodes = [0] * kappa
    total = 0
    flops = 0

    resid: list = [None] * kappa
    pm = [0.0] * kappa
    cnt = [0] * kappa
    val = [0] * kappa
    lo_s = [0] * kappa
    hi_s = [0] * kappa
    b_s = [0.0] * kappa
    nxt = [0] * kappa   # natural order cursor
    zz_c = [0] * kappa  # nearest-first center
    zz_k = [0] * kappa  # nearest-first step counter
    zz_d = [1] * kappa  # nearest-first initial side

    best_vec: list | None = None
    best_m = math.inf
    status = STATUS_COMPLETE
    timed_out = False

    def open_level(t: int, parent_m: float, resid_row: list) -> int:
        """Set up candidate enumeration at coordinate t; return count."""
        nonlocal flops
        flops += EXPAND_FLOPS
        rtt = dg[t]
        b = resid_row[t]
        rem = xi2 - parent_m
        if rem < 0.0:
            return 0
        delta = math.sqrt(rem)
        if rtt > 0.0:
            lo_f = (b - delta) / rtt
            hi_f = (b + delta) / rtt
        else:
            lo_f = (b + delta) / rtt
            hi_f = (b - delta) / rtt
        lo = math.ceil(lo_f - BOUNDARY_GUARD)
        hi = math.floor(hi_f + BOUNDARY_GUARD)
        if box_lo is not None:
            if box_lo[t] > lo:
                lo = box_lo[t]
            if box_hi[t] < hi:
                hi = box_hi[t]
        if hi < lo:
            return 0
        lo_s[t], hi_s[t], b_s[t] = lo, hi, b
        if natural:
            nxt[t] = lo
        else:
            c = round(b / rtt)
            if c < lo:
                c = lo
            elif c > hi:
                c = hi
            zz_c[t] = c
            zz_k[t] = 0
            zz_d[t] = 1 if (b / rtt - c) >= 0.0 else -1
        return hi - lo + 1

    t = kappa - 1
    resid[t] = y.tolist()
    pm[t] = 0.0
    cnt[t] = open_level(t, 0.0, resid[t])

    while True:
        if cnt[t] == 0:
            t += 1
            if t == kappa:
                break
            continue
        if natural:
            v = nxt[t]
            nxt[t] += 1
            cnt[t] -= 1
        else:
            lo, hi = lo_s[t], hi_s[t]
            c = zz_c[t]
            d = zz_d[t]
            while True:
                k = zz_k[t]
                zz_k[t] += 1
                if k == 0:
                    off = 0
                elif k & 1:
                    off = d * ((k + 1) >> 1)
                else:
                    off = -d * (k >> 1)
                v = c + off
                if lo <= v <= hi:
                    break
            cnt[t] -= 1
        e = b_s[t] - dg[t] * v
        m = pm[t] + e * e
        if m > accept:
            flops += REJECT_FLOPS
            continue
        flops += VISIT_FLOPS
        total += 1
        nodes[kappa - 1 - t] += 1
        if flops > budget:
            val[t] = v
            timed_out = True
            break
        val[t] = v
        if t == 0:
            if m < best_m or (m == best_m and best_vec is not None and val < best_vec):
                best_vec = val.copy()
                best_m = m
                if cfg.shrink_radius:
                    xi2 = m
                    accept = xi2 * (1.0 + BOUNDARY_GUARD) + BOUNDARY_GUARD
            continue
        row = resid[t]
        col = cols[t]
        child = [row[i] - v * col[i] for i in range(t)]
        resid[t - 1] = child
        pm[t - 1] = m
        cnt[t - 1] = open_level(t - 1, m, child)
        if flops > budget:
            timed_out = True
            break
        t -= 1

    nodes_arr = np.array(nodes, dtype=np.int64)
    if timed_out:
        incumbent = None if best_vec is None else np.array(best_vec, dtype=np.int64)
        return SearchOutcome(
            best=None,
            best_metric=None,
            nodes_per_layer=nodes_arr,
            total_nodes=total,
            flops=int(flops),
            status=STATUS_TIMEOUT,
            best_so_far=incumbent,
        )
    if best_vec is None:
        return SearchOutcome(
            best=None,
            best_metric=None,
            nodes_per_layer=nodes_arr,
            total_nodes=total,
            flops=int(flops),
            status=STATUS_EMPTY,
        )
    return SearchOutcome(
        best=np.array(best_vec, dtype=np.int64),
        best_metric=float(best_m),
        nodes_per_layer=nodes_arr,
        total_nodes=total,
        flops=int(flops),
        status=STATUS_COMPLETE,
    )


_GRID_CACHE: dict = {}


def _candidate_grid(los: np.ndarray, his: np.ndarray) -> np.ndarray:
    """Integer box as a (points, kappa) array, cached on the box bounds.

    Oracle sweeps hit the same few boxes thousands of times; the grid
    build dominates the scan, so keep a small FIFO of recent grids.
    """
    key = (los.tobytes(), his.tobytes())
    hit = _GRID_CACHE.get(key)
    if hit is not None:
        return hit
    grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(los, his)], indexing="ij")
    # float64 keeps the scan on the BLAS matmul path; the coordinates are
    # small integers, exactly representable, and cast back on return
    cand = np.stack([g.ravel() for g in grids], axis=1).astype(np.float64)
    if len(_GRID_CACHE) >= 4:
        _GRID_CACHE.pop(next(iter(_GRID_CACHE)))
    _GRID_CACHE[key] = cand
    return cand


def _box_argmin(a: np.ndarray, y: np.ndarray, los: np.ndarray, his: np.ndarray):
    """Exhaustive argmin of ||y - A s||^2 over an integer box.

    Candidates are scanned in lexicographic order and ties keep the first
    (lexicographically smallest) vector.
    """
    a = _as_finite_array(a, "matrix").astype(float)
    y = _as_finite_array(y, "observation").astype(float).ravel()
    kappa = a.shape[1]
    los = np.asarray(los, dtype=np.int64)
    his = np.asarray(his, dtype=np.int64)
    if los.shape != (kappa,) or his.shape != (kappa,):
        raise ValueError("box bounds must have length kappa")
    if np.any(his < los):
        raise ValueError("box has hi < lo")
    widths = (his - los + 1).astype(object)
    n_points = 1
    for w in widths:
        n_points *= int(w)
    if n_points > MAX_ORACLE_POINTS:
        raise ValueError(f"oracle box too large ({n_points} points)")

    if n_points <= _FULL_GRID_LIMIT:
        cand = _candidate_grid(los, his)
        diff = y[None, :] - cand @ a.T
        metrics = np.einsum("ij,ij->i", diff, diff)
        idx = int(np.argmin(metrics))
        return cand[idx].astype(np.int64), float(metrics[idx])

    # Chunk on the first coordinate; inner grid built once.
    inner = _candidate_grid(los[1:], his[1:])
    best_vec = None
    best_m = math.inf
    head = np.empty((inner.shape[0], 1), dtype=np.int32)
    for v in range(int(los[0]), int(his[0]) + 1):
        head.fill(v)
        cand = np.hstack([head, inner])
        diff = y[None, :] - cand @ a.T
        metrics = np.einsum("ij,ij->i", diff, diff)
        idx = int(np.argmin(metrics))
        if metrics[idx] < best_m:
            best_m = float(metrics[idx])
            best_vec = cand[idx].astype(np.int64)
    return best_vec, best_m


def brute_force_cvp(r_mat: np.ndarray, target: np.ndarray, coord_bound: int):
    """Exhaustive closest-vector oracle over the box [-B, B]^kappa.

    Returns (argmin vector, metric).  Ties resolve to the
    lexicographically smallest vector.  Refuses boxes larger than
    MAX_ORACLE_POINTS.
    """
    r_arr = np.asarray(r_mat, dtype=float)
    kappa = r_arr.shape[1]
    y = np.asarray(target, dtype=float).ravel()[-r_arr.shape[0] :]
    b = int(coord_bound)
    if b < 0:
        raise ValueError("coordinate bound must be nonnegative")
    ones = np.ones(kappa, dtype=np.int64)
    return _box_argmin(r_arr, y, -b * ones, b * ones)


def brute_force_ml(m_mat: np.ndarray, y: np.ndarray, box) -> tuple[np.ndarray, float]:
    """Exhaustive maximum-likelihood oracle over a constellation box."""
    return _box_argmin(np.asarray(m_mat, dtype=float), y, box.lo, box.hi)
