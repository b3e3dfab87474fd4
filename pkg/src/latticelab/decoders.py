"""End-to-end decoder pipelines and per-trial verdict classification.

Three decoders share one skeleton: triangularize the lattice model, form
the receive statistic, enumerate integer points within a radius.  They
differ in what they enumerate over and what they charge for:

- decode_exact_regularized: unconstrained search on the regularized R,
  no flop budget, radius doubled on empty spheres.  This realizes the
  idealized argmin over Z^kappa used as the performance baseline.
- decode_lr_regularized: basis-reduce R first, search the reduced system,
  map back through the unimodular transform.  An optional flop budget is
  shared between reduction and search; exceeding it aborts the trial.
- decode_ml_sd: box-constrained search, either on the plain QR of the
  lattice matrix or on the regularized R.

A budgeted decoder is single-shot: an empty sphere is a declared error,
matching a fixed-radius runtime policy.  Unbudgeted decoders retry with a
doubled radius until a point is found, so they always return a decision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .codes import ConstellationBox
from .linalg import singular_values, solve_upper, thin_qr
from .preprocess import DEFAULT_DELTA, lll_reduce, mmse_preprocess, receive_statistic
from .sphere import (
    STATUS_COMPLETE,
    STATUS_EMPTY,
    STATUS_TIMEOUT,
    SearchConfig,
    sphere_search,
)

VERDICT_CORRECT = "correct"
VERDICT_LATTICE = "lattice-error"
VERDICT_OUT_OF_CODEBOOK = "out-of-codebook"
VERDICT_TIMEOUT = "timeout"
VERDICT_EMPTY = "empty-sphere"
# order matches the CSV count columns
VERDICTS = (
    VERDICT_CORRECT,
    VERDICT_LATTICE,
    VERDICT_OUT_OF_CODEBOOK,
    VERDICT_TIMEOUT,
    VERDICT_EMPTY,
)

DEFAULT_MAX_RESTARTS = 60


@dataclass(frozen=True)
class DecodeResult:
    """Decision plus the accounting needed for complexity measurement.

    s_hat is None whenever the search aborted (timeout or empty sphere);
    the lattice decision, when present, lives in the code's integer frame.
    sigma_min is the smallest singular value of the matrix actually
    searched (reduced basis for the LR decoder).
    """

    s_hat: np.ndarray | None
    metric: float | None
    status: str
    nodes_per_layer: np.ndarray
    total_nodes: int
    search_flops: float
    lll_flops: float
    sigma_min: float
    n_restarts: int
    radius_final: float

    @property
    def total_flops(self) -> float:
        return self.search_flops + self.lll_flops


class _Enumeration(NamedTuple):
    best: np.ndarray | None
    metric: float | None
    status: str
    nodes_per_layer: np.ndarray
    total_nodes: int
    search_flops: float
    n_restarts: int
    radius_final: float


def _enumerate(
    r_mat: np.ndarray,
    target: np.ndarray,
    radius: float,
    flop_budget: float | None,
    enumeration: str,
    box,
    max_restarts: int,
    flops_used: float = 0.0,
    shrink_radius: bool = False,
) -> _Enumeration:
    """Run sphere_search, restarting with doubled radius when unbudgeted."""
    nodes = np.zeros(r_mat.shape[0], dtype=np.int64)
    total = 0
    search_flops = 0.0
    xi = float(radius)
    restarts = 0
    while True:
        if flop_budget is None:
            remaining = None
        else:
            remaining = flop_budget - flops_used - search_flops
            if remaining < 1.0:
                return _Enumeration(
                    None, None, STATUS_TIMEOUT, nodes, total, search_flops, restarts, xi
                )
        out = sphere_search(
            r_mat,
            target,
            SearchConfig(
                radius=xi,
                flop_budget=remaining,
                enumeration=enumeration,
                box=box,
                shrink_radius=shrink_radius,
            ),
        )
        search_flops += out.flops
        nodes = nodes + out.nodes_per_layer
        total += out.total_nodes
        if out.status != STATUS_EMPTY:
            return _Enumeration(
                out.best, out.best_metric, out.status, nodes, total, search_flops, restarts, xi
            )
        if flop_budget is not None:
            # fixed-radius policy: an empty sphere is a declared error
            return _Enumeration(None, None, STATUS_EMPTY, nodes, total, search_flops, restarts, xi)
        restarts += 1
        if restarts > max_restarts:
            raise RuntimeError("radius doubling did not reach a lattice point")
        xi *= 2.0


def decode_exact_regularized(
    m_mat: np.ndarray,
    alpha: float,
    y: np.ndarray,
    radius: float,
    *,
    enumeration: str = "natural",
    shrink_radius: bool = False,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> DecodeResult:
    """Unconstrained regularized lattice decision, exact by construction."""
    pre = mmse_preprocess(m_mat, alpha)
    target = receive_statistic(pre, y)
    e = _enumerate(
        pre.r_mat, target, radius, None, enumeration, None, max_restarts,
        shrink_radius=shrink_radius,
    )
    return DecodeResult(
        s_hat=e.best,
        metric=e.metric,
        status=e.status,
        nodes_per_layer=e.nodes_per_layer,
        total_nodes=e.total_nodes,
        search_flops=e.search_flops,
        lll_flops=0.0,
        sigma_min=singular_values(pre.r_mat)[0],
        n_restarts=e.n_restarts,
        radius_final=e.radius_final,
    )


def decode_lr_regularized(
    m_mat: np.ndarray,
    alpha: float,
    y: np.ndarray,
    radius: float,
    flop_budget: float | None = None,
    *,
    delta: float = DEFAULT_DELTA,
    enumeration: str = "natural",
    shrink_radius: bool = False,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> DecodeResult:
    """Reduction-aided regularized decision with a shared flop budget.

    Reduction runs first and its flops count against the budget; if the
    budget is already gone the trial times out without searching.  The
    search happens in the reduced coordinates and the decision maps back
    through the unimodular transform, so an unbudgeted call returns the
    same metric minimizer as decode_exact_regularized.
    """
    pre = mmse_preprocess(m_mat, alpha)
    target = receive_statistic(pre, y)
    red = lll_reduce(pre.r_mat, delta=delta)
    sigma_min = singular_values(red.r_tilde)[0]
    kappa = pre.r_mat.shape[0]
    if flop_budget is not None and flop_budget - red.lll_flops < 1.0:
        return DecodeResult(
            s_hat=None,
            metric=None,
            status=STATUS_TIMEOUT,
            nodes_per_layer=np.zeros(kappa, dtype=np.int64),
            total_nodes=0,
            search_flops=0.0,
            lll_flops=float(red.lll_flops),
            sigma_min=sigma_min,
            n_restarts=0,
            radius_final=float(radius),
        )
    target_red = red.q_tilde.T @ target
    e = _enumerate(
        red.r_tilde,
        target_red,
        radius,
        flop_budget,
        enumeration,
        None,
        max_restarts,
        flops_used=float(red.lll_flops),
        shrink_radius=shrink_radius,
    )
    if e.status != STATUS_COMPLETE:
        s_hat, metric = None, None
    else:
        s_hat = red.t_mat @ e.best
        # report the metric in the unreduced frame; equal up to rounding
        resid = target - pre.r_mat @ s_hat.astype(float)
        metric = float(resid @ resid)
    return DecodeResult(
        s_hat=s_hat,
        metric=metric,
        status=e.status,
        nodes_per_layer=e.nodes_per_layer,
        total_nodes=e.total_nodes,
        search_flops=e.search_flops,
        lll_flops=float(red.lll_flops),
        sigma_min=sigma_min,
        n_restarts=e.n_restarts,
        radius_final=e.radius_final,
    )


def decode_ml_sd(
    m_mat: np.ndarray,
    y: np.ndarray,
    box: ConstellationBox,
    radius: float | None = None,
    flop_budget: float | None = None,
    *,
    mmse: bool = False,
    alpha: float | None = None,
    enumeration: str = "natural",
    shrink_radius: bool = False,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> DecodeResult:
    """Box-constrained sphere decision (ML when mmse is off).

    With radius=None the search opens at the metric of the box-clamped
    Babai point, which guarantees a non-empty sphere in one attempt.
    """
    y = np.asarray(y, dtype=float)
    if mmse:
        if alpha is None:
            raise ValueError("mmse mode needs a regularization alpha")
        pre = mmse_preprocess(m_mat, alpha)
        r_mat = pre.r_mat
        target = receive_statistic(pre, y)
    else:
        q, r_mat = thin_qr(np.asarray(m_mat, dtype=float))
        target = q.T @ y
    if radius is None:
        babai = np.rint(solve_upper(r_mat, target)).astype(np.int64)
        babai = np.clip(babai, box.lo, box.hi)
        resid = target - r_mat @ babai.astype(float)
        radius = np.sqrt(resid @ resid) * (1.0 + 1e-9) + 1e-9
    e = _enumerate(
        r_mat, target, radius, flop_budget, enumeration, (box.lo, box.hi), max_restarts,
        shrink_radius=shrink_radius,
    )
    return DecodeResult(
        s_hat=e.best,
        metric=e.metric,
        status=e.status,
        nodes_per_layer=e.nodes_per_layer,
        total_nodes=e.total_nodes,
        search_flops=e.search_flops,
        lll_flops=0.0,
        sigma_min=singular_values(r_mat)[0],
        n_restarts=e.n_restarts,
        radius_final=e.radius_final,
    )


def classify(result: DecodeResult, s_true: np.ndarray, box: ConstellationBox | None = None) -> str:
    """Single verdict per trial, precedence: timeout > empty-sphere >
    out-of-codebook > lattice-error > correct."""
    if result.status == STATUS_TIMEOUT:
        return VERDICT_TIMEOUT
    if result.status == STATUS_EMPTY:
        return VERDICT_EMPTY
    s_hat = result.s_hat
    if box is not None and not box.contains(s_hat):
        return VERDICT_OUT_OF_CODEBOOK
    if not np.array_equal(s_hat, np.asarray(s_true)):
        return VERDICT_LATTICE
    return VERDICT_CORRECT
