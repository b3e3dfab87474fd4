"""Closed-form complexity and diversity curves plus empirical estimators.

The closed forms give the theoretical references: the piecewise-linear
complexity exponent of regularized lattice sphere decoding, its minimum-
delay specialization, the diversity-multiplexing reference curve, and an
independent grid-search oracle that recovers the complexity exponent from
its variational characterization.

The estimators read Monte Carlo sweep records: a tail-quantile regression
for the empirical complexity exponent, a paired error-ratio curve for the
performance gap, and the small-singular-value tail diagnostic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

OPT_GRID_STEP = 1.0 / 64.0


class InsufficientDataError(RuntimeError):
    """Tail probability unresolvable at every SNR with the given trials."""


@dataclass(frozen=True)
class SweepRecord:
    """Monte Carlo outcome of one (rho, r, decoder) cell."""

    rho: float
    r: float
    decoder: str
    trials: int
    verdict_counts: dict[str, int]
    flop_samples: np.ndarray = field(repr=False)
    sigma_min_samples: np.ndarray | None = field(default=None, repr=False)
    node_samples: np.ndarray | None = field(default=None, repr=False)
    n_radius_exceed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        total = sum(self.verdict_counts.values())
        if total != self.trials:
            raise ValueError(f"verdict counts sum to {total}, expected {self.trials}")
        if len(self.flop_samples) != self.trials:
            raise ValueError("one flop sample per trial required")
        if self.node_samples is not None and len(self.node_samples) != self.trials:
            raise ValueError("one node sample per trial required")

    @property
    def n_errors(self) -> int:
        return self.trials - self.verdict_counts.get("correct", 0)

    @property
    def error_rate(self) -> float:
        return self.n_errors / self.trials


def _check_r(r: float, upper: float):
    if not 0.0 <= r <= upper:
        raise ValueError(f"multiplexing gain {r} outside [0, {upper}]")


def cbar(r: float, n_t: int, t: int) -> float:
    """Complexity exponent of the regularized decoder, block length t.

    Piecewise linear in r with breakpoints at the integers; reduces to
    (t/n_t) r (n_t - r) at integer r and peaks at n_t*t/4 for r = n_t/2.
    """
    _check_r(r, n_t)
    fl = math.floor(r)
    val = r * (n_t - fl - 1) + max(n_t * fl - r * (n_t - 1), 0.0)
    return (t / n_t) * val


def c_rld_min_delay(r: float, n_t: int) -> float:
    """Minimum-delay (t = n_t) specialization of cbar."""
    _check_r(r, n_t)
    fl = math.floor(r)
    return r * (n_t - fl - 1) + max(n_t * fl - r * (n_t - 1), 0.0)


@lru_cache(maxsize=8)
def _ordered_mu_grid(n_t: int) -> np.ndarray:
    """All non-increasing n_t-tuples over {0, 1/64, ..., 1}.

    The objective and constraint are permutation-symmetric, so multisets
    cover the ordered simplex without loss.  Values above 1 contribute
    exactly as mu = 1 does, hence the [0, 1] restriction.
    """
    levels = np.linspace(0.0, 1.0, int(round(1.0 / OPT_GRID_STEP)) + 1)
    combos = np.array(
        list(combinations_with_replacement(levels[::-1], n_t)), dtype=float
    )
    return combos


def cbar_via_optimization(r: float, n_t: int, t: int) -> float:
    """Independent oracle for cbar: dense grid search over the
    singularity-level profile.

    Maximizes t * sum_j (r/n_t - (1 - mu_j))^+ subject to
    sum_j (1 - mu_j) >= r over mu_1 >= ... >= mu_{n_t} in [0, 1].
    """
    _check_r(r, n_t)
    mu = _ordered_mu_grid(n_t)
    one_minus = 1.0 - mu
    feasible = one_minus.sum(axis=1) >= r - 1e-12
    if not np.any(feasible):
        return 0.0
    gains = np.maximum(r / n_t - one_minus[feasible], 0.0).sum(axis=1)
    return float(t * gains.max())


def dmt_reference(r: float, n_t: int, n_r: int) -> float:
    """Piecewise-linear diversity curve through (k, (n_t-k)(n_r-k))."""
    m = min(n_t, n_r)
    _check_r(r, m)
    k = math.floor(r)
    if k >= m:
        return 0.0
    d0 = (n_t - k) * (n_r - k)
    d1 = (n_t - k - 1) * (n_r - k - 1)
    return d0 + (r - k) * (d1 - d0)


def _one_decoder_grid(records: list[SweepRecord]) -> list[SweepRecord]:
    if not records:
        raise ValueError("no records given")
    tags = {rec.decoder for rec in records}
    if len(tags) > 1:
        raise ValueError(f"records mix decoders {sorted(tags)}")
    rhos = [rec.rho for rec in records]
    if len(set(rhos)) != len(rhos):
        raise ValueError("duplicate rho values for one decoder")
    return sorted(records, key=lambda rec: rec.rho)


def estimate_exponent(records: list[SweepRecord], d_target: float) -> float:
    """Empirical complexity exponent from the flop tail.

    At each rho, takes the flop quantile at tail probability rho^(-d_target)
    (the smallest budget whose overrun probability decays at least as fast
    as the target error rate), then regresses ln(quantile) on ln(rho).
    Tail probabilities below the 1/trials resolution floor are clamped with
    a warning; if every rho is clamped the estimate is meaningless and an
    InsufficientDataError is raised instead.
    """
    if d_target < 0:
        raise ValueError("d_target must be non-negative")
    recs = _one_decoder_grid(records)
    if len(recs) < 4:
        raise ValueError("need at least 4 SNR points")
    rhos = np.array([rec.rho for rec in recs])
    if math.log10(rhos.max() / rhos.min()) < 2.0 - 1e-9:
        raise ValueError("SNR grid must span at least two decades")
    quantiles = []
    n_clamped = 0
    for rec in recs:
        p_tail = rec.rho ** (-d_target)
        p_floor = 1.0 / rec.trials
        if p_tail < p_floor:
            n_clamped += 1
            p_tail = p_floor
        quantiles.append(float(np.quantile(rec.flop_samples, 1.0 - p_tail)))
    if n_clamped == len(recs):
        raise InsufficientDataError(
            "tail probability below 1/trials at every SNR; increase trials"
        )
    if n_clamped:
        warnings.warn(
            f"tail quantile clamped to the 1/trials floor at {n_clamped} SNR point(s)",
            RuntimeWarning,
            stacklevel=2,
        )
    slope = np.polyfit(np.log(rhos), np.log(quantiles), 1)[0]
    return float(slope)


@dataclass(frozen=True)
class GapPoint:
    """Variant-to-exact error ratio at one SNR, with a 1-sigma band."""

    rho: float
    ratio: float | None
    sigma: float | None


def estimate_gap(exact: list[SweepRecord], variant: list[SweepRecord]) -> list[GapPoint]:
    """Per-SNR ratio of variant error rate to exact error rate.

    Assumes paired trials (same channel/noise per trial index), which the
    harness guarantees; the delta-method band below ignores the pairing
    correlation and is therefore conservative.  A zero-error denominator
    yields ratio None rather than a fabricated value.
    """
    ex = _one_decoder_grid(exact)
    va = _one_decoder_grid(variant)
    if [rec.rho for rec in ex] != [rec.rho for rec in va]:
        raise ValueError("exact and variant records must share the SNR grid")
    if [rec.r for rec in ex] != [rec.r for rec in va]:
        raise ValueError("exact and variant records must share the rate grid")
    points = []
    for rec_e, rec_v in zip(ex, va):
        if rec_e.trials != rec_v.trials:
            raise ValueError("paired records must have equal trial counts")
        if rec_e.n_errors == 0:
            points.append(GapPoint(rho=rec_e.rho, ratio=None, sigma=None))
            continue
        p_e = rec_e.error_rate
        p_v = rec_v.error_rate
        ratio = p_v / p_e
        var_log = 0.0
        if rec_v.n_errors > 0:
            var_log += (1.0 - p_v) / (rec_v.trials * p_v)
        var_log += (1.0 - p_e) / (rec_e.trials * p_e)
        points.append(GapPoint(rho=rec_e.rho, ratio=ratio, sigma=ratio * math.sqrt(var_log)))
    return points


def sigma_min_tail(
    records: list[SweepRecord], epsilon: float, t: int, kappa: int
) -> list[tuple[float, float]]:
    """Per-SNR frequency of sigma_min below the rho^(-eps*t/kappa) threshold.

    Samples hold sigma_min of the full reduced matrix, a lower bound for
    every leading submatrix by singular-value interlacing.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    recs = _one_decoder_grid(records)
    out = []
    for rec in recs:
        if rec.sigma_min_samples is None:
            raise ValueError(f"record at rho={rec.rho} has no sigma_min samples")
        threshold = rec.rho ** (-epsilon * t / kappa)
        frac = float(np.mean(np.asarray(rec.sigma_min_samples) < threshold))
        out.append((rec.rho, frac))
    return out
