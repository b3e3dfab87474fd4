import math

import numpy as np
import pytest

from latticelab.analysis import (
    GapPoint,
    InsufficientDataError,
    SweepRecord,
    c_rld_min_delay,
    cbar,
    cbar_via_optimization,
    dmt_reference,
    estimate_exponent,
    estimate_gap,
    sigma_min_tail,
)


def record(rho, flops, decoder="sd", trials=None, n_correct=None, sigma=None, r=1.0):
    flops = np.asarray(flops, dtype=float)
    trials = len(flops) if trials is None else trials
    n_correct = trials if n_correct is None else n_correct
    counts = {
        "correct": n_correct,
        "lattice-error": trials - n_correct,
        "out-of-codebook": 0,
        "timeout": 0,
        "empty-sphere": 0,
    }
    return SweepRecord(
        rho=rho,
        r=r,
        decoder=decoder,
        trials=trials,
        verdict_counts=counts,
        flop_samples=flops,
        sigma_min_samples=sigma,
    )


class TestClosedForms:
    def test_cbar_unit_point(self):
        assert cbar(1.0, 2, 2) == pytest.approx(1.0)

    def test_cbar_zero_endpoints(self):
        for n_t in (2, 3, 4):
            assert cbar(0.0, n_t, n_t) == 0.0
            assert cbar(float(n_t), n_t, n_t) == pytest.approx(0.0)

    def test_cbar_integer_form(self):
        for n_t in (2, 3, 4):
            for t in (n_t, n_t + 1):
                for r in range(n_t + 1):
                    assert cbar(float(r), n_t, t) == pytest.approx(t / n_t * r * (n_t - r))

    def test_cbar_peak_even_n_t(self):
        assert cbar(1.0, 2, 2) == pytest.approx(2 * 2 / 4)
        assert cbar(2.0, 4, 4) == pytest.approx(4 * 4 / 4)
        # the peak dominates the 0.05 grid
        grid = np.arange(0, 4.0001, 0.05)
        assert max(cbar(x, 4, 4) for x in grid) == pytest.approx(4.0)

    def test_cbar_half_integer(self):
        assert cbar(1.5, 2, 2) == pytest.approx(0.5)

    def test_cbar_continuous_at_breakpoints(self):
        for n_t, t in ((2, 2), (3, 3), (4, 5)):
            for k in range(1, n_t):
                below = cbar(k - 1e-9, n_t, t)
                above = cbar(k + 1e-9, n_t, t)
                assert below == pytest.approx(above, abs=1e-6)

    def test_cbar_range_check(self):
        with pytest.raises(ValueError):
            cbar(-0.1, 2, 2)
        with pytest.raises(ValueError):
            cbar(2.1, 2, 2)

    def test_min_delay_known_values(self):
        assert c_rld_min_delay(1.0, 4) == pytest.approx(3.0)
        assert c_rld_min_delay(1.5, 2) == pytest.approx(0.5)
        for n_t in (2, 3, 4):
            assert c_rld_min_delay(float(n_t), n_t) == pytest.approx(0.0)

    def test_min_delay_equals_cbar_at_t_eq_n_t(self):
        for n_t in (2, 3, 4):
            for r in np.arange(0, n_t + 1e-9, 0.1):
                assert c_rld_min_delay(float(r), n_t) == pytest.approx(
                    cbar(float(r), n_t, n_t)
                )

    def test_dmt_corners(self):
        assert dmt_reference(0.0, 2, 2) == 4.0
        assert dmt_reference(1.0, 2, 2) == 1.0
        assert dmt_reference(2.0, 2, 2) == 0.0
        assert dmt_reference(0.5, 2, 2) == pytest.approx(2.5)
        assert dmt_reference(1.0, 4, 4) == 9.0

    def test_dmt_rectangular(self):
        assert dmt_reference(0.0, 2, 3) == 6.0
        assert dmt_reference(1.5, 2, 3) == pytest.approx(1.0)

    def test_dmt_range_check(self):
        with pytest.raises(ValueError):
            dmt_reference(2.5, 2, 2)


class TestOptimizationOracle:
    def test_zero_rate(self):
        assert cbar_via_optimization(0.0, 2, 2) == 0.0

    def test_full_rate(self):
        # constraint forces every level to zero, objective collapses
        for n_t in (2, 3):
            assert cbar_via_optimization(float(n_t), n_t, n_t) == pytest.approx(0.0, abs=1e-9)

    def test_matches_closed_form_small_systems(self):
        for n_t, t in ((2, 2), (2, 3), (3, 3)):
            tol = 2.0 * t * n_t / 64.0
            for r in np.arange(0.0, n_t + 1e-9, 0.1):
                a = cbar(float(r), n_t, t)
                b = cbar_via_optimization(float(r), n_t, t)
                assert abs(a - b) <= tol, (n_t, t, r, a, b)

    def test_never_exceeds_closed_form_by_more_than_grid(self):
        # grid search under-shoots a maximum; it must never overshoot much
        for r in (0.5, 1.0, 1.5):
            assert cbar_via_optimization(r, 2, 2) <= cbar(r, 2, 2) + 1e-9


class TestExponentEstimator:
    rhos = (1e1, 1e2, 1e3, 1e4)

    def make(self, law, trials=4000, decoder="sd"):
        rng = np.random.default_rng(0)
        recs = []
        for rho in self.rhos:
            recs.append(record(rho, law(rho, rng, trials), decoder=decoder, trials=trials))
        return recs

    def test_exact_power_law(self):
        recs = self.make(lambda rho, rng, n: np.full(n, rho**2))
        assert estimate_exponent(recs, d_target=0.5) == pytest.approx(2.0, abs=0.01)

    def test_flat_law(self):
        recs = self.make(lambda rho, rng, n: np.full(n, 1000.0))
        assert estimate_exponent(recs, d_target=0.5) == pytest.approx(0.0, abs=0.01)

    def test_noisy_power_law(self):
        recs = self.make(lambda rho, rng, n: rho**1.5 * (1 + rng.uniform(0, 0.1, n)))
        assert estimate_exponent(recs, d_target=0.5) == pytest.approx(1.5, abs=0.1)

    def test_scale_invariance(self):
        recs = self.make(lambda rho, rng, n: rho**1.2 * (1 + rng.uniform(0, 0.2, n)))
        scaled = [
            record(rec.rho, rec.flop_samples * 7.0, trials=rec.trials) for rec in recs
        ]
        assert estimate_exponent(scaled, 0.5) == pytest.approx(
            estimate_exponent(recs, 0.5), abs=1e-9
        )

    def test_all_clamped_raises(self):
        recs = self.make(lambda rho, rng, n: np.full(n, rho), trials=50)
        with pytest.raises(InsufficientDataError):
            estimate_exponent(recs, d_target=5.0)

    def test_partial_clamp_warns(self):
        recs = self.make(lambda rho, rng, n: np.full(n, rho), trials=2000)
        # rho^-1.5 < 1/2000 only at the two highest SNRs
        with pytest.warns(RuntimeWarning):
            out = estimate_exponent(recs, d_target=1.5)
        assert out == pytest.approx(1.0, abs=0.05)

    def test_needs_four_points(self):
        recs = self.make(lambda rho, rng, n: np.full(n, rho))[:3]
        with pytest.raises(ValueError):
            estimate_exponent(recs, 0.5)

    def test_needs_two_decades(self):
        recs = [record(rho, np.full(100, rho)) for rho in (10, 20, 40, 80)]
        with pytest.raises(ValueError):
            estimate_exponent(recs, 0.5)

    def test_rejects_mixed_decoders(self):
        recs = self.make(lambda rho, rng, n: np.full(n, rho))
        recs[0] = record(recs[0].rho, recs[0].flop_samples, decoder="other")
        with pytest.raises(ValueError):
            estimate_exponent(recs, 0.5)


class TestGapEstimator:
    def test_identical_records_give_unit_ratio(self):
        ex = [record(rho, np.ones(100), n_correct=90) for rho in (10.0, 100.0)]
        va = [record(rho, np.ones(100), n_correct=90, decoder="v") for rho in (10.0, 100.0)]
        for pt in estimate_gap(ex, va):
            assert pt.ratio == pytest.approx(1.0)
            assert pt.sigma > 0

    def test_all_error_variant(self):
        ex = [record(10.0, np.ones(200), n_correct=190)]
        # need >= 1 record each; grid check is on equality not length
        va = [record(10.0, np.ones(200), n_correct=0, decoder="v")]
        (pt,) = estimate_gap(ex, va)
        assert pt.ratio == pytest.approx(1.0 / (10 / 200))

    def test_zero_denominator_reported_as_none(self):
        ex = [record(10.0, np.ones(100), n_correct=100)]
        va = [record(10.0, np.ones(100), n_correct=95, decoder="v")]
        (pt,) = estimate_gap(ex, va)
        assert pt.ratio is None and pt.sigma is None

    def test_mismatched_grid_rejected(self):
        ex = [record(10.0, np.ones(10), n_correct=9)]
        va = [record(20.0, np.ones(10), n_correct=9, decoder="v")]
        with pytest.raises(ValueError):
            estimate_gap(ex, va)

    def test_mismatched_trials_rejected(self):
        ex = [record(10.0, np.ones(10), n_correct=9)]
        va = [record(10.0, np.ones(20), n_correct=18, decoder="v")]
        with pytest.raises(ValueError):
            estimate_gap(ex, va)


class TestSigmaMinTail:
    def test_hand_counted_fraction(self):
        # threshold = 100^(-eps*t/kappa) = 100^(-0.25) ~ 0.3162
        rec = record(100.0, np.ones(3), sigma=np.array([0.1, 0.5, 1.0]))
        ((rho, frac),) = sigma_min_tail([rec], epsilon=1.0, t=2, kappa=8)
        assert rho == 100.0
        assert frac == pytest.approx(1.0 / 3.0)

    def test_identity_like_samples_never_below(self):
        recs = [
            record(rho, np.ones(4), sigma=np.ones(4)) for rho in (10.0, 100.0, 1000.0)
        ]
        for _, frac in sigma_min_tail(recs, epsilon=1.0, t=2, kappa=8):
            assert frac == 0.0

    def test_missing_samples_rejected(self):
        rec = record(100.0, np.ones(3))
        with pytest.raises(ValueError):
            sigma_min_tail([rec], epsilon=0.5, t=2, kappa=8)

    def test_bad_epsilon_rejected(self):
        rec = record(100.0, np.ones(3), sigma=np.ones(3))
        with pytest.raises(ValueError):
            sigma_min_tail([rec], epsilon=0.0, t=2, kappa=8)


class TestSweepRecord:
    def test_conservation_enforced(self):
        with pytest.raises(ValueError):
            SweepRecord(
                rho=10.0,
                r=1.0,
                decoder="sd",
                trials=5,
                verdict_counts={"correct": 3},
                flop_samples=np.ones(5),
            )

    def test_sample_length_enforced(self):
        with pytest.raises(ValueError):
            SweepRecord(
                rho=10.0,
                r=1.0,
                decoder="sd",
                trials=5,
                verdict_counts={"correct": 5},
                flop_samples=np.ones(4),
            )

    def test_error_rate(self):
        rec = record(10.0, np.ones(10), n_correct=7)
        assert rec.n_errors == 3
        assert rec.error_rate == pytest.approx(0.3)
