import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from robust_cascade.estimators import (
    CalibrationParams,
    SampleLog,
    block_size,
    calibrate,
    calibrated_mean_of_medians,
    empirical_mean,
    mean_of_medians_from_counts,
    q_b,
    variance_proxy,
)

ETA = 1e-6

# With alpha = 16 every block holds ~16 log s samples, so away from 1/2 all
# block majorities agree and the bisection stops at its first dyadic
# midpoint with q_b <= eta (0.25 or 0.75), whatever the true mean is.
COLLAPSE = pytest.mark.xfail(
    strict=True, reason="block majorities saturate; calibrated estimate collapses to 0.25/0.75"
)
ODD = list(range(3, 33, 2))


def q_oracle(b, p):
    """Majority probability by direct binomial summation."""
    return sum(math.comb(b, r) * p**r * (1 - p) ** (b - r) for r in range((b + 1) // 2, b + 1))


class TestMajorityMap:
    def test_identity_at_one(self):
        assert q_b(1, 0.3) == pytest.approx(0.3)

    def test_half_fixed_point(self):
        assert q_b(3, 0.5) == pytest.approx(0.5)

    def test_closed_form(self):
        # 3 * 0.2^2 * 0.8 + 0.2^3
        assert q_b(3, 0.2) == pytest.approx(0.104, abs=1e-14)

    def test_endpoints(self):
        for b in ODD:
            assert q_b(b, 0.0) == 0.0
            assert q_b(b, 1.0) == 1.0

    @pytest.mark.parametrize("b", [1, 3, 7, 15, 31])
    def test_matches_summation(self, b):
        for p in np.linspace(0, 1, 41):
            assert q_b(b, p) == pytest.approx(q_oracle(b, p), abs=1e-13)

    def test_even_rejected(self):
        with pytest.raises(ValueError):
            q_b(4, 0.3)

    def test_strictly_increasing(self):
        # near p = 1, q_b rounds to 1.0 in float, so the upper half is
        # checked through the lower tail: 1 - q_b(p) = q_b(1 - p)
        grid = np.linspace(0, 1, 1000)
        lower = grid[(grid > 0) & (grid <= 0.5)]
        for b in ODD:
            assert np.all(np.diff(q_b(b, lower)) > 0), b
            assert np.all(np.diff(q_b(b, 1 - grid[grid >= 0.5][:-1])) < 0), b
            assert np.allclose(q_b(b, 1 - lower), 1 - q_b(b, lower), atol=1e-15)

    def test_variance_domination(self):
        grid = np.linspace(0, 1, 1000)
        for b in ODD:
            q = q_b(b, grid)
            assert np.all(q * (1 - q) <= grid * (1 - grid) + 1e-12), b


class TestCalibrate:
    def test_fixed_point(self):
        assert calibrate(3, 0.5) == pytest.approx(0.5)

    def test_identity_block(self):
        assert calibrate(1, 0.37) == 0.37

    def test_inverts_closed_form(self):
        root = brentq(lambda p: q_oracle(3, p) - 0.104, 0, 1, xtol=1e-14)
        assert root == pytest.approx(0.2, abs=1e-12)
        assert calibrate(3, 0.104) == pytest.approx(root, abs=ETA)

    def test_two_thirds(self):
        root = brentq(lambda p: 3 * p**2 - 2 * p**3 - 2 / 3, 0, 1, xtol=1e-14)
        assert root == pytest.approx(0.6130368568946, abs=1e-12)
        # |q(m) - y| <= eta and q' = 6p(1-p) > 1.4 near the root
        assert calibrate(3, 2 / 3) == pytest.approx(root, abs=ETA)

    def test_round_trip(self):
        params = CalibrationParams()
        for b in ODD:
            for p in np.linspace(0.01, 0.99, 99):
                y = float(q_b(b, p))
                assert abs(q_b(b, calibrate(b, y, params)) - y) <= params.eta + 2.0**-params.max_iters

    @given(st.sampled_from(ODD), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_target(self, b, y1, y2):
        lo, hi = sorted((y1, y2))
        assert calibrate(b, lo) <= calibrate(b, hi) + 2 * ETA

    def test_iteration_cap_returns_bracket_midpoint(self):
        params = CalibrationParams(eta=1e-12, max_iters=1)
        # one step: mid 0.5 misses 0.104, bracket shrinks to [0, 0.5]
        assert calibrate(3, 0.104, params) == 0.25

    def test_bad_target(self):
        with pytest.raises(ValueError):
            calibrate(3, 1.5)


class TestParams:
    @pytest.mark.parametrize("kw", [{"alpha": 15}, {"eta": 0}, {"eta": 0.5}, {"max_iters": 0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            CalibrationParams(**kw)


class TestMeanOfMedians:
    def test_identity_partition_example(self):
        log = [1, 1, 0, 0, 1, 0, 1, 1, 1]
        # medians (1, 0, 1) -> 2/3 -> inverse of 3p^2 - 2p^3
        root = brentq(lambda p: 3 * p**2 - 2 * p**3 - 2 / 3, 0, 1, xtol=1e-14)
        est = calibrated_mean_of_medians(log, identity_partition=True, beta=3)
        assert est.value == pytest.approx(root, abs=ETA)
        assert not est.low_confidence

    def test_small_sample_fallback(self):
        est = calibrated_mean_of_medians([1] * 5)
        assert est.value == 1.0

    def test_singleton_blocks_are_empirical_mean(self):
        rng = np.random.default_rng(0)
        bits = (rng.random(101) < 0.3).astype(int)
        est = calibrated_mean_of_medians(bits, identity_partition=True, beta=1)
        assert est.value == pytest.approx(bits.mean())

    def test_empty_log_flagged(self):
        est = calibrated_mean_of_medians([])
        assert est == (0.0, True)

    def test_block_geometry(self):
        assert block_size(1000, 16) == 111
        assert block_size(2000, 16) == 123
        assert all(block_size(s, 16) % 2 == 1 for s in range(1, 3000, 17))

    def test_deterministic_given_seed_and_call(self):
        rng = np.random.default_rng(1)
        log = SampleLog((rng.random(3000) < 0.45).astype(int))
        params = CalibrationParams(partition_seed=9)
        a = calibrated_mean_of_medians(log, params, call=4)
        b = calibrated_mean_of_medians(log, params, call=4)
        assert a == b

    def test_random_partition_matches_permutation_law(self):
        """Block majorities from hypergeometric counts vs explicit shuffles."""
        s, ones, beta = 600, 290, 51
        m = s // beta
        rng = np.random.default_rng(2)
        params = CalibrationParams()
        bits = np.array([1] * ones + [0] * (s - ones))
        direct = []
        for _ in range(4000):
            blocks = rng.permutation(bits)[: m * beta].reshape(m, beta)
            direct.append(np.mean(blocks.sum(axis=1) >= (beta + 1) // 2))
        via_counts = []
        for _ in range(4000):
            colors = np.array([beta] * m + [s - m * beta])
            c = rng.multivariate_hypergeometric(colors, ones)[:m]
            via_counts.append(np.mean(c >= (beta + 1) // 2))
        assert np.mean(direct) == pytest.approx(np.mean(via_counts), abs=0.01)
        est = mean_of_medians_from_counts(s, ones, params, rng, beta)
        assert 0 <= est.value <= 1

    @pytest.mark.parametrize(
        "mu",
        [
            pytest.param(0.1, marks=COLLAPSE),
            pytest.param(0.3, marks=COLLAPSE),
            0.5,
            pytest.param(0.8, marks=COLLAPSE),
        ],
    )
    def test_calibration_unbiased_without_corruption(self, mu):
        params = CalibrationParams()
        rng = np.random.default_rng(3)
        s = 5000
        ests = [
            mean_of_medians_from_counts(s, int(rng.binomial(s, mu)), params, rng).value
            for _ in range(2000)
        ]
        assert np.mean(ests) == pytest.approx(mu, abs=0.01)


class TestEmpirical:
    def test_values(self):
        assert empirical_mean([1, 0, 1, 0]).value == 0.5
        assert empirical_mean([1, 1, 1]).value == 1.0
        assert empirical_mean([]) == (0.0, True)

    def test_monte_carlo(self):
        rng = np.random.default_rng(4)
        assert empirical_mean((rng.random(10_000) < 0.3).astype(int)).value == pytest.approx(0.3, abs=0.02)

    def test_variance_proxy(self):
        assert variance_proxy(0.5) == 0.25
        assert variance_proxy(0.0) == variance_proxy(1.0) == 0.0
        assert variance_proxy(0.2) == pytest.approx(0.16)


class TestSampleLog:
    def test_append_only_counts(self):
        log = SampleLog([1, 0, 1])
        log.append(1)
        assert len(log) == 4 and log.ones == 3
        assert list(log) == [1, 0, 1, 1]

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            SampleLog([2])
