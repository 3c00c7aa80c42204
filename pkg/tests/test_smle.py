import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from isoconf.current_status import CurrentStatusSample, mle
from isoconf.errors import DomainError
from isoconf.isotonic import LEFT_CONTINUOUS, StepFunction
from isoconf.smle import (
    TRIWEIGHT,
    asymptotic_bias_truncexp,
    ci_bandwidth,
    estimation_bandwidth,
    kernel_values,
    second_moment,
    smle_cdf,
    smle_density,
    studentized_sd,
)


def triweight_reference(u):
    return np.where(np.abs(u) <= 1, 35 / 32 * (1 - u**2) ** 3, 0.0)


def random_cdf(rng, m, lo=0.0, hi=2.0):
    knots = np.sort(rng.uniform(lo, hi, m))
    values = np.sort(rng.uniform(0, 1, m))
    if rng.uniform() < 0.5:
        values[-1] = 1.0
    return StepFunction(knots, values)


class TestKernel:
    def test_peak(self):
        assert kernel_values(TRIWEIGHT, 0.0)[0] == 35 / 32

    def test_integrated_kernel_ends(self):
        assert TRIWEIGHT.IK_cdf(0.0) == 0.5
        assert TRIWEIGHT.IK_cdf(-1.0) == 0.0
        assert TRIWEIGHT.IK_cdf(1.0) == 1.0
        assert TRIWEIGHT.IK_cdf(5.0) == 1.0

    def test_second_moment(self):
        assert abs(second_moment(TRIWEIGHT) - 1 / 9) <= 1e-12

    def test_matches_closed_form_and_quadrature(self):
        u = np.linspace(-1.2, 1.2, 49)
        np.testing.assert_allclose(TRIWEIGHT.K(u), triweight_reference(u), atol=1e-15)
        for x in (-0.7, 0.1, 0.9):
            ref, _ = integrate.quad(triweight_reference, -1, x)
            assert TRIWEIGHT.IK_cdf(x) == pytest.approx(ref, abs=1e-12)

    @settings(max_examples=50)
    @given(st.floats(-2, 2))
    def test_complement_and_symmetry(self, u):
        assert TRIWEIGHT.IK_cdf(u) + TRIWEIGHT.IK_surv(u) == pytest.approx(1.0, abs=1e-15)
        assert TRIWEIGHT.IK_cdf(-u) == pytest.approx(TRIWEIGHT.IK_surv(u), abs=1e-15)
        assert TRIWEIGHT.K(u) == TRIWEIGHT.K(-u)

    def test_tail_moment_at_zero_is_half_second_moment(self):
        assert TRIWEIGHT.tail_moment(0.0) == pytest.approx(1 / 18, abs=1e-15)
        assert TRIWEIGHT.tail_moment(1.0) == 0.0


class TestSmleCdf:
    def test_exact_ends(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            F = random_cdf(rng, int(rng.integers(1, 30)))
            h = float(rng.uniform(0.05, 1.5))
            est = smle_cdf(F, h, 2.0)
            assert est(0.0) == 0.0
            assert est(2.0) == 1.0

    def test_point_mass_interior(self):
        F = StepFunction([0.8], [1.0])
        est = smle_cdf(F, 0.3, 2.0)
        for t in (0.5, 0.9, 1.2):
            assert est(t) == pytest.approx(TRIWEIGHT.IK_cdf((t - 0.8) / 0.3), abs=1e-15)

    def test_interior_equals_uncorrected(self):
        rng = np.random.default_rng(1)
        h, b = 0.3, 2.0
        for _ in range(50):
            knots = np.sort(rng.uniform(h, b - h, 10))
            values = np.sort(rng.uniform(0, 1, 10))
            values[-1] = 1.0
            F = StepFunction(knots, values)
            est = smle_cdf(F, h, b)
            jumps = np.diff(np.concatenate(([0.0], values)))
            t = np.linspace(h, b - h, 41)
            plain = TRIWEIGHT.IK_cdf((t[:, None] - knots) / h) @ jumps
            assert np.max(np.abs(est(t) - plain)) <= 1e-12

    def test_nondecreasing(self):
        rng = np.random.default_rng(2)
        F = random_cdf(rng, 25)
        vals = smle_cdf(F, 0.4, 2.0)(np.linspace(0, 2, 1000))
        assert np.all(np.diff(vals) >= -1e-15)
        assert np.all((vals >= 0) & (vals <= 1))

    def test_bad_bandwidth(self):
        F = StepFunction([1.0], [1.0])
        with pytest.raises(DomainError):
            smle_cdf(F, 2.0, 2.0)
        with pytest.raises(DomainError):
            smle_cdf(F, 0.0, 2.0)

    def test_outside_domain(self):
        est = smle_cdf(StepFunction([1.0], [1.0]), 0.5, 2.0)
        with pytest.raises(DomainError):
            est(2.5)

    def test_mass_beyond_b(self):
        with pytest.raises(DomainError):
            smle_cdf(StepFunction([3.0], [1.0]), 0.5, 2.0)


class TestSmleDensity:
    def density_step(self, knots, values):
        return StepFunction(knots, values, continuity=LEFT_CONTINUOUS, increasing=False,
                            domain=(0.0, np.inf))

    def test_constant_density_reproduced(self):
        est = smle_density(self.density_step([2.0], [0.5]), 0.3, 2.0)
        np.testing.assert_allclose(est(np.linspace(0.3, 1.7, 15)), 0.5, rtol=1e-13)

    def test_single_segment_interior(self):
        est = smle_density(self.density_step([3.0], [1 / 3]), 0.5, 3.0)
        assert est(1.5) == pytest.approx(1 / 3, rel=1e-13)

    def test_integrates_to_one(self):
        g = self.density_step([0.5, 1.0, 2.0], [1.2, 0.6, 0.1])
        est = smle_density(g, 0.4, 2.0)
        total, _ = integrate.quad(lambda t: est(t), 0, 2, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_nonnegative(self):
        g = self.density_step([0.5, 1.0, 2.0], [1.0, 0.4, 0.05])
        assert np.all(smle_density(g, 0.4, 2.0)(np.linspace(0, 2, 300)) >= 0)


class TestStudentizedSd:
    def test_perfect_fit_is_zero(self):
        s = CurrentStatusSample([0.5, 1.0, 1.5], [0, 1, 1])
        assert studentized_sd(s, mle(s), 1.0, 0.5, 2.0) == 0.0

    def test_single_observation(self):
        s = CurrentStatusSample([1.0], [1])
        F = StepFunction([1.0], [0.25])
        h = 0.5
        expected = TRIWEIGHT.K((1.2 - 1.0) / h) / h * 0.75
        assert studentized_sd(s, F, 1.2, h, 2.0) == pytest.approx(expected, rel=1e-14)

    def test_invariant_under_relabeling(self):
        rng = np.random.default_rng(3)
        t = np.sort(rng.uniform(0, 2, 50))
        d = (rng.uniform(0, 2, 50) <= t).astype(int)
        s = CurrentStatusSample(t, d)
        F = mle(s)
        perm = rng.permutation(50)
        ties = CurrentStatusSample(t[perm][np.argsort(t[perm])], d[perm][np.argsort(t[perm])])
        np.testing.assert_array_equal(
            studentized_sd(s, F, [0.5, 1.0], 0.4, 2.0),
            studentized_sd(ties, F, [0.5, 1.0], 0.4, 2.0),
        )


class TestBias:
    def test_interior_example(self):
        expected = -0.25 * math.exp(-1) * (1 / 9) / (2 * (1 - math.exp(-2)))
        assert asymptotic_bias_truncexp(1.0, 0.5) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(-0.005909, abs=1e-6)

    def test_continuous_at_h(self):
        h = 0.4
        inner = asymptotic_bias_truncexp(h, h)
        assert asymptotic_bias_truncexp(h - 1e-9, h) == pytest.approx(inner, rel=1e-6)

    def test_vanishes_with_h(self):
        assert abs(asymptotic_bias_truncexp(1.0, 1e-6)) < 1e-12

    def test_outside_range(self):
        with pytest.raises(DomainError):
            asymptotic_bias_truncexp(2.5, 0.3)


class TestBandwidths:
    def test_estimation(self):
        assert estimation_bandwidth(36.0, 618) == pytest.approx(9.95645, abs=1e-5)

    def test_ci(self):
        assert ci_bandwidth(36.0, 618) == pytest.approx(7.2203, abs=1e-4)
