"""Closed forms against independently computed values and identities.

The numeric constants here were computed once at 30 significant digits
with mpmath from the elementary formulas and frozen; the structural
tests (conservation, quadrature, optional stopping) are independent of
any such freezing.
"""

import math

import pytest
from scipy.integrate import quad

from fpduality import analytic
from fpduality.analytic import (
    INFINITE,
    TransientMeanError,
    UnsupportedClosedFormError,
)
from fpduality.model import ProcessSpec

LINE = ProcessSpec(1, 1.0, 1.0, 1, 0.0, 1.0)        # d=1, D=1, v=1, from x0=1
DISC = ProcessSpec(2, 1.0, 4.0, 1, 1.0, 2.0)        # d=2, v=4
BALL3 = ProcessSpec(3, 1.0, 1.0, 1, 1.0, 2.0)       # d=3, v=1
BALL4 = ProcessSpec(4, 1.0, 1.0, 1, 1.0, 2.0)


class TestOccupationDensity:
    def test_frozen_value(self):
        assert analytic.occupation_density_1d(LINE, 1.0, 1.0) == pytest.approx(
            0.13887413372136862, rel=1e-12
        )
        assert analytic.occupation_density_1d(
            LINE.with_sign(-1), 1.0, 1.0
        ) == pytest.approx(0.13887413372136862, rel=1e-12)

    def test_absorbing_boundary_is_exact_zero(self):
        for t in (0.01, 1.0, 7.0):
            assert analytic.occupation_density_1d(LINE, 0.0, t) == 0.0

    def test_conserves_mass_with_hit_cdf(self):
        # survivors plus absorbed mass account for everything
        for spec in (LINE, LINE.with_sign(-1)):
            for t in (0.25, 1.0, 4.0):
                alive, _ = quad(
                    lambda x: analytic.occupation_density_1d(spec, x, t),
                    0.0, 60.0, limit=200,
                )
                assert alive + analytic.fp_cdf_1d(spec, t) == pytest.approx(
                    1.0, abs=1e-9
                )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            analytic.occupation_density_1d(LINE, -0.5, 1.0)
        with pytest.raises(ValueError):
            analytic.occupation_density_1d(LINE, 1.0, 0.0)
        with pytest.raises(ValueError):
            analytic.occupation_density_1d(DISC, 1.0, 1.0)


class TestFirstPassageDensity:
    def test_frozen_values_and_ratio_identity(self):
        f_plus = analytic.fp_density_1d(LINE, 1.0)
        f_minus = analytic.fp_density_1d(LINE.with_sign(-1), 1.0)
        assert f_plus == pytest.approx(0.10377687435514868, rel=1e-12)
        assert f_minus == pytest.approx(0.28209479177387814, rel=1e-12)
        # dividing the outward density by the hitting weight recovers the
        # inward density, pointwise in t
        H = analytic.hitting_probability(LINE)
        assert H == pytest.approx(math.exp(-1.0), rel=1e-15)
        for t in (0.1, 0.5, 1.0, 3.0, 10.0):
            ratio = analytic.fp_density_1d(LINE, t) / H
            assert ratio == pytest.approx(
                analytic.fp_density_1d(LINE.with_sign(-1), t), rel=1e-12
            )

    def test_cdf_matches_density_quadrature(self):
        for spec in (LINE, LINE.with_sign(-1)):
            for t_end in (0.5, 2.0):
                mass, _ = quad(lambda t: analytic.fp_density_1d(spec, t), 0.0, t_end,
                               limit=200)
                assert analytic.fp_cdf_1d(spec, t_end) == pytest.approx(mass, abs=1e-10)

    def test_cdf_frozen_values_and_limits(self):
        assert analytic.fp_cdf_1d(LINE, 1.0) == pytest.approx(
            0.26258932411086373, rel=1e-12
        )
        assert analytic.fp_cdf_1d(LINE.with_sign(-1), 1.0) == pytest.approx(
            0.71379178807790350, rel=1e-12
        )
        assert analytic.fp_cdf_1d(LINE, 0.0) == 0.0
        # t -> infinity: hitting probability (defective for outward drift)
        assert analytic.fp_cdf_1d(LINE, 1e8) == pytest.approx(
            math.exp(-1.0), abs=1e-6
        )
        assert analytic.fp_cdf_1d(LINE.with_sign(-1), 1e8) == pytest.approx(
            1.0, abs=1e-6
        )

    def test_total_mass_quadrature(self):
        assert analytic.fp_density_mass(LINE) == pytest.approx(
            analytic.prob_ever_hits(LINE), abs=1e-6
        )
        assert analytic.fp_density_mass(LINE.with_sign(-1)) == pytest.approx(
            1.0, abs=1e-6
        )


class TestHittingProbability:
    def test_closed_forms(self):
        assert analytic.hitting_probability(LINE) == pytest.approx(math.exp(-1.0))
        assert analytic.hitting_probability(DISC) == pytest.approx(2.0 ** -4)
        assert analytic.hitting_probability(BALL3) == pytest.approx(
            0.6065306597126334, rel=1e-12
        )
        assert analytic.hitting_probability(BALL3, 2.0) == pytest.approx(
            math.exp(0.5 - 1.0), rel=1e-14
        )

    def test_inward_sign_and_target_are_one(self):
        for spec in (LINE, DISC, BALL3, BALL4):
            assert analytic.hitting_probability(spec.with_sign(-1)) == 1.0
            assert analytic.hitting_probability(spec, spec.target_radius) == 1.0

    def test_prob_ever_hits_d3_and_d4(self):
        assert analytic.prob_ever_hits(BALL3) == pytest.approx(
            0.37754066879814544, rel=1e-12
        )
        assert analytic.prob_ever_hits(BALL3.with_sign(-1)) == pytest.approx(
            0.6224593312018546, rel=1e-12
        )
        assert analytic.prob_ever_hits(BALL4) == pytest.approx(
            0.20524755250144138, rel=1e-12
        )
        assert analytic.prob_ever_hits(BALL4.with_sign(-1)) == pytest.approx(
            0.29863342676099574, rel=1e-12
        )

    def test_prob_ever_hits_recurrent_and_driftless(self):
        assert analytic.prob_ever_hits(LINE.with_sign(-1)) == 1.0
        assert analytic.prob_ever_hits(DISC.with_sign(-1)) == 1.0
        driftless3 = ProcessSpec(3, 1.0, 0.0, 1, 1.0, 2.0)
        assert analytic.prob_ever_hits(driftless3) == pytest.approx(0.5)
        driftless5 = ProcessSpec(5, 1.0, 0.0, -1, 1.0, 2.0)
        assert analytic.prob_ever_hits(driftless5) == pytest.approx(0.125)

    def test_exponential_form_exceeds_true_probability_beyond_2d(self):
        # the exponential factor is not a probability for d > 2
        for spec in (BALL3, BALL4):
            assert analytic.hitting_probability(spec) > analytic.prob_ever_hits(spec)


class TestTwoBoundary:
    def test_frozen_value_d3(self):
        assert analytic.two_boundary_hit_probability(BALL3, 10.0) == pytest.approx(
            0.3369578304416103, rel=1e-12
        )

    def test_optional_stopping_identity(self):
        # the exponential factor is harmonic for the outward process, so
        # stopping it at the two boundaries must conserve its expectation:
        # phi * H(a) + (1 - phi) * H(R) = H(r0)
        for spec in (BALL3, BALL4, DISC, LINE):
            R = 9.0
            phi = analytic.two_boundary_hit_probability(spec, R)
            H = lambda r: analytic.hitting_probability(spec, r)
            assert phi + (1.0 - phi) * H(R) == pytest.approx(
                H(spec.start_radius), rel=1e-12
            )

    def test_limits_to_one_boundary(self):
        # pushing the outer wall away recovers the true hit probability
        for spec in (BALL3, DISC, LINE, BALL3.with_sign(-1)):
            phi = analytic.two_boundary_hit_probability(spec, 1e7)
            assert phi == pytest.approx(analytic.prob_ever_hits(spec), abs=1e-5)

    def test_endpoints_and_domain(self):
        assert analytic.two_boundary_hit_probability(BALL3, 10.0, 1.0) == 1.0
        assert analytic.two_boundary_hit_probability(BALL3, 10.0, 10.0) == 0.0
        with pytest.raises(ValueError):
            analytic.two_boundary_hit_probability(BALL3, 10.0, 12.0)
        with pytest.raises(ValueError):
            analytic.two_boundary_hit_probability(BALL3, 0.5)

    def test_driftless_scale_branches(self):
        line0 = ProcessSpec(1, 1.0, 0.0, 1, 0.0, 1.0)
        assert analytic.two_boundary_hit_probability(line0, 4.0) == pytest.approx(0.75)
        disc0 = ProcessSpec(2, 1.0, 0.0, 1, 1.0, 2.0)
        assert analytic.two_boundary_hit_probability(disc0, 4.0) == pytest.approx(
            (math.log(4.0) - math.log(2.0)) / math.log(4.0)
        )


class TestHittingDerivative:
    def test_frozen_values(self):
        assert analytic.hitting_probability_derivative(BALL3, 1.0) == pytest.approx(-1.0)
        assert analytic.hitting_probability_derivative(BALL3, 2.0) == pytest.approx(
            -0.15163266492815836, rel=1e-12
        )

    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_matches_centered_difference(self, d):
        spec = ProcessSpec(d, 1.0, 1.0, 1, 1.0, 2.0)
        h = 1e-5
        for r in (1.0, 1.7, 3.2):
            fd = (
                analytic.hitting_probability(spec, r + h)
                - analytic.hitting_probability(spec, r - h)
            ) / (2.0 * h)
            assert analytic.hitting_probability_derivative(spec, r) == pytest.approx(
                fd, rel=1e-8
            )

    def test_rejections(self):
        with pytest.raises(UnsupportedClosedFormError):
            analytic.hitting_probability_derivative(DISC, 2.0)
        with pytest.raises(ValueError):
            analytic.hitting_probability_derivative(BALL3.with_sign(-1), 2.0)


class TestMeanFPT:
    def test_closed_forms(self):
        assert analytic.mean_fpt(LINE.with_sign(-1)) == pytest.approx(1.0)
        assert analytic.mean_fpt(LINE, conditioned=True) == pytest.approx(1.0)
        fast = ProcessSpec(1, 1.0, 4.0, -1, 0.0, 1.0)
        assert analytic.mean_fpt(fast) == pytest.approx(0.25)
        assert analytic.mean_fpt(DISC.with_sign(-1)) == pytest.approx(0.75)
        assert analytic.mean_fpt(DISC, conditioned=True) == pytest.approx(0.75)
        wide = ProcessSpec(2, 1.0, 3.0, -1, 1.0, 2.0)
        assert analytic.mean_fpt(wide) == pytest.approx(1.5)

    def test_infinite_sentinel_identity(self):
        slow = ProcessSpec(2, 1.0, 2.0, -1, 1.0, 2.0)   # v = 2D exactly
        assert analytic.mean_fpt(slow) is INFINITE
        slower = ProcessSpec(2, 1.0, 0.5, -1, 1.0, 2.0)
        assert analytic.mean_fpt(slower) is INFINITE
        driftless = ProcessSpec(1, 1.0, 0.0, -1, 0.0, 1.0)
        assert analytic.mean_fpt(driftless) is INFINITE
        # the sentinel is an enum member, never a float
        assert not isinstance(analytic.mean_fpt(slow), float)

    def test_errors(self):
        with pytest.raises(TransientMeanError):
            analytic.mean_fpt(LINE)
        with pytest.raises(UnsupportedClosedFormError):
            analytic.mean_fpt(BALL3.with_sign(-1))

    def test_is_recurrent(self):
        assert analytic.is_recurrent(LINE.with_sign(-1))
        assert analytic.is_recurrent(ProcessSpec(1, 1.0, 0.0, 1, 0.0, 1.0))
        assert not analytic.is_recurrent(LINE)
        assert analytic.is_recurrent(DISC.with_sign(-1))
        assert analytic.is_recurrent(ProcessSpec(2, 1.0, 0.0, 1, 1.0, 2.0))
        # the attracting field decays like (a/r)^(d-1), so for d >= 3 the
        # geometric repulsion wins far out even with the inward sign;
        # consistent with prob_ever_hits(BALL3 minus) = 0.622... < 1
        assert not analytic.is_recurrent(BALL3.with_sign(-1))
        assert not analytic.is_recurrent(ProcessSpec(3, 1.0, 0.0, 1, 1.0, 2.0))


class TestStationaryFactor:
    def test_constant_coefficient_factor(self):
        assert analytic.u0_factor(1.0, -1.0, 0.0, 1.0) == pytest.approx(math.exp(-1.0))
        assert analytic.u0_factor(2.0, 1.0, 0.5, 0.5) == 1.0

    def test_integral_form_reduces_to_constant_form(self):
        for x in (0.2, 1.0, 3.7):
            got = analytic.u0_factor_integral(
                lambda s: 2.0, lambda s: -1.0, 0.0, x
            )
            assert got == pytest.approx(analytic.u0_factor(2.0, -1.0, 0.0, x), rel=1e-9)

    def test_integral_form_with_varying_diffusion(self):
        # D(s) = 1 + s, sigma = 0, D' = 1: u0 = exp(-log(1+x)) = 1/(1+x)
        got = analytic.u0_factor_integral(
            lambda s: 1.0 + s, lambda s: 0.0, 0.0, 3.0,
            diffusion_prime_fn=lambda s: 1.0,
        )
        assert got == pytest.approx(0.25, rel=1e-8)
