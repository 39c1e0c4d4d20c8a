import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxmix.exceptions import ParameterDomainError, UsageError
from maxmix.models import (TEG, BrownResnick, ExponentialCorrelation, ModelSpec, Smith, Variogram,
                           ad_range, bivariate_cdf_mm, bivariate_cdf_ms, chi, chibar,
                           dependence_profile, disk_overlap, exponent_measure_V,
                           extremal_coefficient, inverse_transform_g, mm_cdf_partials,
                           mm_cdf_partials_numeric,
                           tail_dependence_eta)

from . import oracles

# frozen high-precision references (mpmath, 40 digits)
TWO_PHI_1 = 1.6826894921370859
BR_THETA_H1 = 1.4260150518480169
G_HALF_SCALE_AT_1 = 1.0720961853649324
MM1_CDF_H01_Z2 = 0.51297804265175804
ETA_SMITH06_H1 = 1.3500788258230078 / 2

FAMILIES = [Smith(0.6), Smith(2.0), BrownResnick(1.5, 0.4), BrownResnick(0.3, 2.0),
            TEG(0.2, 0.25), TEG(1.0, 0.5)]

pos = st.floats(1e-2, 1e2, allow_nan=False)
lag = st.floats(0.0, 3.0, allow_nan=False)
fam = st.sampled_from(FAMILIES)


def _oracle_V(family, h, x1, x2):
    if isinstance(family, Smith):
        return oracles.V_smith(h, x1, x2, family.sigma)
    if isinstance(family, BrownResnick):
        return oracles.V_br(h, x1, x2, family.sigma2, family.theta)
    return oracles.V_teg(h, x1, x2, family.corr.theta, family.r)


class TestCorrelationAndVariogram:
    def test_exponential_correlation(self):
        rho = ExponentialCorrelation(0.5)
        assert rho(0.0) == 1.0
        h = np.linspace(0, 5, 50)
        v = rho(h)
        assert np.all((v > 0) & (v <= 1)) and np.all(np.diff(v) <= 0)

    def test_variogram_limits(self):
        gam = Variogram(2.0, 0.3)
        assert gam(0.0) == 0.0
        assert gam(1e3) == pytest.approx(2.0)
        assert np.all(np.diff(gam(np.linspace(0, 4, 40))) >= 0)

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
    def test_nonpositive_parameters(self, bad):
        with pytest.raises(ParameterDomainError):
            ExponentialCorrelation(bad)
        with pytest.raises(ParameterDomainError):
            Smith(bad)
        with pytest.raises(ParameterDomainError):
            TEG(0.2, bad)


class TestExtremalCoefficient:
    def test_smith_at_zero(self):
        assert extremal_coefficient(Smith(3.7), 0.0) == 1.0

    def test_teg_beyond_twice_radius(self):
        assert extremal_coefficient(TEG(0.2, 0.25), 0.5) == 2.0

    def test_smith_reference_value(self):
        assert extremal_coefficient(Smith(1.0), 2.0) == pytest.approx(TWO_PHI_1, rel=1e-14)
        assert TWO_PHI_1 == pytest.approx(float(2 * oracles.Phi(1)), rel=1e-15)

    def test_negative_lag_rejected(self):
        with pytest.raises(ParameterDomainError):
            extremal_coefficient(Smith(1.0), -0.1)

    @pytest.mark.parametrize("family", FAMILIES, ids=repr)
    def test_range_and_monotone(self, family):
        h = np.linspace(0, 4, 200)
        th = extremal_coefficient(family, h)
        assert th[0] == pytest.approx(1.0)
        assert np.all((th >= 1) & (th <= 2))
        assert np.all(np.diff(th) >= -1e-14)

    def test_eta_examples(self):
        assert tail_dependence_eta(BrownResnick(1, 1), 0.0) == 1.0
        assert tail_dependence_eta(TEG(0.2, 0.25), 1.0) == 0.5
        assert tail_dependence_eta(Smith(1.0), 2.0) == pytest.approx(1 / TWO_PHI_1, rel=1e-14)


class TestExponentMeasure:
    def test_examples(self):
        assert exponent_measure_V(Smith(0.4), 0.0, 3.0, 3.0) == pytest.approx(1 / 3)
        assert exponent_measure_V(TEG(0.2, 0.25), 0.7, 1.0, 2.0) == pytest.approx(1.5)
        assert exponent_measure_V(BrownResnick(1.0, 1.0), 1.0, 1.0, 1.0) == pytest.approx(
            BR_THETA_H1, rel=1e-14)

    def test_nonpositive_argument(self):
        with pytest.raises(ParameterDomainError):
            exponent_measure_V(Smith(1.0), 1.0, 0.0, 1.0)

    @given(fam, lag, pos, pos)
    def test_matches_high_precision_oracle(self, family, h, x1, x2):
        got = exponent_measure_V(family, h, x1, x2)
        assert got == pytest.approx(float(_oracle_V(family, h, x1, x2)), rel=1e-12)

    @given(fam, lag, pos, pos, st.floats(1e-2, 1e2))
    def test_homogeneity(self, family, h, x1, x2, t):
        v = exponent_measure_V(family, h, x1, x2)
        assert exponent_measure_V(family, h, t * x1, t * x2) == pytest.approx(v / t, rel=1e-12)

    @given(fam, lag, pos, pos)
    def test_dependence_bounds(self, family, h, x1, x2):
        v = exponent_measure_V(family, h, x1, x2)
        tol = 1e-12 * (1 / x1 + 1 / x2)
        assert max(1 / x1, 1 / x2) - tol <= v <= 1 / x1 + 1 / x2 + tol

    @given(fam, lag, pos)
    def test_diagonal_is_extremal_coefficient(self, family, h, x):
        assert x * exponent_measure_V(family, h, x, x) == pytest.approx(
            extremal_coefficient(family, h), rel=1e-12)

    @pytest.mark.parametrize("family", FAMILIES, ids=repr)
    def test_partials_against_finite_differences(self, family):
        rng = np.random.default_rng(3)
        for _ in range(10):
            h = rng.uniform(0.05, 1.5)
            x1, x2 = rng.uniform(0.3, 5.0, 2)
            V, V1, V2, V12 = family.exponent_partials(h, x1, x2)
            ref = lambda a, b: _oracle_V(family, h, a, b)
            exact1 = float(mp.diff(ref, (x1, x2), (1, 0)))
            exact2 = float(mp.diff(ref, (x1, x2), (0, 1)))
            exact12 = float(mp.diff(ref, (x1, x2), (1, 1)))
            assert V1 == pytest.approx(exact1, rel=1e-9, abs=1e-14)
            assert V2 == pytest.approx(exact2, rel=1e-9, abs=1e-14)
            assert V12 == pytest.approx(exact12, rel=1e-8, abs=1e-14)


class TestInverseTransform:
    def test_fixed_point(self):
        z = 1 / math.log(2)
        assert inverse_transform_g(z) == pytest.approx(z, rel=1e-14)

    def test_large_argument_tends_to_zero(self):
        # decay is only logarithmic: g(z) ~ 1 / log z
        assert 0 < inverse_transform_g(1e300) < 1.5e-3
        assert inverse_transform_g(1e300) == pytest.approx(1 / (300 * math.log(10)), rel=1e-12)

    def test_half_scale_reference(self):
        assert inverse_transform_g(1.0, 0.5) == pytest.approx(G_HALF_SCALE_AT_1, rel=1e-14)
        assert G_HALF_SCALE_AT_1 == pytest.approx(float(oracles.g(1, 0.5)), rel=1e-15)

    @pytest.mark.parametrize("z,scale", [(0.0, 1.0), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
    def test_domain(self, z, scale):
        with pytest.raises(ParameterDomainError):
            inverse_transform_g(z, scale)

    @given(st.floats(1e-3, 1e4), st.floats(1e-3, 1.0))
    def test_matches_oracle(self, z, s):
        assert inverse_transform_g(z, s) == pytest.approx(float(oracles.g(z, s)), rel=1e-10)

    @given(st.floats(1e-2, 1e3))
    def test_involution_at_unit_scale(self, z):
        assert inverse_transform_g(inverse_transform_g(z)) == pytest.approx(z, rel=1e-9)

    def test_strictly_decreasing(self):
        z = np.geomspace(1e-3, 1e4, 500)
        assert np.all(np.diff(inverse_transform_g(z, 0.7)) < 0)


class TestBivariateCDF:
    def test_ms_examples(self):
        assert bivariate_cdf_ms(Smith(1.0), 0.0, 1.0, 1.0) == pytest.approx(math.exp(-1))
        assert bivariate_cdf_ms(TEG(0.2, 0.25), 0.6, 1.0, 1.0) == pytest.approx(math.exp(-2))
        assert bivariate_cdf_ms(Smith(1.0), 2.0, 1.0, 1.0) == pytest.approx(
            math.exp(-TWO_PHI_1), rel=1e-14)

    def test_ms_margin_limit(self):
        for family in FAMILIES:
            assert bivariate_cdf_ms(family, 0.3, 1.7, 1e12) == pytest.approx(math.exp(-1 / 1.7))

    def test_mm_endpoint_cases(self):
        spec1 = ModelSpec(1.0, Smith(0.3), Smith(4.0))
        assert bivariate_cdf_mm(spec1, 0.0, 1.0, 1.0) == pytest.approx(math.exp(-1))
        spec0 = ModelSpec(0.0, None, Smith(0.6))
        assert bivariate_cdf_mm(spec0, 0.4, 0.8, 1e12) == pytest.approx(math.exp(-1 / 0.8),
                                                                         rel=1e-9)

    def test_mm_reference_value(self, mm1_spec):
        assert bivariate_cdf_mm(mm1_spec, 0.1, 2.0, 2.0) == pytest.approx(MM1_CDF_H01_Z2,
                                                                          rel=1e-12)

    @given(st.sampled_from([0.0, 0.2, 0.5, 0.9, 1.0]), fam, fam, lag, pos, pos)
    def test_mm_matches_oracle(self, a, fx, fy, h, z1, z2):
        spec = ModelSpec(a, fx, fy)
        want = oracles.cdf_mm(a, lambda x1, x2: _oracle_V(fx, h, x1, x2),
                              lambda y1, y2: _oracle_V(fy, h, y1, y2), z1, z2)
        assert bivariate_cdf_mm(spec, h, z1, z2) == pytest.approx(float(want), rel=1e-8,
                                                                  abs=1e-13)

    @given(st.floats(0, 1), fam, fam, lag, pos)
    def test_mm_margin_is_unit_frechet(self, a, fx, fy, h, z):
        spec = ModelSpec(a, fx, fy)
        assert bivariate_cdf_mm(spec, h, z, 1e12) == pytest.approx(math.exp(-1 / z), rel=1e-8,
                                                                   abs=1e-12)

    @pytest.mark.parametrize("a", [0.0, 0.3, 0.5, 1.0])
    def test_mm_nondecreasing(self, a):
        spec = ModelSpec(a, TEG(0.2, 0.25), BrownResnick(1.0, 0.5))
        z = np.geomspace(0.05, 50, 200)
        for h in (0.05, 0.3, 1.0):
            v1 = np.asarray(bivariate_cdf_mm(spec, h, z, 1.3))
            v2 = np.asarray(bivariate_cdf_mm(spec, h, 0.7, z))
            assert np.all(np.diff(v1) >= -1e-15) and np.all(np.diff(v2) >= -1e-15)
            assert np.all((v1 >= 0) & (v1 <= 1))

    @pytest.mark.parametrize("a", [0.0, 0.35, 0.5, 0.8, 1.0])
    @pytest.mark.parametrize("x_family,y_family", [(TEG(0.2, 0.25), Smith(0.6)),
                                                   (TEG(0.3, 0.4), BrownResnick(1.2, 0.3)),
                                                   (BrownResnick(0.8, 0.5), Smith(0.2))])
    def test_partials_against_central_differences(self, a, x_family, y_family):
        spec = ModelSpec(a, x_family, y_family)
        rng = np.random.default_rng(17)
        for _ in range(20):
            h = rng.uniform(0.02, 1.2)
            z1, z2 = np.exp(rng.uniform(np.log(0.3), np.log(20), 2))
            G, G1, G2, G12 = mm_cdf_partials(spec, h, z1, z2)
            _, fd1, fd2, fd12 = mm_cdf_partials_numeric(spec, h, z1, z2)
            assert G == pytest.approx(bivariate_cdf_mm(spec, h, z1, z2))
            assert G1 == pytest.approx(fd1, rel=1e-5, abs=1e-12)
            assert G2 == pytest.approx(fd2, rel=1e-5, abs=1e-12)
            assert G12 == pytest.approx(fd12, rel=1e-4, abs=1e-10)


class TestTailCoefficients:
    def test_chi_examples(self):
        assert chi(ModelSpec(0.0, None, Smith(1.0)), 0.3) == 0.0
        assert chi(ModelSpec(1.0, Smith(1.0)), 2.0) == pytest.approx(2 - TWO_PHI_1, rel=1e-13)

    def test_chi_arithmetic(self):
        # h chosen so that Theta_X(h) = 1.5 exactly for Smith: 2 Phi(h/(2 sqrt s)) = 1.5
        from scipy.special import ndtri

        s = 0.7
        h = 2 * math.sqrt(s) * float(ndtri(0.75))
        assert chi(ModelSpec(0.5, Smith(s), Smith(1.0)), h) == pytest.approx(0.25)

    @given(st.floats(0, 1), fam, lag)
    def test_chi_plus_a_theta_is_2a(self, a, fx, h):
        spec = ModelSpec(a, fx, Smith(1.0))
        assert chi(spec, h) + a * spec.theta_x(h) == pytest.approx(2 * a, abs=1e-14)

    def test_chibar_examples(self, mm1_spec):
        assert chibar(mm1_spec, 0.1) == 1.0
        # inverted TEG beyond 2r has eta = 1/2
        spec0 = ModelSpec(0.0, None, TEG(0.2, 0.25))
        assert chibar(spec0, 0.6) == pytest.approx(0.0)
        assert chibar(mm1_spec, 1.0) == pytest.approx(2 * ETA_SMITH06_H1 - 1, rel=1e-12)

    def test_ad_range(self, mm1_spec):
        assert ad_range(mm1_spec) == 0.5
        assert ad_range(ModelSpec(1.0, Smith(1.0))) == np.inf
        assert ad_range(ModelSpec(0.0, None, Smith(1.0))) == 0.0


class TestDependenceProfile:
    def test_point_zero_pure_max_stable(self):
        p = dependence_profile(ModelSpec(1.0, TEG(0.2, 0.25)), [0.0])
        assert p.theta_x[0] == 1.0 and p.chi[0] == 1.0 and p.nu_f[0] == 0.0

    def test_invariants_and_monotone(self, mm1_spec):
        grid = np.linspace(0, 3, 301)
        p = dependence_profile(mm1_spec, grid)
        assert np.all((p.theta_x >= 1) & (p.theta_x <= 2))
        assert np.all((p.eta_y > 0) & (p.eta_y <= 1))
        assert np.all((p.chi >= 0) & (p.chi <= 1))
        assert np.all((p.chibar >= -1) & (p.chibar <= 1))
        assert np.all((p.nu_f >= 0) & (p.nu_f <= 1 / 6 + 1e-12))
        assert np.all(np.diff(p.theta_x) >= -1e-14) and np.all(np.diff(p.chi) <= 1e-14)
        with pytest.raises(ValueError):
            p.nu_f[0] = 1.0
        assert set(p.as_table()) == {"h", "theta", "eta", "chi", "chibar", "nu_f"}

    def test_two_sill_shape(self, mm1_spec):
        # steep rise inside the asymptotic-dependence range 2r, slow approach afterwards
        h = np.linspace(0.0, 2.0, 401)
        nu = dependence_profile(mm1_spec, h).nu_f
        inside = (nu[h <= 0.5][-1] - nu[0]) / 0.5
        outside = (nu[-1] - nu[h >= 0.5][0]) / 1.5
        assert inside > 5 * outside > 0
        assert nu[-1] < 1 / 6

    def test_errors(self, mm1_spec):
        with pytest.raises(UsageError):
            dependence_profile(mm1_spec, [])
        with pytest.raises(UsageError):
            dependence_profile(mm1_spec, [0.5, 0.1])


class TestModelSpec:
    def test_validation(self):
        with pytest.raises(ParameterDomainError):
            ModelSpec(1.2, Smith(1.0))
        with pytest.raises(ParameterDomainError):
            ModelSpec(0.5, Smith(1.0))
        with pytest.raises(ParameterDomainError):
            ModelSpec(0.5, None, Smith(1.0))
        assert ModelSpec(1.0, Smith(1.0)).has_y is False

    def test_disk_overlap(self):
        assert disk_overlap(0.0, 0.3) == pytest.approx(1.0)
        assert disk_overlap(0.6, 0.3) == 0.0
        h = np.linspace(0, 0.6, 100)
        assert np.all(np.diff(disk_overlap(h, 0.3)) <= 0)
        assert float(disk_overlap(0.2, 0.25)) == pytest.approx(float(oracles.teg_alpha(0.2, 0.25)))

    def test_linear_teg_alpha_variant(self):
        t = TEG(0.2, 0.25, alpha_kind="linear")
        assert t.alpha(0.25) == pytest.approx(0.5)
        assert t.alpha(0.6) == 0.0
