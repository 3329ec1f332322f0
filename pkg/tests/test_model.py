import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from degenkernel.model import (ModelParams, ParameterError, ThetaWeight, WeightedMeasure,
                               b_exponent, groundstate_asymptotic, groundstate_exponent_integral,
                               kernel_prefactor, lyapunov_drift, lyapunov_drift_derivative,
                               nash_U, nash_U_inverse, phi_theta, rate_psi, sphere_area,
                               suggest_r_max, ultracontractivity_K)

valid_params = st.builds(
    lambda N, a, db: ModelParams(N, a, a - 2 + db),
    st.integers(3, 8), st.floats(2.05, 8.0), st.floats(0.05, 6.0))


class TestModelParams:
    def test_accepts_defaults(self):
        p = ModelParams(3, 3.0, 4.0)
        assert p.as_dict() == {"N": 3, "alpha": 3.0, "beta": 4.0}

    @pytest.mark.parametrize("N, alpha, beta, needle", [
        (2, 3.0, 4.0, "N must be"),
        (3.5, 3.0, 4.0, "N must be"),
        (3, 2.0, 4.0, "alpha"),
        (3, 3.0, 1.0, "β>α−2"),
        (3, 3.0, 0.5, "β>α−2"),
    ])
    def test_rejects(self, N, alpha, beta, needle):
        with pytest.raises(ParameterError, match=needle):
            ModelParams(N, alpha, beta)

    def test_coefficients(self):
        p = ModelParams(3, 3.0, 4.0)
        assert p.diffusion(2.0) == 9.0
        assert p.potential(2.0) == 16.0


class TestMeasure:
    def test_density_at_origin(self, params):
        assert WeightedMeasure(params).density(0.0) == 1.0

    @given(valid_params, st.floats(0.0, 50.0), st.floats(1e-3, 50.0))
    def test_density_decreasing_in_unit_interval(self, p, r, dr):
        m = WeightedMeasure(p)
        d1, d2 = m.density(r), m.density(r + dr)
        assert 0 < d2 <= d1 <= 1

    def test_sphere_area(self):
        assert sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-15)
        assert sphere_area(4) == pytest.approx(2 * math.pi ** 2, rel=1e-15)


class TestThetaWeight:
    @pytest.mark.parametrize("theta, e, gamma", [
        (3, -0.25, -0.75), (4, -1.0 / 3.0, -1.0), (5, -5.0 / 12.0, -1.25)])
    def test_exponents(self, params, theta, e, gamma):
        tw = ThetaWeight(theta, params)
        assert tw.exponent == pytest.approx(e, abs=1e-15)
        assert tw.gamma == pytest.approx(gamma, abs=1e-14)

    def test_theta_below_n(self, params):
        with pytest.raises(ParameterError, match="theta below N"):
            ThetaWeight(2.5, params)

    @given(valid_params, st.floats(0.0, 10.0))
    def test_exponent_negative(self, p, dtheta):
        # e < 0 for all theta >= N >= 3, alpha > 2
        tw = ThetaWeight(p.N + dtheta, p)
        assert tw.exponent < 0
        assert tw.gamma < (p.alpha - p.N) / 2
        assert 2 * tw.gamma - p.alpha < -p.N

    @given(valid_params)
    def test_theta_equal_n_matches_small_time_exponent(self, p):
        assert ThetaWeight(p.N, p).exponent == pytest.approx((2 - p.N) / 4, abs=1e-15)


class TestPhi:
    def test_origin(self, params):
        assert phi_theta(ThetaWeight(3, params), 0.0) == 1.0

    def test_theta3_r1(self, params):
        assert phi_theta(ThetaWeight(3, params), 1.0) == pytest.approx(2 ** -0.25, rel=1e-15)

    def test_theta5_r2(self, params):
        # frozen high-precision value of 9^(-5/12)
        assert phi_theta(ThetaWeight(5, params), 2.0) == pytest.approx(0.4003123183920009, rel=1e-14)

    @given(valid_params, st.floats(0.1, 40), st.floats(1e-3, 40))
    def test_decreasing(self, p, r, dr):
        tw = ThetaWeight(p.N, p)
        assert phi_theta(tw, r + dr) < phi_theta(tw, r)
        assert phi_theta(tw, dr) <= phi_theta(tw, 0.0)


class TestRateAndProfile:
    @pytest.mark.parametrize("theta, t, want", [(4, 1.0, 1.0), (4, 4.0, 8.0), (3, 8.0, 32.0)])
    def test_rate_psi(self, theta, t, want):
        assert rate_psi(theta, t) == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("fn", [rate_psi, nash_U, ultracontractivity_K, kernel_prefactor])
    def test_rejects_nonpositive_time(self, fn):
        with pytest.raises(ValueError):
            fn(4.0, 0.0)
        with pytest.raises(ValueError):
            fn(4.0, -1.0)

    @given(st.floats(3, 12), st.floats(1e-4, 1e3), st.floats(1e-4, 1e3))
    def test_psi_over_t_nondecreasing(self, theta, t1, t2):
        lo, hi = sorted((t1, t2))
        assert rate_psi(theta, lo) / lo <= rate_psi(theta, hi) / hi * (1 + 1e-14)

    @pytest.mark.parametrize("theta", [3.0, 4.0, 5.0, 7.5])
    def test_U_matches_quadrature(self, theta):
        # independent check of U(t) = int_t^inf du / psi(u)
        for t in (0.1, 1.0, 3.0):
            q, _ = integrate.quad(lambda u: 1.0 / rate_psi(theta, u), t, np.inf)
            assert nash_U(theta, t) == pytest.approx(q, rel=1e-8)

    @given(st.floats(3, 12), st.floats(1e-3, 1e3))
    def test_U_inverse_roundtrip(self, theta, t):
        assert nash_U_inverse(theta, nash_U(theta, t)) == pytest.approx(t, rel=1e-10)

    def test_K_values(self):
        assert ultracontractivity_K(4, 2.0) == pytest.approx(1.0, rel=1e-15)
        # (theta/(2t))^{theta/4} = 2 at theta = 4, t = 1
        assert ultracontractivity_K(4, 1.0) == pytest.approx(2.0, rel=1e-15)
        assert ultracontractivity_K(4, 4.0) == pytest.approx(0.5, rel=1e-15)

    @given(st.floats(3, 12), st.floats(1e-4, 1e3))
    def test_prefactor_identity(self, theta, t):
        # K(2t)^2 t^{theta/2} = (theta/4)^{theta/2}
        k2 = ultracontractivity_K(theta, 2 * t) ** 2
        assert k2 == pytest.approx(kernel_prefactor(theta, t), rel=1e-12)
        assert k2 * t ** (theta / 2) == pytest.approx((theta / 4) ** (theta / 2), rel=1e-12)


class TestDrift:
    def test_origin(self, params):
        assert lyapunov_drift(params, -1.0, 0.0) == 0.0

    def test_value_r1(self, params):
        assert lyapunov_drift(params, -1.0, 1.0) == pytest.approx(-3.0, abs=1e-14)

    def test_matches_generator_on_phi(self, params):
        # A phi / phi from the radial Laplacian computed by finite differences
        tw = ThetaWeight(4, params)
        r = np.linspace(0.5, 5.0, 10)
        h = 1e-4
        f = lambda s: phi_theta(tw, s)
        lap = (f(r + h) - 2 * f(r) + f(r - h)) / h ** 2 + (params.N - 1) / r * (f(r + h) - f(r - h)) / (2 * h)
        want = (params.diffusion(r) * lap - params.potential(r) * f(r)) / f(r)
        assert np.allclose(lyapunov_drift(params, tw.gamma, r), want, rtol=1e-5, atol=1e-6)

    @settings(max_examples=50)
    @given(valid_params, st.floats(-3.0, -0.1), st.floats(0.2, 20.0))
    def test_derivative_matches_difference(self, p, gamma, r):
        h = 1e-6 * r
        fd = (lyapunov_drift(p, gamma, r + h) - lyapunov_drift(p, gamma, r - h)) / (2 * h)
        d = lyapunov_drift_derivative(p, gamma, r)
        assert d == pytest.approx(fd, rel=1e-5, abs=1e-6 * (1 + abs(lyapunov_drift(p, gamma, r)) / r))

    @given(st.integers(3, 8), st.floats(2.05, 8.0), st.floats(0.5, 6.0), st.floats(-3.0, -0.1))
    def test_eventually_decreasing_to_minus_infinity(self, N, alpha, db, gamma):
        p = ModelParams(N, alpha, alpha - 2 + db)
        # drift <= r^{alpha-2} (C - r^{beta-alpha+2}); the derivative has a similar bound
        C = abs(gamma * (gamma - alpha)) + abs(gamma * (alpha - 2 + N))
        K = max(1.0, C, (2 * alpha - 2) * C / p.beta)
        r_c = K ** (1.0 / db)
        r = np.geomspace(2 * r_c, 2e3 * r_c, 50)
        d = lyapunov_drift(p, gamma, r)
        assert np.all(d < 0)
        assert np.all(np.diff(d) < 0)

    def test_monotone_in_beta_beyond_one(self):
        r = np.linspace(1.0, 10.0, 1000)
        lo = lyapunov_drift(ModelParams(3, 3.0, 4.0), -1.0, r)
        hi = lyapunov_drift(ModelParams(3, 3.0, 5.0), -1.0, r)
        assert np.all(hi <= lo)


class TestExponentB:
    def test_values(self):
        assert b_exponent(ModelParams(3, 3.0, 4.0)) == pytest.approx(0.6)
        assert b_exponent(ModelParams(3, 3.0, 3.0)) == pytest.approx(0.5)

    def test_limit(self):
        bs = [b_exponent(ModelParams(3, 3.0, b)) for b in (4.0, 10.0, 100.0, 1e6)]
        assert np.all(np.diff(bs) > 0)
        assert bs[-1] == pytest.approx(1.0, abs=1e-5)

    @given(valid_params)
    def test_in_unit_interval(self, p):
        assert 0 < b_exponent(p) < 1


class TestGroundStateProfile:
    def test_r1(self, params):
        assert groundstate_asymptotic(params, 1.0) == 1.0

    def test_inner_integral_closed_form(self, params):
        # (2/3)(sqrt(1 + r^3) - sqrt(2)) for alpha = 3, beta = 4
        for r in (1.5, 2.0, 5.0, 12.0):
            closed = (2.0 / 3.0) * (math.sqrt(1 + r ** 3) - math.sqrt(2))
            assert groundstate_exponent_integral(params, r) == pytest.approx(closed, rel=1e-8)
        assert groundstate_exponent_integral(params, 2.0) == pytest.approx(
            2 - (2 / 3) * math.sqrt(2), rel=1e-12)

    def test_r2_value(self, params):
        # frozen: 2^{-5/4} exp(-(2 - (2/3) sqrt 2))
        assert groundstate_asymptotic(params, 2.0) == pytest.approx(0.14607648360713596, rel=1e-10)

    def test_vectorized_matches_scalar(self, params):
        r = np.array([5.0, 1.0, 3.0, 2.0, 7.5])
        vec = groundstate_asymptotic(params, r)
        assert np.allclose(vec, [groundstate_asymptotic(params, x) for x in r], rtol=1e-9)

    def test_rejects_below_one(self, params):
        with pytest.raises(ValueError):
            groundstate_asymptotic(params, 0.5)

    def test_decreasing(self, params):
        r = np.linspace(1.0, 20.0, 200)
        assert np.all(np.diff(groundstate_asymptotic(params, r)) < 0)

    def test_suggest_r_max(self, params):
        r = suggest_r_max(params)
        assert groundstate_asymptotic(params, r) < 1e-10
        assert groundstate_asymptotic(params, r - 0.5) >= 1e-10
        assert r <= 20.0
