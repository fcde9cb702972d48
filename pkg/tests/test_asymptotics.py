import math

import numpy as np
import pytest
from scipy.special import zeta
from hypothesis import given, settings
from hypothesis import strategies as st

from mixedfbm import asymptotics as asy
from mixedfbm.errors import ParameterError, RegimeError
from mixedfbm.estimators import tilde_H, tilde_H2
from mixedfbm.experiments import linearized_variance
from mixedfbm.fgn import ModelParams, fgn_autocovariance, sample_mixed_path
from mixedfbm.variation import power_variation_ladder
from mixedfbm.wick import form_cov, form_mean, increment_cov

from oracles import eta_double_prime, eta_prime, mc_form_cov

LN2 = math.log(2)


def rho_sum_direct(H, q, M=100_000):
    """``sum_{m in Z} rho(m)^q``: direct head plus a Hurwitz-zeta tail.

    The tail uses ``rho(m) = K m^{2H-2} (1 + e m^{-2} + O(m^{-4}))``.
    """
    m = np.arange(1, M + 1, dtype=float)
    head = float(np.sum(fgn_autocovariance(H, m) ** q))
    K = H * (2 * H - 1)
    e = (2 * H - 2) * (2 * H - 3) / 12
    x = q * (2 - 2 * H)
    tail = K**q * (zeta(x, M + 1) + q * e * zeta(x + 2, M + 1))
    return 1.0 + 2 * (head + tail)


class TestMoments:
    @pytest.mark.parametrize("m,v", [(0, 1), (3, 0), (4, 3)])
    def test_examples(self, m, v):
        assert asy.hermite_moment(m) == v

    def test_identity(self):
        for m in range(9):
            assert asy.hermite_moment(2 * m) == math.factorial(2 * m) / (2**m * math.factorial(m))

    @pytest.mark.parametrize("p,r,v", [(1, 1, 1), (0, 2, 0), (2, 2, 6)])
    def test_sigma2_pr(self, p, r, v):
        assert asy.sigma2_pr(p, r) == v

    def test_hermite_coefficients_reconstruct_powers(self):
        # x^r = sum_q c_q He_q(x)
        x = np.linspace(-2, 2, 7)
        for r in range(7):
            total = sum(asy.hermite_coefficient(r, q) * np.polynomial.hermite_e.hermeval(x, [0] * q + [1])
                        for q in range(r + 1))
            np.testing.assert_allclose(total, x**r, atol=1e-10)


class TestSigma2Hr:
    @pytest.mark.parametrize("H", [0.1, 0.3, 0.45])
    def test_r1_zero_below_half(self, H):
        assert asy.sigma2_Hr(H, 1).value == 0

    def test_half_r2_is_iid_variance(self):
        # i.i.d. N(0,1): Var(zeta^2) = 2
        assert asy.sigma2_Hr(0.5, 2).value == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("H", [0.1, 0.3, 0.6, 0.7])
    def test_r2_against_wick_sum(self, H):
        # Cov(z0^2, zm^2) = 2 rho^2
        assert asy.sigma2_Hr(H, 2).value == pytest.approx(2 * rho_sum_direct(H, 2), rel=1e-8)

    @pytest.mark.parametrize("H", [0.2, 0.4, 0.6])
    def test_r4_against_isserlis(self, H):
        # E[X^4 Y^4] - 9 = 72 rho^2 + 24 rho^4
        direct = 72 * rho_sum_direct(H, 2) + 24 * rho_sum_direct(H, 4)
        assert asy.sigma2_Hr(H, 4).value == pytest.approx(direct, rel=1e-8)

    def test_r4_iid(self):
        assert asy.sigma2_Hr(0.5, 4).value == pytest.approx(96.0, rel=1e-12)

    @pytest.mark.parametrize("H", [0.2, 0.4])
    def test_r3_against_isserlis(self, H):
        # E[X^3 Y^3] = 9 rho + 6 rho^3; the rho-sum over Z vanishes below 1/2
        assert asy.sigma2_Hr(H, 3).value == pytest.approx(6 * rho_sum_direct(H, 3), rel=1e-8)

    def test_r3_iid(self):
        assert asy.sigma2_Hr(0.5, 3).value == pytest.approx(15.0 - 0.0, rel=1e-12)

    def test_tail_certified(self):
        ev = asy.sigma2_Hr(0.6, 2, tol=1e-9)
        assert ev.tail_bound <= 1e-9 and ev.truncation_lag > 0

    def test_regime_errors(self):
        with pytest.raises(RegimeError):
            asy.sigma2_Hr(0.75, 2)
        with pytest.raises(RegimeError):
            asy.sigma2_Hr(0.6, 3)

    @pytest.mark.parametrize("H", [0.05, 0.25, 0.5, 0.65])
    @pytest.mark.parametrize("r", [2, 4])
    def test_continuity(self, H, r):
        lo, hi = (asy.sigma2_Hr(H + d, r, tol=1e-11).value for d in (-1e-6, 1e-6))
        assert abs(hi - lo) < 1e-3 * max(1.0, abs(hi))

    def test_finite_n_converges(self):
        for H in (0.3, 0.6):
            lim = asy.sigma2_Hr(H, 2).value
            assert asy.finite_n_variance_fbm_power(H, 2, 2**16) / 2**16 == pytest.approx(lim, rel=0.02)


class TestThreeQuarters:
    @pytest.mark.parametrize("r,v", [(2, 1.5), (4, 9), (0, 0)])
    def test_printed_constant(self, r, v):
        assert asy.sigma_34_r(r) == v

    def test_odd_r_rejected(self):
        with pytest.raises(ParameterError):
            asy.sigma_34_r(3)

    def test_limit_variance(self):
        assert asy.sigma2_34_limit(2) == 0.5625
        # second Hermite coefficient of x^4 is 6
        assert asy.sigma2_34_limit(4) == pytest.approx(9 / 16 * 36)

    def test_exact_variance_growth(self):
        """Var_n / n grows like sigma^2 ln n: successive differences per ln 2 approach 9/16."""
        v = [asy.finite_n_variance_fbm_power(0.75, 2, 2**j) / 2**j for j in (16, 18)]
        assert (v[1] - v[0]) / (2 * LN2) == pytest.approx(0.5625, rel=0.01)


class TestWick:
    def test_wiener_increment_cov_is_overlap(self):
        assert increment_cov(0.5, 0.0, 1.0, 0.5, 2.0) == pytest.approx(0.5)
        assert increment_cov(0.5, 0.0, 1.0, 2.0, 3.0) == pytest.approx(0.0)

    def test_far_field_continuity(self):
        f = eta_double_prime(0.3)
        span = 1.0
        near = form_cov(0.3, f, f, 16.0 * span - 1e-9)
        far = form_cov(0.3, f, f, 16.0 * span)
        assert far == pytest.approx(near, rel=1e-6)

    def test_far_field_matches_extended_precision(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        H, m = 0.3, 400.0
        f = eta_prime(H)

        def cov(s, t, u, v):
            g = lambda x: abs(mpmath.mpf(x)) ** (2 * mpmath.mpf(H))
            return (g(t - u) + g(s - v) - g(t - v) - g(s - u)) / 2

        exact = 2 * sum(c1 * c2 * cov(s, t, u + m, v + m) ** 2 for c1, s, t in f for c2, u, v in f)
        assert form_cov(H, f, f, m) == pytest.approx(float(exact), rel=1e-8)

    def test_centering(self):
        for H in (0.1, 0.37, 0.5, 0.8):
            m1, m2 = asy.form_means(H)
            assert abs(m1) < 1e-14 and abs(m2) < 1e-14
            c = 2 ** (2 * H - 1)
            assert 1 - (c + 1) * 2 * 2 ** (-2 * H) + c * 4 * 4 ** (-2 * H) == pytest.approx(0, abs=1e-14)

    def test_half_values(self):
        assert asy.rho_prime(0.5, 0) == pytest.approx(1.0)
        for m in (1, 2, 7):
            assert asy.rho_prime(0.5, m) == pytest.approx(0.0, abs=1e-14)
            assert asy.rho_double_prime(0.5, m) == pytest.approx(0.0, abs=1e-14)

    def test_form_mean_linear(self):
        assert form_mean(0.5, [(2.0, 0.0, 1.0), (1.0, 0.0, 0.5)]) == pytest.approx(2.5)

    @pytest.mark.parametrize("H,m,fn,form", [
        (0.2, 3, asy.rho_prime, eta_prime),
        (0.3, 2, asy.rho_double_prime, eta_double_prime),
    ])
    def test_monte_carlo(self, H, m, fn, form):
        est, se = mc_form_cov(H, form(H), m, 400_000, seed=17)
        assert abs(est - fn(H, m)) < 3 * se

    @pytest.mark.parametrize("H", [0.1, 0.3, 0.45])
    def test_tail_asymptotics(self, H):
        """Far lags decay like ``2 K^2 S^2 m^{4H-4}`` with ``S`` the length-squared weight of the form."""
        ms = np.array([50.0, 500.0, 5000.0])
        for fn, form in ((asy.rho_prime, eta_prime), (asy.rho_double_prime, eta_double_prime)):
            S = sum(c * (t - s) ** 2 for c, s, t in form(H))
            lead = 2 * (H * (2 * H - 1)) ** 2 * S**2 * ms ** (4 * H - 4)
            gap = np.abs(fn(H, ms) / lead - 1)
            assert gap[-1] < 1e-6 and np.all(np.diff(gap) < 0)


class TestSigmaPrime:
    def test_half(self):
        assert asy.sigma_prime_H(0.5).value == pytest.approx(1 / (2 * LN2), rel=1e-12)

    def test_tolerance_monotone(self):
        assert asy.sigma_prime_H(0.2, 1e-10).value == pytest.approx(asy.sigma_prime_H(0.2, 1e-6).value, abs=1e-6)

    def test_extrapolation_flag(self):
        assert not asy.sigma_prime_H(0.1).extrapolated
        assert asy.sigma_prime_H(0.25).extrapolated
        assert asy.sigma_prime_H(0.4).extrapolated

    def test_regime(self):
        with pytest.raises(RegimeError):
            asy.sigma_prime_H(0.6)

    @pytest.mark.slow
    def test_monte_carlo(self):
        H, k, reps = 0.1, 14, 2000
        p = ModelParams(H, 1.0, 1.0, 3.0)
        vals = np.array([tilde_H(power_variation_ladder(sample_mixed_path(p, 2**15, 99, r)[0]), k).estimate
                         for r in range(reps)])
        sd = np.std(2 ** (k / 2) * (vals - H), ddof=1)
        assert sd == pytest.approx(asy.sigma_prime_H(H).value, rel=0.15)


class TestSigmaDoublePrime:
    def test_pole(self):
        with pytest.raises(ParameterError):
            asy.sigma_double_prime_H(0.5)

    def test_diverges_near_half(self):
        assert asy.sigma_double_prime_H(0.499).value > 10 * asy.sigma_double_prime_H(0.3).value
        assert asy.sigma_double_prime_H(0.501, 3.0).value > 10 * asy.sigma_double_prime_H(0.6, 3.0).value

    def test_printed_closed_form(self):
        v = (2**1.4 + 1) * 3**-0.2 / ((2 - 2**0.8) * LN2)
        assert v == pytest.approx(16.278, abs=1e-3)
        assert asy.sigma2_double_prime_high_printed(0.6, 3.0) == pytest.approx(v, rel=1e-14)
        assert asy.sigma_double_prime_H(0.6, 3.0, printed=True).value ** 2 == pytest.approx(v, rel=1e-14)

    def test_derived_closed_form(self):
        H, T, a, b = 0.6, 3.0, 1.3, 0.8
        v = b**4 * T ** (2 - 4 * H) * (2 ** (4 * H - 3) + 1) / (a**4 * (2 - 2 ** (2 - 2 * H)) ** 2 * LN2**2)
        assert asy.sigma_double_prime_H(H, T, a=a, b=b).value ** 2 == pytest.approx(v, rel=1e-14)

    def test_linearized_converges_to_derived(self):
        # the finite-k delta-method variance approaches the derived constant
        H, T = 0.65, 3.0
        lim = asy.sigma2_double_prime_high(H, T)
        gaps = [abs(linearized_variance(H, T, 1.0, 1.0, k) / lim - 1) for k in (10, 14, 18)]
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.05

    def test_wiener_block_variance(self):
        rng = np.random.default_rng(4)
        H, T, k = 0.6, 3.0, 6
        c = 2 ** (2 * H - 1)
        x = rng.standard_normal((20_000, 2**k, 4)) * math.sqrt(T / 2 ** (k + 2))
        p = 2 * (x[..., 0] + x[..., 1]) * (x[..., 2] + x[..., 3]) - 2 * c * (x[..., 0] * x[..., 1] + x[..., 2] * x[..., 3])
        v = p.sum(axis=1).var(ddof=1)
        assert v == pytest.approx(asy.wiener_block_variance(H, T, k), rel=0.05)
        assert abs(v / asy.wiener_block_variance_printed(H, T, k) - 1) > 0.2

    def test_high_regime_bounds(self):
        with pytest.raises(RegimeError):
            asy.sigma_double_prime_H(0.8, 3.0)

    def test_low_regime_positive(self):
        ev = asy.sigma_double_prime_H(0.3)
        assert ev.value > 0 and ev.tail_bound <= 1e-9

    @pytest.mark.slow
    def test_mid_regime_monte_carlo_k14(self):
        """At H=0.55, k=14 the spread matches the finite-k variance, not yet the limit."""
        H, T, k, reps = 0.55, 3.0, 14, 600
        p = ModelParams(H, 1.0, 1.0, T)
        vals = np.array([tilde_H2(power_variation_ladder(sample_mixed_path(p, 2 ** (k + 2), 7, r)[0]), k).estimate
                         for r in range(reps)])
        z = 2 ** (k * (1.5 - 2 * H)) * (vals - H)
        robust_sd = 1.4826 * np.median(np.abs(z - np.median(z)))
        assert robust_sd == pytest.approx(math.sqrt(linearized_variance(H, T, 1.0, 1.0, k)), rel=0.25)


class TestBias:
    def test_vanishes_at_half(self):
        assert asy.tilde_H_bias(0.4999999, 1, 1, 3, 19) == pytest.approx(0, abs=1e-6)

    def test_table_one_magnitude(self):
        b = asy.tilde_H_bias(0.4, 1, 1, 3, 19)
        assert b > 0
        assert 0.5 < b / (0.4082 - 0.4) < 2

    @settings(max_examples=30)
    @given(st.floats(0.26, 0.49), st.floats(0.2, 4), st.floats(0.2, 4), st.integers(5, 25))
    def test_a_scaling(self, H, a, b, k):
        assert asy.tilde_H_bias(H, 2 * a, b, 3.0, k) == pytest.approx(asy.tilde_H_bias(H, a, b, 3.0, k) / 4)

    def test_hat_H_bias(self):
        assert asy.hat_H_bias(0.25, 1.0, 3.0, 20) == pytest.approx(-0.25 * math.log2(3) / 20)


class TestCltVariance:
    def test_regimes(self):
        assert asy.clt_variance(0.6, 1, 1) == (1.0, "sqrt_n")
        assert asy.clt_variance(0.6, 0, 3) == (9.0, "n_H")
        v, norm = asy.clt_variance(0.3, 2, 2)
        assert norm == "sqrt_n" and v == pytest.approx(asy.sigma2_Hr(0.3, 2).value + 6)
        assert asy.clt_variance(0.75, 0, 2) == (0.5625, "sqrt_n_log_n")
        assert asy.clt_variance(0.5, 0, 2)[0] == pytest.approx(asy.sigma2_Hr(0.5, 2).value)

    def test_rosenblatt(self):
        with pytest.raises(RegimeError):
            asy.clt_variance(0.85, 0, 2)
