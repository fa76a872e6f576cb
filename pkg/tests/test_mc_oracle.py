import math

import numpy as np
import pytest

from gmv_alloc.errors import DomainError, QuadratureError
from gmv_alloc.gmv_objectives import UtilitySpec
from gmv_alloc.kelly import BayesBinaryBet, BinaryBet, uncertain_variance_log_moments, LeverageInputs
from gmv_alloc.market_model import HorizonSpec, PosteriorBelief, discrete_horizon_variance
from gmv_alloc.mc_oracle import (
    BLOCK_SIZE,
    Affine,
    ALDDensity,
    GammaVarianceDensity,
    GaussianDensity,
    PathStats,
    SimConfig,
    StudentTDensity,
    cara_closed_via_mgf,
    expected_utility_quadrature,
    gamma_mixed_lognormal_pdf,
    kde_mode,
    log_wealth_moments_from_density,
    log_wealth_moments_mixture,
    simulate_abm,
    simulate_binary,
    simulate_gbm,
)
from scipy import integrate

from oracles import binomial_log_wealth, enumerate_bayes_log_wealth, gaussian_expectation

FULL = PosteriorBelief(mu_pd=0.05, sigma_pd2=0.0025, sigma_mu2=0.01)
PLAIN = PosteriorBelief(mu_pd=0.05, sigma_pd2=0.0)


def within(stat, target, se, k=3.0):
    return abs(stat - target) <= k * se


class TestConfig:
    @pytest.mark.parametrize("kw", [{"n_paths": 0}, {"n_paths": 1.5}, {"dt": 0}, {"seed": -1}, {"seed": 2**64}])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            SimConfig(**{"n_paths": 10, "dt": 0.1, **kw})

    def test_horizon_multiple_of_dt(self):
        with pytest.raises(DomainError):
            simulate_abm(0.0, PLAIN, 0.04, HorizonSpec(1.0), SimConfig(10, 0.3))

    def test_stats_dict_excludes_values(self):
        s = simulate_abm(0.0, PLAIN, 0.04, HorizonSpec(1.0), SimConfig(100, 0.5))
        assert "values" not in s.to_dict() and s.values.size == 100

    def test_negative_variance_rejected(self):
        with pytest.raises(DomainError):
            PathStats(1, 0.0, -1.0, 0.0, 0.0, 0.0)


class TestDeterminism:
    def test_same_seed_bitwise(self):
        cfg = SimConfig(5000, 0.25, seed=42)
        a = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), cfg)
        b = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), cfg)
        assert a.to_dict() == b.to_dict() and np.array_equal(a.values, b.values)

    def test_seed_changes_sample(self):
        a = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), SimConfig(5000, 0.25, seed=1))
        b = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), SimConfig(5000, 0.25, seed=2))
        assert a.sample_mean != b.sample_mean

    @pytest.mark.parametrize("sim", ["abm", "gbm", "binary"])
    def test_thread_count_does_not_matter(self, sim, monkeypatch):
        cfg = SimConfig(3 * BLOCK_SIZE + 17, 0.5, seed=9)
        if sim == "abm":
            run = lambda: simulate_abm(0.0, FULL, 0.04, HorizonSpec(1.0), cfg)
        elif sim == "gbm":
            run = lambda: simulate_gbm(1.0, FULL, 0.04, HorizonSpec(1.0), cfg)
        else:
            run = lambda: simulate_binary(BayesBinaryBet(6, 10, 1, 1, 5, 1, 1), 0.2, cfg)
        monkeypatch.setenv("GMV_ALLOC_THREADS", "1")
        one = run()
        monkeypatch.setenv("GMV_ALLOC_THREADS", "4")
        many = run()
        assert np.array_equal(one.values, many.values) and one.to_dict() == many.to_dict()

    def test_bad_thread_setting(self, monkeypatch):
        monkeypatch.setenv("GMV_ALLOC_THREADS", "lots")
        with pytest.raises(DomainError):
            simulate_abm(0.0, PLAIN, 0.04, HorizonSpec(1.0), SimConfig(10, 1.0))


class TestAbm:
    def test_plain(self):
        s = simulate_abm(1.0, PLAIN, 0.04, HorizonSpec(2.0), SimConfig(200_000, 0.5, seed=3))
        assert within(s.sample_var, 0.08, s.var_se)
        assert within(s.sample_mean, 1.1, s.mean_se)

    def test_discrete_law_coarse_step(self):
        dt = 0.25
        s = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), SimConfig(400_000, dt, seed=4))
        assert within(s.sample_var, discrete_horizon_variance(FULL, 0.04, 2.0, dt), s.var_se)
        assert within(s.sample_mean, 0.1, s.mean_se)

    def test_elapsed_time_widens_initial_drift(self):
        dt = 0.5
        s = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0, t0=3.0), SimConfig(400_000, dt, seed=5))
        target = discrete_horizon_variance(FULL, 0.04, 2.0, dt) + FULL.sigma_mu2 * 3.0 * 4.0
        assert within(s.sample_var, target, s.var_se)

    def test_refinement_bias(self):
        law = FULL.sigma_mu2 * 8 / 3 + 0.08 + 0.01
        bias = [law - discrete_horizon_variance(FULL, 0.04, 2.0, dt) for dt in (0.25, 0.0625, 0.015625)]
        assert bias[0] / bias[1] >= 3 and bias[1] / bias[2] >= 3

    def test_matches_independent_euler(self):
        # moments of the package simulator agree with a plain loop-based Euler scheme
        from oracles import simulate_abm_increment

        ref = simulate_abm_increment(0.05, 0.0025, 0.01, 0.04, 0.0, 2.0, 0.25, 200_000, seed=11)
        s = simulate_abm(0.0, FULL, 0.04, HorizonSpec(2.0), SimConfig(200_000, 0.25, seed=12))
        se = math.hypot(s.var_se, np.std((ref - ref.mean()) ** 2) / math.sqrt(ref.size))
        assert within(s.sample_var, float(ref.var(ddof=1)), se)


class TestGbm:
    def test_plain_log_law(self):
        s = simulate_gbm(1.0, PLAIN, 0.09, HorizonSpec(2.0), SimConfig(200_000, 1.0, seed=6))
        assert within(s.sample_mean, (0.05 - 0.045) * 2, s.mean_se)
        assert within(s.sample_var, 0.18, s.var_se)

    def test_full_log_law(self):
        s = simulate_gbm(1.0, FULL, 0.04, HorizonSpec(2.0), SimConfig(400_000, 0.25, seed=7))
        assert within(s.sample_mean, (0.05 - 0.02) * 2, s.mean_se)
        assert within(s.sample_var, discrete_horizon_variance(FULL, 0.04, 2.0, 0.25), s.var_se)

    def test_mode_suppression(self):
        sigma2, T = 0.09, 5.0
        s = simulate_gbm(1.0, PosteriorBelief(0.07, 0.0), sigma2, HorizonSpec(T), SimConfig(400_000, T, seed=8))
        wealth_mean = float(np.exp(s.values).mean())
        ratio = s.sample_mode_kde / wealth_mean
        assert ratio == pytest.approx(math.exp(-1.5 * sigma2 * T), rel=0.05)

    def test_antithetic_halves_error(self):
        base = dict(x0=1.0, belief=PLAIN, sigma2=0.04, horizon=HorizonSpec(1.0))
        plain = simulate_gbm(**base, cfg=SimConfig(100_000, 0.25, seed=1))
        anti = simulate_gbm(**base, cfg=SimConfig(100_000, 0.25, seed=1, antithetic=True))
        assert anti.mean_se / plain.mean_se <= 0.75
        assert within(anti.sample_var, 0.04, anti.var_se)

    def test_needs_positive_start(self):
        with pytest.raises(DomainError):
            simulate_gbm(0.0, PLAIN, 0.04, HorizonSpec(1.0), SimConfig(10, 1.0))


class TestBinary:
    def test_zero_bet(self):
        s = simulate_binary(BinaryBet(0.6, 1, 1), 0.0, SimConfig(1000, 1.0), n_trials=10)
        assert np.all(s.values == 0)

    def test_deterministic_probability(self):
        s = simulate_binary(BinaryBet(0.6, 1, 1), 0.2, SimConfig(200_000, 1.0, seed=2), n_trials=100)
        var = 0.24 * math.log(1.2 / 0.8) ** 2 * 100
        mean, var_enum = binomial_log_wealth(0.6, 100, 1, 1, 0.2)
        assert var_enum == pytest.approx(var, rel=1e-12)
        assert within(s.sample_var, var, s.var_se) and within(s.sample_mean, mean, s.mean_se)

    def test_bayes_against_enumeration(self):
        s = simulate_binary(BayesBinaryBet(6, 10, 1, 1, 5, 1, 1), 0.2, SimConfig(200_000, 1.0, seed=3))
        mean, var, _ = enumerate_bayes_log_wealth(6, 10, 1, 1, 5, 1, 1, 0.2)
        assert within(s.sample_mean, mean, s.mean_se) and within(s.sample_var, var, s.var_se)

    def test_arguments(self):
        with pytest.raises(DomainError):
            simulate_binary(BinaryBet(0.6, 1, 1), 0.2, SimConfig(10, 1.0))
        with pytest.raises(DomainError):
            simulate_binary(BinaryBet(0.6, 1, 1), 1.0, SimConfig(10, 1.0), n_trials=3)
        with pytest.raises(DomainError):
            simulate_binary("coin", 0.1, SimConfig(10, 1.0), n_trials=3)


class TestKde:
    def test_normal_mode(self, rng):
        # Silverman bandwidth leaves the argmax with a sampling sd near 0.03 here; 5% is the design target
        assert kde_mode(rng.normal(2.0, 0.5, 200_000)) == pytest.approx(2.0, rel=0.05)

    def test_degenerate(self):
        assert kde_mode(np.full(10, 3.0)) == 3.0
        assert kde_mode(np.array([1.5])) == 1.5


class TestQuadrature:
    def test_linear_gaussian(self):
        q = expected_utility_quadrature(GaussianDensity(0.07, 0.03), UtilitySpec.linear())
        assert abs(q.moments.mean - 0.07) <= 1e-12 and abs(q.moments.var - 0.03) <= 1e-12
        assert q.abs_error <= 1e-10

    def test_cara_mgf(self):
        for a in (0.5, 2.0, 5.0):
            q = expected_utility_quadrature(GaussianDensity(0.07, 0.03), UtilitySpec.cara(a))
            assert abs(q.moments.mean - cara_closed_via_mgf(0.07, 0.03, a)) <= 1e-10

    def test_affine_transform(self):
        q = expected_utility_quadrature(GaussianDensity(0.08, 0.0225), UtilitySpec.linear(), Affine(w=0.5, r0=0.02))
        assert q.moments.mean == pytest.approx(0.05, abs=1e-14) and q.moments.var == pytest.approx(0.0225 / 4, rel=1e-12)

    def test_mixture_linear_moments(self):
        g = expected_utility_quadrature(GammaVarianceDensity(0.05, 0.04, 3.0, 0.01), UtilitySpec.linear()).moments
        assert g.mean == pytest.approx(0.05, abs=1e-13) and g.var == pytest.approx(0.05, rel=1e-12)
        a = expected_utility_quadrature(ALDDensity(0.05, 0.04, -0.02, 0.01), UtilitySpec.linear()).moments
        assert a.mean == pytest.approx(0.03, abs=1e-13) and a.var == pytest.approx(0.04 + 0.0004 + 0.01, rel=1e-12)

    def test_gamma_mixture_vs_scipy(self):
        # double integral over the variance and the conditional Gaussian
        a, alpha = 2.0, 5.0
        dens = GammaVarianceDensity(0.05, 0.04, alpha)
        q = expected_utility_quadrature(dens, UtilitySpec.cara(a)).moments
        from scipy import stats

        gam = stats.gamma(alpha / 2, scale=2 * 0.04 / alpha)
        # the Gamma mass beyond v = 2 is below 1e-40
        ref, _ = integrate.quad(lambda v: gam.pdf(v) * cara_closed_via_mgf(0.05, v, a), 0, 2.0, epsabs=1e-14, limit=200)
        assert q.mean == pytest.approx(ref, rel=1e-9)

    def test_divergent_mixture_reports(self):
        # CARA expectation under Gamma variance needs alpha > a^2 sigma2
        with pytest.raises(QuadratureError):
            expected_utility_quadrature(GammaVarianceDensity(0.05, 1.0, 0.5), UtilitySpec.cara(3.0))

    def test_student_t_linear(self):
        q = expected_utility_quadrature(StudentTDensity(0.05, 0.15, 6.0), UtilitySpec.linear())
        assert q.moments.mean == pytest.approx(0.05, abs=1e-10)
        assert q.moments.var == pytest.approx(0.0225 * 6 / 4, rel=1e-8)
        assert q.method == "quadpack_segments"

    def test_student_t_cara_small_a(self):
        q = expected_utility_quadrature(StudentTDensity(0.05, 0.15, 6.0), UtilitySpec.cara(0.01))
        # second-order expansion of (1 - E e^{-aY}) / a
        approx = 0.05 - 0.5 * 0.01 * (0.0225 * 1.5 + 0.0025)
        assert math.isfinite(q.moments.mean) and q.moments.mean == pytest.approx(approx, rel=1e-4)

    def test_student_t_cara_divergence_flagged(self):
        with pytest.raises(QuadratureError):
            expected_utility_quadrature(StudentTDensity(0.05, 0.15, 6.0), UtilitySpec.cara(2.0))

    def test_student_t_domain(self):
        with pytest.raises(DomainError):
            expected_utility_quadrature(StudentTDensity(0.0, -1.0, 6.0), UtilitySpec.linear())

    def test_unsupported_density(self):
        with pytest.raises(DomainError):
            expected_utility_quadrature(object(), UtilitySpec.linear())


class TestUncertainVarianceDensity:
    def test_normalized(self):
        mu, s2, alpha, T = 0.08, 0.0225, 4.0, 1.0
        f = lambda y: float(gamma_mixed_lognormal_pdf(math.exp(y), mu, s2, alpha, T)) * math.exp(y)
        c = mu * T
        total = integrate.quad(f, c - 5, c, limit=400)[0] + integrate.quad(f, c, c + 5, limit=400)[0]
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_concentrates_to_lognormal(self):
        mu, s2, T = 0.08, 0.0225, 1.0
        x = np.array([0.8, 1.0, 1.2])
        lognormal = np.exp(-((np.log(x) - (mu - s2 / 2) * T) ** 2) / (2 * s2 * T)) / (x * math.sqrt(2 * math.pi * s2 * T))
        assert np.allclose(gamma_mixed_lognormal_pdf(x, mu, s2, 1e6, T), lognormal, rtol=1e-4)

    @pytest.mark.parametrize("alpha", [0.7, 3.0, 8.0, 50.0, 2000.0])
    def test_pointwise_against_mixture_integral(self, alpha):
        from scipy import stats

        mu, s2, T = 0.08, 0.0225, 1.5
        gam = stats.gamma(alpha / 2, scale=2 * s2 / alpha)
        lo, hi = gam.ppf(1e-16), gam.ppf(1 - 1e-16)
        for x in (0.6, 0.95, 1.3, 2.0):
            def integrand(v):
                m, var = (mu - v / 2) * T, v * T
                return gam.pdf(v) * math.exp(-((math.log(x) - m) ** 2) / (2 * var)) / (x * math.sqrt(2 * math.pi * var))

            ref = integrate.quad(integrand, lo, hi, epsabs=0, epsrel=1e-12, limit=500, points=[s2])[0]
            assert float(gamma_mixed_lognormal_pdf(x, mu, s2, alpha, T)) == pytest.approx(ref, rel=1e-8)

    def test_cusp_is_finite_limit(self):
        mu, s2, T = 0.08, 0.0225, 1.0
        at = float(gamma_mixed_lognormal_pdf(math.exp(mu * T), mu, s2, 6.0, T))
        near = float(gamma_mixed_lognormal_pdf(math.exp(mu * T + 1e-9), mu, s2, 6.0, T))
        assert math.isfinite(at) and at == pytest.approx(near, rel=1e-6)

    def test_large_order_bessel(self):
        from scipy.special import logsumexp

        from gmv_alloc.mc_oracle import _log_kv

        def log_kv_integral(nu, z):
            # K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, trapezoid in log space
            peak = math.asinh(nu / z)
            t = np.linspace(0.0, peak + 60.0 / math.sqrt(z * math.cosh(peak)) + 1.0, 400_001)
            g = -z * np.cosh(t) + nu * t + np.log1p(np.exp(-2 * nu * t)) - math.log(2)
            w = np.full(t.size, t[1] - t[0])
            w[0] = w[-1] = 0.5 * w[0]
            return float(logsumexp(g, b=w))

        for nu in (500.0, 5000.0):
            z = np.array([0.5, 40.0, 900.0, 20000.0])
            ref = [log_kv_integral(nu, float(v)) for v in z]
            assert np.allclose(_log_kv(nu, z), ref, rtol=1e-11, atol=0)

    @pytest.mark.parametrize("alpha,T", [(8.0, 1.0), (3.0, 2.0), (20.0, 0.5)])
    def test_density_and_mixture_agree(self, alpha, T):
        d = log_wealth_moments_from_density(0.08, 0.0225, alpha, T)
        m = log_wealth_moments_mixture(0.08, 0.0225, alpha, T)
        assert d.mean == pytest.approx(m.mean, rel=1e-9) and d.var == pytest.approx(m.var, rel=1e-9)

    def test_matches_closed_moments(self):
        inp = LeverageInputs(0.08, 0.0225, 0.02, alpha=8.0, T=2.0)
        closed = uncertain_variance_log_moments(inp, 1.0)
        d = log_wealth_moments_from_density(0.08, 0.0225, 8.0, 2.0)
        assert d.mean == pytest.approx(closed.mean, rel=1e-6) and d.var == pytest.approx(closed.var, rel=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            gamma_mixed_lognormal_pdf(1.0, 0.08, 0.0225, 0.0, 1.0)


def test_gaussian_oracle_self_check():
    # the test-side Gaussian integrator agrees with the package quadrature on a smooth utility
    q = expected_utility_quadrature(GaussianDensity(0.1, 0.02), UtilitySpec.cara(1.5)).moments.mean
    assert gaussian_expectation(lambda x: (1 - math.exp(-1.5 * x)) / 1.5, 0.1, 0.02) == pytest.approx(q, rel=1e-12)
