import numpy as np
import pytest

from mcmc_bench.exceptions import ConfigurationError
from mcmc_bench.proposals import (AdaptState, DiscreteConditional, DiscreteIndependent, GaussianChainProposal,
                                  GaussianIndependent, GaussianRandomWalk, MALAProposal, SecondStageProposal,
                                  adapt_mean, as_conditional, finite_difference_grad, gaussian_independent,
                                  gaussian_random_walk, mala_proposal)
from mcmc_bench.targets import LogTarget, benchmark_mixture


def _quadratic_target():
    return LogTarget(1, log_pi=lambda x: -0.5 * (x ** 2).sum(axis=1), grad_log_pi=lambda x: -x)


class TestGaussianIndependent:
    def test_log_q_at_mean(self):
        assert gaussian_independent([0.3], 1.0).log_q(np.array([0.3])) == pytest.approx(-0.5 * np.log(2 * np.pi))

    def test_two_dimensional_value(self):
        q = gaussian_independent([1.0, -1.0], 2.0)
        assert q.log_q(np.array([3.0, -1.0])) == pytest.approx(-np.log(2 * np.pi * 4) - 0.5, abs=1e-14)

    def test_sample_mean(self):
        q = gaussian_independent([1.0, -2.0, 0.5], 1.0)
        x = q.sample(np.random.default_rng(0), size=10 ** 5)
        assert np.all(np.abs(x.mean(axis=0) - q.mu) < 0.02)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_bad_sigma(self, sigma):
        with pytest.raises(ConfigurationError):
            gaussian_independent([0.0], sigma)

    def test_integrates_to_one(self):
        q = gaussian_independent([0.7], 1.3)
        g = np.linspace(-12, 12, 20001)
        assert np.trapezoid(np.exp(q.log_q(g[:, None])), g) == pytest.approx(1.0, abs=1e-3)

    def test_deterministic_stream(self):
        q = gaussian_independent([0.0, 0.0], 1.0)
        a = q.sample(np.random.default_rng(4), size=5)
        b = q.sample(np.random.default_rng(4), size=5)
        assert np.array_equal(a, b)

    def test_with_mean(self):
        q = gaussian_independent([0.0], 2.0).with_mean([3.0])
        assert q.mu[0] == 3.0 and q.sigma == 2.0


class TestRandomWalk:
    def test_exact_symmetry(self):
        q = gaussian_random_walk(0.7)
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.normal(size=3), rng.normal(size=3)
            assert q.log_q(a, b) - q.log_q(b, a) == 0.0
        assert q.symmetric

    def test_at_origin_equals_independent(self):
        assert (gaussian_random_walk(1.5).log_q(np.zeros(2), np.zeros(2))
                == gaussian_independent(np.zeros(2), 1.5).log_q(np.zeros(2)))

    def test_increment_variance(self):
        q = gaussian_random_walk(0.8)
        prev = np.array([2.0])
        x = q.sample(prev, np.random.default_rng(2), size=10 ** 5)
        assert np.var(x - prev) == pytest.approx(0.64, rel=0.02)

    def test_bad_sigma(self):
        with pytest.raises(ConfigurationError):
            gaussian_random_walk(0.0)

    def test_integrates_to_one(self):
        q = gaussian_random_walk(0.4)
        g = np.linspace(-5, 7, 20001)
        vals = np.exp(q.log_q(g[:, None], np.array([1.0])))
        assert np.trapezoid(vals, g) == pytest.approx(1.0, abs=1e-3)


class TestMALA:
    def test_zero_gradient_reduces_to_random_walk(self):
        q = mala_proposal(_quadratic_target(), 0.9)
        rw = GaussianRandomWalk(0.9)
        x0 = np.zeros(1)
        assert np.array_equal(q.sample(x0, np.random.default_rng(3), size=4),
                              rw.sample(x0, np.random.default_rng(3), size=4))
        assert q.log_q(np.array([0.4]), x0) == rw.log_q(np.array([0.4]), x0)

    def test_drift_on_quadratic(self):
        q = MALAProposal(_quadratic_target(), 1.0, beta=0.5)
        assert q.drift_mean(np.array([2.0]))[0] == pytest.approx(1.0)

    def test_default_beta(self):
        assert MALAProposal(_quadratic_target(), 0.6).beta == pytest.approx(0.18)

    def test_finite_difference_fallback_matches_analytic(self):
        mix = benchmark_mixture(2)
        no_grad = LogTarget(2, log_pi=mix.log_pi)
        rng = np.random.default_rng(6)
        for x in rng.uniform(-5, 5, size=(100, 2)):
            assert np.allclose(MALAProposal(no_grad, 1.0).gradient(x), mix.grad_log_pi(x), atol=1e-5)
            assert np.allclose(finite_difference_grad(mix.log_pi, x), mix.grad_log_pi(x), atol=1e-5)

    def test_nonfinite_gradient_falls_back(self):
        t = LogTarget(1, log_pi=lambda x: -x[:, 0] ** 2, grad_log_pi=lambda x: np.array([np.nan]))
        q = MALAProposal(t, 1.0)
        assert q.drift_mean(np.array([3.0]))[0] == 3.0
        assert q.fallbacks == 1

    def test_batch_log_q(self):
        q = MALAProposal(benchmark_mixture(1), 0.7)
        prev = np.array([[0.5], [-1.0]])
        x = np.array([[0.1], [0.2]])
        assert np.allclose(q.log_q(x, prev), [q.log_q(x[i], prev[i]) for i in range(2)])


class TestFactorizedProposal:
    def test_joint_equals_product_of_steps(self):
        q = GaussianChainProposal(10, sigma_p=1.3)
        x = q.sample(np.random.default_rng(0), size=200)
        steps = q.log_q_step(0, x[:, 0], x[:, :0])
        for d in range(1, 10):
            steps = steps + q.log_q_step(d, x[:, d], x[:, :d])
        assert np.max(np.abs(q.log_q(x) - steps)) <= 1e-12

    def test_first_step_law(self):
        q = GaussianChainProposal(2)
        x = q.sample(np.random.default_rng(1), size=10 ** 5)
        assert x[:, 0].mean() == pytest.approx(-2.0, abs=0.03)
        assert x[:, 0].var() == pytest.approx(4.0, rel=0.02)
        assert np.var(x[:, 1] - x[:, 0]) == pytest.approx(1.0, rel=0.02)

    def test_single_draw_shape(self):
        assert GaussianChainProposal(4).sample(np.random.default_rng(0)).shape == (4,)


class TestDiscrete:
    def test_independent(self):
        q = DiscreteIndependent([0.2, 0.8])
        x = q.sample(np.random.default_rng(0), size=10 ** 5)
        assert np.mean(x[:, 0] == 1) == pytest.approx(0.8, abs=0.005)
        assert q.log_q(np.array([1.0])) == pytest.approx(np.log(0.8))

    def test_conditional(self):
        M = np.array([[0.5, 0.5], [0.1, 0.9]])
        q = DiscreteConditional(M)
        assert not q.symmetric
        assert q.log_q(np.array([0.0]), np.array([1.0])) == pytest.approx(np.log(0.1))
        with pytest.raises(ConfigurationError):
            DiscreteConditional([[0.5, 0.6], [0.5, 0.5]])


class TestAdaptation:
    def test_training_period_keeps_mu0(self):
        s = AdaptState(np.array([1.0, 1.0]), T=100)
        for t in range(1, 20):
            adapt_mean(s, np.array([5.0, 5.0]), t, 100)
            assert np.array_equal(s.mean(t), [1.0, 1.0])
        assert np.array_equal(s.mean(20), [5.0, 5.0])

    def test_constant_outputs(self):
        s = AdaptState(np.zeros(2), T=10, eta=0.0)
        for t in range(1, 11):
            adapt_mean(s, np.array([2.5, -1.0]), t, 10)
        assert np.array_equal(s.mean(10), [2.5, -1.0])

    def test_arithmetic_mean(self):
        s = AdaptState(np.zeros(1), T=3)
        for t, v in enumerate([1.0, 2.0, 3.0], start=1):
            adapt_mean(s, np.array([v]), t, 3)
        assert s.mean(3)[0] == 2.0

    def test_accepted_only_flag(self):
        s = AdaptState(np.zeros(1), T=3, eta=0.0, accepted_only=True)
        adapt_mean(s, np.array([1.0]), 1, 3, accepted=True)
        adapt_mean(s, np.array([9.0]), 2, 3, accepted=False)
        assert s.mean(3)[0] == 1.0

    def test_rejects_bad_t(self):
        with pytest.raises(ConfigurationError):
            adapt_mean(AdaptState(np.zeros(1), T=3), np.zeros(1), 4, 3)


class TestSecondStage:
    def test_shrink_centres_at_current(self):
        q2 = SecondStageProposal(GaussianRandomWalk(2.0), "shrink", 0.5)
        ref = GaussianRandomWalk(1.0)
        a, cur, th1 = np.array([0.3]), np.array([1.0]), np.array([5.0])
        assert q2.log_q(a, th1, cur) == ref.log_q(a, cur)

    def test_modes(self):
        with pytest.raises(ConfigurationError):
            SecondStageProposal(GaussianRandomWalk(1.0), "other")
        q2 = SecondStageProposal(GaussianRandomWalk(1.0), "independent")
        assert q2.inner.sigma == 1.0


def test_as_conditional_wraps_independent():
    q = GaussianIndependent([0.0], 1.0)
    c = as_conditional(q)
    assert c.log_q(np.array([0.5]), np.array([9.0])) == q.log_q(np.array([0.5]))
    rw = GaussianRandomWalk(1.0)
    assert as_conditional(rw) is rw
