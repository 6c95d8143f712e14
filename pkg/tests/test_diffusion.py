import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncsr.diffusion import (estimate_x0, posterior_coefficients, posterior_step, q_sample,
                               sample_truncated)
from truncsr.errors import NonFiniteError, ShapeMismatchError, TimestepRangeError
from truncsr.oracle import GaussianPrior, OracleDenoiser, posterior_mean
from truncsr.schedule import TimestepPlan, build_linear_schedule, build_uniform_plan

TWO = build_linear_schedule(2, 0.1, 0.2)


def textbook_posterior(schedule, t):
    # direct transcription of the single-step DDPM posterior
    ab_t = np.prod(1 - schedule.betas[:t])
    ab_prev = np.prod(1 - schedule.betas[:t - 1])
    beta = schedule.betas[t - 1]
    mu_x0 = np.sqrt(ab_prev) * beta / (1 - ab_t)
    mu_xt = np.sqrt(1 - beta) * (1 - ab_prev) / (1 - ab_t)
    var = (1 - ab_prev) / (1 - ab_t) * beta
    return mu_x0, mu_xt, var


def test_q_sample_zero_noise(sched45):
    x0 = np.array([0.3, -1.2, 2.0])
    for t in (1, 20, 45):
        out = q_sample(x0, t, np.zeros(3), sched45)
        np.testing.assert_array_equal(out, np.sqrt(sched45.alpha_bar(t)) * x0)


def test_q_sample_hand_value():
    out = q_sample(np.array([1.0]), 2, np.array([1.0]), TWO)
    assert out[0] == pytest.approx(np.sqrt(0.72) + np.sqrt(0.28), abs=1e-12)
    assert out[0] == pytest.approx(1.37768, abs=1e-5)


def test_q_sample_errors(sched45):
    with pytest.raises(ShapeMismatchError):
        q_sample(np.zeros(3), 5, np.zeros(4), sched45)
    for t in (0, 46, -1):
        with pytest.raises(TimestepRangeError):
            q_sample(np.zeros(3), t, np.zeros(3), sched45)


def test_estimate_x0_hand_value():
    s = build_linear_schedule(2, 0.75, 0.75)  # alpha_bar_1 = 0.25
    out = estimate_x0(np.array([1.0]), 1, np.array([0.0]), s)
    assert out[0] == pytest.approx(2.0, abs=1e-14)


@given(seed=st.integers(0, 2**32 - 1), t=st.integers(1, 45))
def test_forward_inverse_identity(seed, t):
    s = build_linear_schedule(45)
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=16) * 3
    eps = rng.standard_normal(16)
    back = estimate_x0(q_sample(x0, t, eps, s), t, eps, s)
    assert np.max(np.abs(back - x0)) <= 1e-10


def test_marginal_variance_preserved(sched45):
    rng = np.random.default_rng(0)
    n = 100_000
    x0 = rng.standard_normal(n)
    for t in range(1, 46):
        v = q_sample(x0, t, rng.standard_normal(n), sched45).var()
        assert abs(v - 1.0) <= 3 / np.sqrt(n) * np.sqrt(2)  # var of a sample variance is 2/n


def test_posterior_hand_variance():
    _, _, var = posterior_coefficients(TWO, 2)
    assert var == pytest.approx(0.0714286, abs=1e-7)
    assert var == pytest.approx((0.1 / 0.28) * 0.2, abs=1e-15)


def test_posterior_matches_textbook(sched45):
    for t in range(1, 46):
        ours = posterior_coefficients(sched45, t)
        ref = textbook_posterior(sched45, t)
        np.testing.assert_allclose(ours, ref, rtol=1e-12, atol=1e-15)


def test_final_step_is_deterministic(sched45):
    c0, ct, var = posterior_coefficients(sched45, 1)
    assert var == 0.0 and ct == 0.0 and c0 == pytest.approx(1.0)
    x0_hat = np.array([0.4, -0.1])
    out = posterior_step(np.array([5.0, 5.0]), 1, x0_hat, sched45, np.ones(2))
    np.testing.assert_allclose(out, x0_hat, atol=1e-15)


def test_skip_coefficients_keep_marginal(sched45):
    # for data x0 = c, mixing the exact posterior over x_t must give q(x_s | x0)
    rng = np.random.default_rng(1)
    x0 = np.full(200_000, 0.7)
    for t, s in ((45, 30), (30, 17), (20, 1)):
        x_t = q_sample(x0, t, rng.standard_normal(x0.shape), sched45)
        x_s = posterior_step(x_t, t, x0, sched45, rng.standard_normal(x0.shape), s=s)
        ab = sched45.alpha_bar(s)
        assert x_s.mean() == pytest.approx(np.sqrt(ab) * 0.7, abs=0.01)
        assert x_s.var() == pytest.approx(1 - ab, abs=0.01)


def test_chain_with_exact_x0_converges(sched45):
    rng = np.random.default_rng(2)
    x0 = rng.normal(0.5, 1.0, 10_000)
    x = q_sample(x0, 45, rng.standard_normal(x0.shape), sched45)
    for t in range(45, 0, -1):
        x = posterior_step(x, t, x0, sched45, None)
    assert np.mean(np.abs(x - x0)) < 0.05


def test_two_step_plan_oracle_identity(sched45):
    prior = GaussianPrior(0.4, 0.3)
    plan = TimestepPlan(45, 15, 10, (45, 15, 10))
    trace = []
    den = OracleDenoiser(prior, sched45)
    out = sample_truncated(den, np.zeros((64, 3)), plan, sched45, np.random.default_rng(3),
                           trace=trace)
    assert out.source_t == 10
    x_last = trace[-1].values
    np.testing.assert_allclose(out.values, posterior_mean(prior, x_last, 10, sched45),
                               atol=1e-10, rtol=0)


def test_sampler_only_visits_plan_steps(sched45, plan45):
    den = OracleDenoiser(GaussianPrior(), sched45)
    sample_truncated(den, np.zeros((4, 2)), plan45, sched45, np.random.default_rng(0))
    assert tuple(den.calls) == plan45.steps


def test_sampler_deterministic(sched45, plan45):
    den = OracleDenoiser(GaussianPrior(1.0, 0.5), sched45)
    a = sample_truncated(den, np.zeros((5, 3)), plan45, sched45, np.random.default_rng(9))
    b = sample_truncated(den, np.zeros((5, 3)), plan45, sched45, np.random.default_rng(9))
    np.testing.assert_array_equal(a.values, b.values)


def test_posterior_transition_runs_uniform_chain(sched45):
    plan = build_uniform_plan(sched45, 15)
    den = OracleDenoiser(GaussianPrior(), sched45)
    out = sample_truncated(den, np.zeros((3, 2)), plan, sched45, np.random.default_rng(0),
                           transition="posterior")
    assert out.source_t == 1 and tuple(den.calls) == plan.steps


def test_sampler_rejects_non_finite(sched45, plan45):
    def bad(x, t, c):
        return np.full_like(x, np.nan)
    with pytest.raises(NonFiniteError):
        sample_truncated(bad, np.zeros((2, 2)), plan45, sched45, np.random.default_rng(0))


def test_sampler_rejects_foreign_plan(plan45):
    with pytest.raises(TimestepRangeError):
        sample_truncated(lambda x, t, c: x, np.zeros((2, 2)), plan45,
                         build_linear_schedule(50), np.random.default_rng(0))
