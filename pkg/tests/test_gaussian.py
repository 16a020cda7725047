import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from lib.gaussian import (
    GaussianParams,
    StateBatch,
    bayes_forward_coefficients,
    bayes_forward_params,
    ddpm_posterior_params,
    forward_marginal_sample,
    propagate_marginal,
    reverse_conditional_params,
    reverse_mean_coefficients,
    sigma_ddpm,
)
from lib.utils import RADICAND_TOL, DomainError, ParameterError, ShapeError, checked_sqrt

from conftest import explicit_schedule

TOL = 1e-10


def test_forward_marginal_example():
    schedule = explicit_schedule(0.64)
    x_t = forward_marginal_sample(schedule, StateBatch.data_level(np.array([[2.0]])), 1, np.array([[0.5]]))
    assert x_t.t == 1
    np.testing.assert_allclose(x_t.data, [[1.9]], rtol=1e-14)


def test_forward_marginal_needs_data_level():
    schedule = explicit_schedule(0.64)
    with pytest.raises(ParameterError):
        forward_marginal_sample(schedule, StateBatch(np.ones((1, 1)), t=1), 1, np.ones((1, 1)))
    with pytest.raises(ShapeError):
        forward_marginal_sample(schedule, StateBatch.data_level(np.ones((2, 1))), 1, np.ones((1, 1)))


def test_reverse_conditional_example():
    schedule = explicit_schedule(0.9, 0.8)
    params = reverse_conditional_params(
        schedule, StateBatch(np.array([[1.0]]), t=2), StateBatch.data_level(np.array([[0.0]])), 2, 1, 0.0
    )
    np.testing.assert_allclose(params.mean, [[np.sqrt(0.1 / 0.2)]], rtol=1e-14)
    np.testing.assert_allclose(params.mean, [[0.70711]], atol=1e-5)
    assert params.var == 0.0


def test_reverse_conditional_ignores_x_t_at_full_noise():
    schedule = explicit_schedule(0.9, 0.8)
    sigma = np.sqrt(1 - 0.9)
    a, b = reverse_mean_coefficients(schedule, 2, 1, sigma)
    assert a == 0.0
    assert b == pytest.approx(np.sqrt(0.9))

    x_t = StateBatch(np.array([[1e6, -3.0]]), t=2)
    x0 = StateBatch.data_level(np.array([[0.5, 2.0]]))
    params = reverse_conditional_params(schedule, x_t, x0, 2, 1, sigma)
    np.testing.assert_array_equal(params.mean, b * x0.data)


@pytest.mark.parametrize("alpha_to", [0.9, 0.7, 0.31, 1e-3])
def test_boundary_radicand_is_exactly_zero(alpha_to):
    sigma = np.sqrt(1.0 - alpha_to)
    assert checked_sqrt(1.0 - alpha_to - sigma**2, "boundary") == 0.0
    assert checked_sqrt(RADICAND_TOL, "band edge") == 0.0
    assert checked_sqrt(1e-10, "inside") == pytest.approx(1e-5)
    with pytest.raises(DomainError):
        checked_sqrt(-1e-9, "negative")


def test_reverse_conditional_rejects_large_sigma():
    schedule = explicit_schedule(0.9, 0.8)
    with pytest.raises(DomainError):
        reverse_mean_coefficients(schedule, 2, 1, 0.5)


@pytest.mark.parametrize("t_from, t_to", [(1, 1), (1, 2), (3, 1)])
def test_reverse_conditional_rejects_bad_indices(t_from, t_to):
    schedule = explicit_schedule(0.9, 0.8)
    with pytest.raises(ParameterError):
        reverse_mean_coefficients(schedule, t_from, t_to, 0.0)


def test_ddpm_posterior_variance_example():
    schedule = explicit_schedule(0.9, 0.72)
    x = StateBatch(np.zeros((1, 1)), t=2)
    params = ddpm_posterior_params(schedule, x, StateBatch.data_level(np.zeros((1, 1))), 2)
    assert params.var == pytest.approx(0.0714286, abs=1e-7)


def test_sigma_ddpm_example():
    schedule = explicit_schedule(0.9, 0.8)
    assert sigma_ddpm(schedule, 2) == pytest.approx(0.23570, abs=1e-5)
    assert sigma_ddpm(schedule, 1) == 0.0


def test_ddpm_reduction_every_step(schedule, rng):
    x_t = rng.standard_normal((4, 3))
    x0 = rng.standard_normal((4, 3))
    for t in range(1, schedule.T + 1):
        sigma = sigma_ddpm(schedule, t)
        general = reverse_conditional_params(schedule, StateBatch(x_t, t=t), StateBatch.data_level(x0), t, t - 1, sigma)
        ddpm = ddpm_posterior_params(schedule, StateBatch(x_t, t=t), StateBatch.data_level(x0), t)
        np.testing.assert_allclose(general.mean, ddpm.mean, rtol=0, atol=TOL)
        assert general.var == pytest.approx(ddpm.var, abs=TOL)


def test_marginal_consistency_closed_form(schedule, rng):
    x0 = StateBatch.data_level(rng.standard_normal((3, 2)))
    for _ in range(200):
        t_from = int(rng.integers(1, schedule.T + 1))
        t_to = int(rng.integers(0, t_from))
        sigma = rng.uniform(0.0, 1.0) * np.sqrt(1.0 - schedule.alphas[t_to])
        law = propagate_marginal(schedule, x0, t_from, t_to, sigma)
        np.testing.assert_allclose(law.mean, np.sqrt(schedule.alphas[t_to]) * x0.data, rtol=0, atol=TOL)
        assert law.var == pytest.approx(1.0 - schedule.alphas[t_to], abs=TOL)


def test_marginal_consistency_monte_carlo(schedule):
    rng = np.random.default_rng(7)
    n, t_from, t_to = 200_000, 600, 350
    x0 = np.array([1.0, -2.0])
    sigma = 0.6 * np.sqrt(1.0 - schedule.alphas[t_to])

    x_t = forward_marginal_sample(
        schedule, StateBatch.data_level(np.tile(x0, (n, 1))), t_from, rng.standard_normal((n, 2))
    )
    params = reverse_conditional_params(schedule, x_t, StateBatch.data_level(np.tile(x0, (n, 1))), t_from, t_to, sigma)
    x_prev = params.sample(rng.standard_normal((n, 2)))

    alpha_to = schedule.alphas[t_to]
    np.testing.assert_allclose(x_prev.mean(axis=0), np.sqrt(alpha_to) * x0, atol=0.01)
    np.testing.assert_allclose(x_prev.var(axis=0), 1.0 - alpha_to, rtol=0.02)


def test_bayes_forward_kernel_identity(small_schedule, rng):
    x0 = rng.standard_normal((5, 2))
    for t in range(2, small_schedule.T + 1):
        sigma = 0.7 * np.sqrt(1.0 - small_schedule.alphas[t - 1])
        x_t = np.sqrt(small_schedule.alphas[t]) * x0 + np.sqrt(1 - small_schedule.alphas[t]) * rng.standard_normal((5, 2))
        x_prev = rng.standard_normal((5, 2))

        forward = bayes_forward_params(small_schedule, StateBatch(x_prev, t=t - 1), StateBatch.data_level(x0), t, sigma)
        prev_marginal = GaussianParams(np.sqrt(small_schedule.alphas[t - 1]) * x0, 1 - small_schedule.alphas[t - 1])
        reverse = reverse_conditional_params(small_schedule, StateBatch(x_t, t=t), StateBatch.data_level(x0), t, t - 1, sigma)
        marginal = GaussianParams(np.sqrt(small_schedule.alphas[t]) * x0, 1 - small_schedule.alphas[t])

        left = forward.log_density(x_t) + prev_marginal.log_density(x_prev)
        right = reverse.log_density(x_prev) + marginal.log_density(x_t)
        np.testing.assert_allclose(left, right, rtol=0, atol=TOL)


def test_forward_kernel_markovian_at_sigma_ddpm(schedule):
    for t in [2, 10, 300, 999]:
        coef_prev, coef_x0 = bayes_forward_coefficients(schedule, t, sigma_ddpm(schedule, t))
        assert abs(coef_x0) < TOL
        assert coef_prev == pytest.approx(np.sqrt(schedule.alphas[t] / schedule.alphas[t - 1]), rel=1e-8)


def test_forward_kernel_depends_on_x0_off_ddpm(schedule):
    t = 300
    coef_prev, coef_x0 = bayes_forward_coefficients(schedule, t, 0.5 * sigma_ddpm(schedule, t))
    assert abs(coef_x0) > 1e-6


def test_forward_kernel_undefined_at_zero_sigma(small_schedule):
    x = StateBatch.data_level(np.zeros((1, 2)))
    with pytest.raises(DomainError):
        bayes_forward_params(small_schedule, StateBatch(np.zeros((1, 2)), t=1), x, 2, 0.0)
    with pytest.raises(DomainError):
        bayes_forward_coefficients(small_schedule, 2, 0.0)


def test_state_batch_validation():
    with pytest.raises(DomainError):
        StateBatch(np.array([[np.nan, 0.0]]), t=1)
    with pytest.raises(ParameterError):
        StateBatch(np.zeros((1, 2)), t=-1)
    with pytest.raises(DomainError):
        GaussianParams(np.zeros((1, 1)), 0.0).log_density(np.zeros((1, 1)))


@seed(11)
@settings(max_examples=200, deadline=None)
@given(
    alpha_to=st.floats(min_value=0.05, max_value=0.99),
    gap=st.floats(min_value=0.01, max_value=0.95),
    fraction=st.floats(min_value=0.0, max_value=1.0),
)
def test_marginal_consistency_any_schedule(alpha_to, gap, fraction):
    alpha_from = alpha_to * (1.0 - gap)
    schedule = explicit_schedule(alpha_to, alpha_from)
    sigma = fraction * np.sqrt(1.0 - alpha_to)
    law = propagate_marginal(schedule, StateBatch.data_level(np.array([[1.0, -1.0]])), 2, 1, sigma)

    np.testing.assert_allclose(law.mean, np.sqrt(alpha_to) * np.array([[1.0, -1.0]]), atol=TOL)
    assert law.var == pytest.approx(1.0 - alpha_to, abs=TOL)
