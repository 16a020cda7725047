import numpy as np
import pytest

from lib.denoiser import ConstantDenoiser, MixtureOptimalDenoiser, MixtureSpec, TimeConditionedMLP, TrainConfig, TrainedDenoiser
from lib.gaussian import GaussianParams, StateBatch, sigma_ddpm
from lib.objective import (
    GammaConvention,
    PerStepLinearDenoiser,
    SamplePlan,
    WeightVector,
    constancy_spread,
    ddpm_bound_terms,
    equivalence_gamma,
    equivalence_report,
    fit_per_step_linear,
    gaussian_kl,
    j_sigma,
    l_gamma,
)
from lib.utils import DomainError, ParameterError, ShapeError

from conftest import explicit_schedule


def feasible_sigma(schedule, fraction=0.5, first=0.3):
    """sigma_1 = first, sigma_t = fraction * sqrt(1 - alpha_{t-1}) for t >= 2."""
    return np.concatenate([[first], fraction * np.sqrt(1.0 - schedule.alphas[1:-1])])


@pytest.fixture(scope="module")
def plan(small_schedule, mixture):
    return SamplePlan.from_mixture(mixture, T=small_schedule.T, n=500, seed=3)


@pytest.fixture(scope="module")
def random_models(small_schedule):
    rng = np.random.default_rng(21)
    linear = [PerStepLinearDenoiser.random(small_schedule.T, 2, rng) for _ in range(3)]
    networks = [
        TrainedDenoiser(TimeConditionedMLP.build(2, small_schedule.T, TrainConfig(seed=s, width=16)), small_schedule, s)
        for s in (1, 2)
    ]
    return linear + networks + [ConstantDenoiser()]


def test_weight_vector_validation():
    with pytest.raises(ParameterError):
        WeightVector(np.array([1.0, 0.0]))
    with pytest.raises(ParameterError):
        WeightVector(np.array([]))
    assert WeightVector.ones(3).at(3) == 1.0


def test_sample_plan_is_reproducible(mixture):
    first = SamplePlan.from_mixture(mixture, T=5, n=10, seed=1)
    second = SamplePlan.from_mixture(mixture, T=5, n=10, seed=1)
    np.testing.assert_array_equal(first.x0, second.x0)
    np.testing.assert_array_equal(first.eps, second.eps)
    assert not np.array_equal(first.noise(1), first.noise(2))


def test_sample_plan_validation(small_schedule):
    with pytest.raises(ShapeError):
        SamplePlan(x0=np.zeros((4, 2)), eps=np.zeros((3, 4, 3)))
    plan = SamplePlan.make(np.zeros((4, 2)), T=3, seed=0)
    with pytest.raises(ParameterError):
        plan.x_t(small_schedule, 1)


def test_zero_model_loss_counts_noise_energy(small_schedule, mixture):
    plan = SamplePlan.from_mixture(mixture, T=small_schedule.T, n=10_000, seed=5)
    value = l_gamma(small_schedule, ConstantDenoiser(), plan, WeightVector.ones(small_schedule.T))
    assert value == pytest.approx(small_schedule.T * 2, rel=0.02)


def test_l_gamma_is_linear_in_weights(small_schedule, plan, random_models):
    rng = np.random.default_rng(0)
    first = WeightVector(rng.uniform(0.1, 2.0, small_schedule.T))
    second = WeightVector(rng.uniform(0.1, 2.0, small_schedule.T))
    model = random_models[0]
    assert l_gamma(small_schedule, model, plan, first.scaled(2.0)) == pytest.approx(
        2.0 * l_gamma(small_schedule, model, plan, first), rel=1e-14
    )
    combined = WeightVector(first.gamma + second.gamma)
    assert l_gamma(small_schedule, model, plan, combined) == pytest.approx(
        l_gamma(small_schedule, model, plan, first) + l_gamma(small_schedule, model, plan, second), rel=1e-12
    )


def test_l_gamma_length_mismatch(small_schedule, plan):
    with pytest.raises(ShapeError):
        l_gamma(small_schedule, ConstantDenoiser(), plan, WeightVector.ones(5))


def test_perfect_model_has_zero_model_terms(small_schedule):
    spec = MixtureSpec.point_set(np.array([[0.3, -0.8]]))
    plan = SamplePlan.from_mixture(spec, T=small_schedule.T, n=200, seed=2)
    model = MixtureOptimalDenoiser(spec, small_schedule)

    assert l_gamma(small_schedule, model, plan, WeightVector.ones(small_schedule.T)) < 1e-20
    terms = j_sigma(small_schedule, model, plan, feasible_sigma(small_schedule))
    assert terms.theta_dependent < 1e-20
    assert terms.total == pytest.approx(terms.theta_independent)


def test_j_sigma_rejects_zero_sigma(small_schedule, plan):
    sigma = feasible_sigma(small_schedule)
    sigma[4] = 0.0
    with pytest.raises(DomainError):
        j_sigma(small_schedule, ConstantDenoiser(), plan, sigma)
    with pytest.raises(ShapeError):
        j_sigma(small_schedule, ConstantDenoiser(), plan, sigma[:-1])
    with pytest.raises(DomainError):
        j_sigma(small_schedule, ConstantDenoiser(), plan, feasible_sigma(small_schedule, fraction=2.0))


def test_reconstruction_weights_example():
    schedule = explicit_schedule(0.9, 0.7, 0.4)
    alphas = schedule.alphas[1:]
    sigma = np.sqrt((1 - alphas) / (2 * alphas))
    gamma = equivalence_gamma(sigma, schedule, d=2, convention=GammaConvention.RECONSTRUCTION)
    np.testing.assert_allclose(gamma.gamma, 1.0, rtol=1e-14)


def test_weights_vanish_as_noise_vanishes():
    schedule = explicit_schedule(1.0 - 1e-10, 0.5)
    gamma = equivalence_gamma(np.array([0.1, 0.1]), schedule, d=2, convention="reconstruction")
    assert gamma.at(1) < 1e-8


def test_exact_weights_carry_reverse_coefficient(small_schedule):
    sigma = feasible_sigma(small_schedule)
    exact = equivalence_gamma(sigma, small_schedule, d=2)
    plain = equivalence_gamma(sigma, small_schedule, d=2, convention=GammaConvention.RECONSTRUCTION)
    assert exact.at(1) == plain.at(1)
    assert np.all(exact.gamma[1:] < plain.gamma[1:])


def test_per_dimension_convention_formula(small_schedule):
    sigma = feasible_sigma(small_schedule)
    gamma = equivalence_gamma(sigma, small_schedule, d=3, convention=GammaConvention.PER_DIMENSION)
    np.testing.assert_allclose(gamma.gamma, 1.0 / (6.0 * sigma**2 * small_schedule.alphas[1:]))


def test_residual_is_model_free_under_exact_weights(small_schedule, plan, random_models):
    sigma = feasible_sigma(small_schedule)
    gamma = equivalence_gamma(sigma, small_schedule, d=2)
    assert constancy_spread(small_schedule, random_models, plan, sigma, gamma) < 1e-8


@pytest.mark.parametrize(
    "weights",
    [
        lambda sigma, schedule: equivalence_gamma(sigma, schedule, 2).scaled(1.1),
        lambda sigma, schedule: equivalence_gamma(sigma, schedule, 2, GammaConvention.PER_DIMENSION),
    ],
    ids=["perturbed", "per_dimension"],
)
def test_residual_depends_on_model_under_wrong_weights(small_schedule, plan, random_models, weights):
    sigma = feasible_sigma(small_schedule)
    assert constancy_spread(small_schedule, random_models, plan, sigma, weights(sigma, small_schedule)) > 1e-6


def test_report_rows_sum_to_residual(small_schedule, plan, random_models):
    sigma = feasible_sigma(small_schedule)
    gamma = equivalence_gamma(sigma, small_schedule, d=2)
    model = random_models[1]
    rows = equivalence_report(small_schedule, model, plan, sigma, gamma)

    assert [row["t"] for row in rows] == list(range(1, small_schedule.T + 1))
    residual = j_sigma(small_schedule, model, plan, sigma).total - l_gamma(small_schedule, model, plan, gamma)
    assert sum(row["residual"] for row in rows) == pytest.approx(residual, rel=1e-10)


def test_minimizer_does_not_depend_on_weights(small_schedule, plan):
    rng = np.random.default_rng(8)
    unit = fit_per_step_linear(small_schedule, plan, WeightVector.ones(small_schedule.T))
    weighted = fit_per_step_linear(small_schedule, plan, WeightVector(rng.uniform(0.01, 100.0, small_schedule.T)))
    np.testing.assert_allclose(unit.coefficients, weighted.coefficients, rtol=1e-6, atol=1e-6)


def test_fit_beats_random_tables(small_schedule, plan, random_models):
    gamma = WeightVector.ones(small_schedule.T)
    fitted = fit_per_step_linear(small_schedule, plan, gamma)
    best = l_gamma(small_schedule, fitted, plan, gamma)
    for model in random_models[:3]:
        assert best < l_gamma(small_schedule, model, plan, gamma)


def test_lookup_denoiser_contract():
    model = PerStepLinearDenoiser.random(4, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        PerStepLinearDenoiser(np.zeros((4, 2, 2)))
    with pytest.raises(DomainError):
        model.eval(StateBatch(np.zeros((1, 2)), t=5))
    with pytest.raises(ShapeError):
        model.eval(StateBatch(np.zeros((1, 3)), t=2))


def test_gaussian_kl_closed_form():
    p = GaussianParams(np.zeros((1, 1)), 1.0)
    q = GaussianParams(np.ones((1, 1)), 2.0)
    np.testing.assert_allclose(gaussian_kl(p, q), [0.5 * np.log(2.0)], rtol=1e-14)
    np.testing.assert_allclose(gaussian_kl(q, q), [0.0], atol=1e-15)

    equal = GaussianParams(np.array([[1.0, 2.0]]), 0.25)
    shifted = GaussianParams(np.array([[0.0, 0.0]]), 0.25)
    np.testing.assert_allclose(gaussian_kl(equal, shifted), [5.0 / (2 * 0.25)])
    with pytest.raises(DomainError):
        gaussian_kl(GaussianParams(np.zeros((1, 1)), 0.0), q)


def test_markovian_case_matches_ddpm_bound(small_schedule, plan, random_models):
    sigma = np.array([0.1] + [sigma_ddpm(small_schedule, t) for t in range(2, small_schedule.T + 1)])
    model = random_models[0]
    terms = j_sigma(small_schedule, model, plan, sigma)
    np.testing.assert_allclose(terms.per_t[1:], ddpm_bound_terms(small_schedule, model, plan), rtol=1e-9)
