import numpy as np
import pytest
import torch

from lib.denoiser import (
    ConstantDenoiser,
    MixtureOptimalDenoiser,
    MixtureSpec,
    TimeConditionedMLP,
    TrainConfig,
    TrainedDenoiser,
    denoising_risk,
    gradient_check,
    load_checkpoint,
    mixture_optimal_eps,
    mixture_posterior_mean,
    predict_x0,
    read_checkpoint_header,
    save_checkpoint,
    train_toy_denoiser,
)
from lib.gaussian import StateBatch
from lib.schedule import make_linear_beta_schedule
from lib.utils import ConfigError, DomainError, ParameterError, ShapeError, TrainingError

from conftest import explicit_schedule

SMALL_TRAINING = TrainConfig(steps=20, batch_size=32, width=16, seed=3)


def risk_sample(schedule, spec, n, seed):
    rng = np.random.default_rng(seed)
    x0 = spec.sample(n, rng)
    t = rng.integers(1, schedule.T + 1, size=n)
    return x0, t, rng.standard_normal(x0.shape)


def test_predict_x0_example():
    schedule = explicit_schedule(0.64)
    x0_hat = predict_x0(schedule, StateBatch(np.array([[1.0]]), t=1), 1, np.array([[0.5]]))
    np.testing.assert_allclose(x0_hat, [[0.875]], rtol=1e-14)


def test_predict_x0_inverts_forward_marginal(schedule, rng):
    x0 = rng.standard_normal((1000, 3))
    eps = rng.standard_normal((1000, 3))
    for t in [1, 50, 500, 1000]:
        alpha = schedule.alphas[t]
        x_t = StateBatch(np.sqrt(alpha) * x0 + np.sqrt(1 - alpha) * eps, t=t)
        # rescaling by 1/sqrt(alpha_T) ~ 160 amplifies round-off at the last step
        np.testing.assert_allclose(predict_x0(schedule, x_t, t, eps), x0, rtol=0, atol=1e-12 / np.sqrt(alpha))


def test_predict_x0_zero_noise_rescales(small_schedule, rng):
    x = rng.standard_normal((5, 2))
    x0_hat = predict_x0(small_schedule, StateBatch(x, t=4), 4, np.zeros_like(x))
    np.testing.assert_allclose(x0_hat, x / np.sqrt(small_schedule.alphas[4]))


def test_predict_x0_needs_noise_level(small_schedule):
    with pytest.raises(ParameterError):
        predict_x0(small_schedule, StateBatch(np.zeros((1, 2)), t=0), 0, np.zeros((1, 2)))
    with pytest.raises(ShapeError):
        predict_x0(small_schedule, StateBatch(np.zeros((1, 2)), t=1), 1, np.zeros((2, 2)))


def test_constant_denoiser():
    model = ConstantDenoiser(np.array([1.0, -1.0]))
    np.testing.assert_array_equal(model.eval(StateBatch(np.zeros((3, 2)), t=1)), [[1.0, -1.0]] * 3)
    with pytest.raises(DomainError):
        model.eval(StateBatch(np.zeros((3, 2)), t=0))


def test_point_mass_eps_is_exact(schedule, rng):
    center = np.array([0.4, -1.2])
    spec = MixtureSpec.point_set(center[None, :])
    eps = rng.standard_normal((50, 2))
    for t in [1, 10, 500, 1000]:
        alpha = schedule.alphas[t]
        x = StateBatch(np.sqrt(alpha) * center + np.sqrt(1 - alpha) * eps, t=t)
        np.testing.assert_allclose(mixture_optimal_eps(spec, schedule, x), eps, atol=1e-9)


def test_symmetric_mixture_at_origin(schedule):
    spec = MixtureSpec(weights=np.array([0.5, 0.5]), means=np.array([[1.0, 2.0], [-1.0, -2.0]]), component_std=0.3)
    x = StateBatch(np.zeros((1, 2)), t=200)
    np.testing.assert_allclose(mixture_optimal_eps(spec, schedule, x), 0.0, atol=1e-15)


def test_gaussian_posterior_mean_closed_form(schedule, gaussian, rng):
    m, s = gaussian.means[0], gaussian.component_std
    x = rng.standard_normal((20, 2))
    for t in [1, 100, 999]:
        alpha = schedule.alphas[t]
        expected = m + np.sqrt(alpha) * s**2 / (alpha * s**2 + 1 - alpha) * (x - np.sqrt(alpha) * m)
        np.testing.assert_allclose(mixture_posterior_mean(gaussian, schedule, StateBatch(x, t=t)), expected, rtol=1e-12)


def test_far_point_takes_nearest_component(schedule, mixture):
    x = StateBatch(np.array([[30.0, -20.0]]) * np.sqrt(schedule.alphas[5]), t=5)
    posterior = mixture_posterior_mean(mixture, schedule, x)
    assert np.all(np.isfinite(posterior))
    assert np.argmin(np.linalg.norm(mixture.means - posterior, axis=1)) == 1


def test_optimal_eps_undefined_at_data_level(schedule, mixture):
    with pytest.raises(DomainError):
        mixture_optimal_eps(mixture, schedule, StateBatch(np.zeros((1, 2)), t=0))


def test_optimal_eps_beats_linear_regression(schedule, gaussian):
    """For Gaussian data eps* is linear, so a least-squares fit on the same draws cannot do better."""
    rng = np.random.default_rng(5)
    n, t = 200_000, 300
    alpha = schedule.alphas[t]
    x0 = gaussian.sample(n, rng)
    eps = rng.standard_normal((n, 2))
    x = np.sqrt(alpha) * x0 + np.sqrt(1 - alpha) * eps

    optimal = np.mean(np.sum((mixture_optimal_eps(gaussian, schedule, StateBatch(x, t=t)) - eps) ** 2, axis=1))
    design = np.hstack([x, np.ones((n, 1))])
    coefficients, *_ = np.linalg.lstsq(design, eps, rcond=None)
    regression = np.mean(np.sum((design @ coefficients - eps) ** 2, axis=1))
    assert regression > optimal * (1 - 1e-3)


def test_optimal_eps_beats_other_models(schedule, mixture):
    x0, t, eps = risk_sample(schedule, mixture, 20_000, seed=9)
    optimal = denoising_risk(MixtureOptimalDenoiser(mixture, schedule), schedule, x0, t, eps).mean()
    zero = denoising_risk(ConstantDenoiser(), schedule, x0, t, eps).mean()
    assert optimal < zero
    assert zero == pytest.approx(2.0, rel=0.03)


@pytest.mark.parametrize(
    "weights, means, std",
    [([0.5, 0.6], [[0.0], [1.0]], 0.1), ([1.0], [[0.0], [1.0]], 0.1), ([1.0], [[0.0]], -0.1)],
)
def test_invalid_mixtures(weights, means, std):
    with pytest.raises((ParameterError, ShapeError)):
        MixtureSpec(weights=np.array(weights), means=np.array(means), component_std=std)


def test_mixture_moments_and_serialization(mixture, rng):
    draws = mixture.sample(200_000, rng)
    np.testing.assert_allclose(draws.mean(axis=0), mixture.mean, atol=0.02)
    np.testing.assert_allclose(np.cov(draws.T), mixture.covariance, atol=0.03)
    loaded = MixtureSpec.load(mixture.to_dict())
    np.testing.assert_array_equal(loaded.means, mixture.means)


def test_training_is_deterministic(small_schedule, mixture):
    first = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING, progress=False)
    second = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING, progress=False)
    np.testing.assert_array_equal(first.parameter_vector(), second.parameter_vector())

    other = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING.model_copy(update={"seed": 4}), progress=False)
    assert not np.array_equal(first.parameter_vector(), other.parameter_vector())


def test_zero_steps_returns_initialization(small_schedule, mixture):
    config = SMALL_TRAINING.model_copy(update={"steps": 0})
    model = train_toy_denoiser(mixture, small_schedule, config, progress=False)
    initial = TrainedDenoiser(TimeConditionedMLP.build(2, small_schedule.T, config), small_schedule, config.seed)
    np.testing.assert_array_equal(model.parameter_vector(), initial.parameter_vector())


def test_building_does_not_disturb_global_torch_rng():
    torch.manual_seed(0)
    expected = torch.rand(3)
    torch.manual_seed(0)
    TimeConditionedMLP.build(2, 10, SMALL_TRAINING)
    torch.testing.assert_close(torch.rand(3), expected)


def test_trained_denoiser_contract(small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING, progress=False)
    out = model.eval(StateBatch(np.zeros((7, 2)), t=3))
    assert out.shape == (7, 2)
    assert out.dtype == np.float64
    with pytest.raises(DomainError):
        model.eval(StateBatch(np.zeros((7, 2)), t=0))
    with pytest.raises(ParameterError):
        TrainedDenoiser(model.module, make_linear_beta_schedule(11), 0)


def test_diverging_loss_is_reported(small_schedule):
    points = np.full((4, 2), 1e308)
    with pytest.raises(TrainingError):
        train_toy_denoiser(points, small_schedule, SMALL_TRAINING, progress=False)


def test_gradient_check(small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING.model_copy(update={"steps": 5}), progress=False)
    assert gradient_check(model, mixture, n_coordinates=20) < 1e-4


def test_gradient_check_restores_parameters(small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING, progress=False)
    before = model.parameter_vector()
    gradient_check(model, mixture, n_coordinates=5)
    np.testing.assert_array_equal(model.parameter_vector(), before)


def test_checkpoint_round_trip(tmp_path, small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING, progress=False)
    path = save_checkpoint(model, tmp_path / "denoiser.ckpt")

    header, _ = read_checkpoint_header(path)
    assert header["schedule_hash"] == small_schedule.digest
    assert header["seed"] == SMALL_TRAINING.seed

    loaded = load_checkpoint(path, small_schedule)
    np.testing.assert_array_equal(loaded.parameter_vector(), model.parameter_vector())
    x = StateBatch(np.random.default_rng(0).standard_normal((9, 2)), t=6)
    np.testing.assert_array_equal(loaded.eval(x), model.eval(x))


def test_checkpoint_rejects_other_schedule(tmp_path, small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING.model_copy(update={"steps": 1}), progress=False)
    path = save_checkpoint(model, tmp_path / "denoiser.ckpt")
    with pytest.raises(ConfigError):
        load_checkpoint(path, make_linear_beta_schedule(10, 1e-2, 0.3))


def test_checkpoint_rejects_truncated_payload(tmp_path, small_schedule, mixture):
    model = train_toy_denoiser(mixture, small_schedule, SMALL_TRAINING.model_copy(update={"steps": 1}), progress=False)
    path = save_checkpoint(model, tmp_path / "denoiser.ckpt")
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(ConfigError):
        load_checkpoint(path, small_schedule)


def test_risk_groups_by_timestep(small_schedule, mixture):
    x0, t, eps = risk_sample(small_schedule, mixture, 500, seed=1)
    losses = denoising_risk(ConstantDenoiser(), small_schedule, x0, t, eps)
    np.testing.assert_allclose(losses, np.sum(eps**2, axis=1))
    with pytest.raises(ShapeError):
        denoising_risk(ConstantDenoiser(), small_schedule, x0, t[:-1], eps)


@pytest.mark.slow
def test_trained_risk_close_to_optimal():
    schedule = make_linear_beta_schedule(100, 1e-3, 0.1)
    spec = MixtureSpec(weights=np.array([1.0]), means=np.array([[0.5, -0.3]]), component_std=0.5)
    model = train_toy_denoiser(spec, schedule, TrainConfig(steps=4000, batch_size=512, seed=1), progress=False)

    x0, t, eps = risk_sample(schedule, spec, 20_000, seed=2)
    trained = denoising_risk(model, schedule, x0, t, eps).mean()
    optimal = denoising_risk(MixtureOptimalDenoiser(spec, schedule), schedule, x0, t, eps).mean()
    assert 0.99 * optimal <= trained <= 1.05 * optimal


@pytest.mark.slow
def test_single_point_risk_drops_with_training():
    schedule = make_linear_beta_schedule(100, 1e-3, 0.1)
    points = np.array([[1.0, -0.5]])
    x0, t, eps = risk_sample(schedule, MixtureSpec.point_set(points), 5000, seed=4)

    config = TrainConfig(steps=0, batch_size=256, seed=2)
    untrained = denoising_risk(train_toy_denoiser(points, schedule, config, progress=False), schedule, x0, t, eps).mean()
    trained_model = train_toy_denoiser(points, schedule, config.model_copy(update={"steps": 1500}), progress=False)
    trained = denoising_risk(trained_model, schedule, x0, t, eps).mean()
    assert trained < 0.5 * untrained
