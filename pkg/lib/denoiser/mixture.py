from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from lib.denoiser.base import DenoiserTag
from lib.gaussian import StateBatch
from lib.schedule import NoiseSchedule
from lib.utils import DomainError, ParameterError, ShapeError, as_matrix

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class MixtureSpec:
    """Isotropic Gaussian mixture q(x_0) = sum_k w_k N(m_k, s^2 I).

    ``component_std = 0`` is the point-set limit (each component a point mass), which is
    how delta data and empirical point clouds are represented.
    """

    weights: np.ndarray
    means: np.ndarray
    component_std: float

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.means = as_matrix(self.means, "MixtureSpec.means")

        if self.means.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"{self.weights.shape[0]} weights for {self.means.shape[0]} component means"
            )
        if np.any(self.weights < 0.0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights must be a probability vector, sum={self.weights.sum()!r}")
        if not np.isfinite(self.component_std) or self.component_std < 0.0:
            raise ParameterError(f"component_std must be >= 0, got {self.component_std}")
        self.component_std = float(self.component_std)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    @property
    def covariance(self) -> np.ndarray:
        mu = self.mean
        second = np.einsum("k,ki,kj->ij", self.weights, self.means, self.means)
        return second + self.component_std**2 * np.eye(self.d) - np.outer(mu, mu)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        components = rng.choice(self.K, size=n, p=self.weights)
        noise = rng.standard_normal((n, self.d))
        return self.means[components] + self.component_std * noise

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "component_std": self.component_std,
        }

    @staticmethod
    def load(data: dict) -> MixtureSpec:
        return MixtureSpec(
            weights=np.asarray(data["weights"]),
            means=np.asarray(data["means"]),
            component_std=float(data["component_std"]),
        )

    @staticmethod
    def point_set(points: np.ndarray) -> MixtureSpec:
        points = as_matrix(points, "points")
        n = points.shape[0]
        return MixtureSpec(weights=np.full(n, 1.0 / n), means=points, component_std=0.0)


def mixture_posterior_mean(spec: MixtureSpec, schedule: NoiseSchedule, x_t: StateBatch) -> np.ndarray:
    """E[x_0 | x_t] under the mixture.

    Given component k, x_t ~ N(sqrt(a) m_k, v I) with v = a s^2 + 1 - a, and
    E[x_0 | x_t, k] = m_k + (sqrt(a) s^2 / v)(x_t - sqrt(a) m_k). The shared v cancels in
    the responsibilities, so only the squared distances enter the softmax.
    """
    if x_t.d != spec.d:
        raise ShapeError(f"state dimension {x_t.d} does not match mixture dimension {spec.d}")
    schedule.check_index(x_t.t, low=0)

    alpha = schedule.alphas[x_t.t]
    variance = alpha * spec.component_std**2 + 1.0 - alpha
    if variance <= 0.0:
        # alpha = 1 with point masses: the posterior is the nearest atom
        variance = np.finfo(np.float64).tiny

    diffs = x_t.data[:, None, :] - np.sqrt(alpha) * spec.means[None, :, :]
    with np.errstate(divide="ignore"):
        log_weights = np.log(spec.weights)
    logits = log_weights[None, :] - 0.5 * np.einsum("nkd,nkd->nk", diffs, diffs) / variance
    responsibilities = softmax(logits, axis=1)

    shrink = np.sqrt(alpha) * spec.component_std**2 / variance
    component_means = spec.means[None, :, :] + shrink * diffs
    return np.einsum("nk,nkd->nd", responsibilities, component_means)


def mixture_optimal_eps(spec: MixtureSpec, schedule: NoiseSchedule, x_t: StateBatch) -> np.ndarray:
    """Minimizer of the per-t denoising risk: (x_t - sqrt(alpha_t) E[x_0|x_t]) / sqrt(1 - alpha_t)."""
    if x_t.t == 0:
        raise DomainError("the optimal noise prediction is undefined at t = 0 (1 - alpha_0 = 0)")

    alpha = schedule.alphas[x_t.t]
    posterior_mean = mixture_posterior_mean(spec, schedule, x_t)
    return (x_t.data - np.sqrt(alpha) * posterior_mean) / np.sqrt(1.0 - alpha)


class MixtureOptimalDenoiser:
    """The exact eps* for mixture data; the risk floor every trained model is measured against."""

    tag = DenoiserTag.ANALYTIC_MIXTURE

    def __init__(self, spec: MixtureSpec, schedule: NoiseSchedule) -> None:
        self.spec = spec
        self.schedule = schedule

    def eval(self, x: StateBatch) -> np.ndarray:
        return mixture_optimal_eps(self.spec, self.schedule, x)
