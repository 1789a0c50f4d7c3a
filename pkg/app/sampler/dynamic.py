"""
Dynamic model: z and beta updates shared with the static sampler, SGLD moves
for the period logits pi_tilde, and a conjugate Inverse-Gamma update for the
per-type random-walk variances sigma2.

The random walk is pi_tilde[t] ~ Normal(pi_tilde[t-1], sigma2_k); the first
period has a flat prior and the last period has no successor, so the
corresponding smoothing terms are absent.
"""

import logging

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from app.core.exceptions import InvalidModelConfiguration, NumericalFaultError
from app.data.dataset import SurveyDataset
from app.sampler.base import BaseSampler, step_beta, step_z
from app.sampler.distributions import (
    RngStream,
    sample_dirichlet,
    sample_inverse_gamma,
    softmax,
)
from app.sampler.state import ChainState, PosteriorDraws
from app.schemas import DynamicConfig, SgldSchedule

logger = logging.getLogger(__name__)


class SgldDiagnostics(BaseModel):
    iterations: list[int] = Field(default_factory=list)
    step_sizes: list[float] = Field(default_factory=list)
    gradient_norms: list[float] = Field(default_factory=list)
    noise_variances: list[float] = Field(default_factory=list)
    drift: list[list[float]] = Field(
        default_factory=list, description="Per-period mean |eps/2 * gradient|"
    )

    def record(self, r: int, eps: float, grad_norm: float, drift: np.ndarray):
        self.iterations.append(r)
        self.step_sizes.append(eps)
        self.gradient_norms.append(grad_norm)
        self.noise_variances.append(eps)
        self.drift.append([float(d) for d in drift])

    def steps_decreasing(self) -> bool:
        return all(a > b for a, b in zip(self.step_sizes, self.step_sizes[1:], strict=False))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "iteration": r,
                "period": t + 1,
                "step_size": eps,
                "gradient_norm": g,
                "noise_variance": v,
                "drift": d,
            }
            for r, eps, g, v, drifts in zip(
                self.iterations,
                self.step_sizes,
                self.gradient_norms,
                self.noise_variances,
                self.drift,
                strict=True,
            )
            for t, d in enumerate(drifts)
        ]
        return pd.DataFrame(
            rows,
            columns=["iteration", "period", "step_size", "gradient_norm", "noise_variance", "drift"],
        )


def period_counts(
    labels: np.ndarray, z: np.ndarray, T: int, K: int
) -> tuple[np.ndarray, np.ndarray]:
    """Return (n, N_t): n[t, k] = #{i : s_i = t, z_i = k} and N_t = #{i : s_i = t}."""
    n = np.bincount(labels * K + z, minlength=T * K).reshape(T, K).astype(float)
    return n, n.sum(axis=1)


def gradient_row(
    pi_tilde: np.ndarray, sigma2: np.ndarray, t: int, n_t: np.ndarray, N_t: float
) -> np.ndarray:
    """
    Gradient of log p(pi_tilde[t] | pi_tilde[t-1], pi_tilde[t+1], z) for all k:
    -(x_t - x_{t-1}) / sigma2 + (x_{t+1} - x_t) / sigma2 + n_t - N_t * softmax(x_t).
    """
    x = pi_tilde[t]
    grad = n_t - N_t * softmax(x)
    if t > 0:
        grad -= (x - pi_tilde[t - 1]) / sigma2
    if t < pi_tilde.shape[0] - 1:
        grad += (pi_tilde[t + 1] - x) / sigma2
    return grad


def log_conditional(
    x: np.ndarray, pi_tilde: np.ndarray, sigma2: np.ndarray, t: int, n_t: np.ndarray
) -> float:
    """Unnormalised log density of pi_tilde[t] = x given its neighbours and counts."""
    value = 0.0
    if t > 0:
        value -= float(np.sum((x - pi_tilde[t - 1]) ** 2 / (2 * sigma2)))
    if t < pi_tilde.shape[0] - 1:
        value -= float(np.sum((pi_tilde[t + 1] - x) ** 2 / (2 * sigma2)))
    log_pi = x - x.max() - np.log(np.sum(np.exp(x - x.max())))
    return value + float(np.dot(n_t, log_pi))


def sgld_gradient(state: ChainState, t: int, k: int, data: SurveyDataset) -> float:
    """Partial derivative of the period-t log conditional with respect to pi_tilde[t, k]."""
    if state.sigma2 is None or np.any(state.sigma2 <= 0):
        raise NumericalFaultError("sigma2 must be positive", details={"t": t, "k": k})
    T = state.pi_tilde.shape[0]
    if not 0 <= t < T:
        raise InvalidModelConfiguration(f"period {t} outside 0..{T - 1}")
    n, N_t = period_counts(data.labels, state.z, T, state.K)
    return float(gradient_row(state.pi_tilde, state.sigma2, t, n[t], N_t[t])[k])


def step_pi_tilde_sgld(
    state: ChainState,
    data: SurveyDataset,
    r: int,
    rng: RngStream,
    schedule: SgldSchedule,
    batch_size: int | None = None,
    diagnostics: SgldDiagnostics | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    One SGLD move per period: x_t += eps_r / 2 * gradient + Normal(0, eps_r).

    Periods are visited in order, so period t sees the already updated t-1.
    With batch_size M < N the counts come from M respondents drawn without
    replacement and are scaled by N / M.

    Raises:
        NumericalFaultError: If an update is not finite
    """
    T, K = state.pi_tilde.shape
    eps = schedule.step_size(r)
    if np.any(state.sigma2 <= 0):
        raise NumericalFaultError("sigma2 must be positive", details={"r": r})

    n_resp = data.n_respondents
    if batch_size is not None and batch_size < n_resp:
        rows = rng.generator.choice(n_resp, size=batch_size, replace=False)
        n, N_t = period_counts(data.labels[rows], state.z[rows], T, K)
        scale = n_resp / batch_size
        n, N_t = n * scale, N_t * scale
    else:
        n, N_t = period_counts(data.labels, state.z, T, K)

    grads = np.empty((T, K))
    for t in range(T):
        grads[t] = gradient_row(state.pi_tilde, state.sigma2, t, n[t], N_t[t])
        noise = rng.generator.normal(0.0, np.sqrt(eps), size=K)
        updated = state.pi_tilde[t] + 0.5 * eps * grads[t] + noise
        bad = np.flatnonzero(~np.isfinite(updated))
        if bad.size:
            raise NumericalFaultError(
                f"Non-finite SGLD update at period {t}, type {int(bad[0])}, iteration {r}",
                details={"t": t, "k": int(bad[0]), "r": r},
            )
        state.pi_tilde[t] = updated

    state.pi = softmax(state.pi_tilde, axis=1)
    if diagnostics is not None:
        drift = np.abs(0.5 * eps * grads).mean(axis=1)
        diagnostics.record(r, eps, float(np.linalg.norm(grads)), drift)
    return state.pi_tilde, state.pi


def step_sigma(state: ChainState, rng: RngStream, v0: float, s0: float) -> np.ndarray:
    """
    Draw sigma2_k ~ InverseGamma(v0 + T, s0 + sum_t (pi_tilde[t, k] - pi_tilde[t-1, k])^2).

    The sum covers the T - 1 observed increments; the first period has no predecessor.
    """
    T = state.pi_tilde.shape[0]
    increments = np.diff(state.pi_tilde, axis=0)
    shape = v0 + T
    scale = s0 + np.sum(increments**2, axis=0)
    state.sigma2 = np.atleast_1d(sample_inverse_gamma(shape, scale, rng))
    return state.sigma2


def init_state(data: SurveyDataset, config: DynamicConfig, rng: RngStream) -> ChainState:
    """z uniform, sigma2 from its prior, pi_tilde a random walk started at zero."""
    T, K = data.n_labels, config.K
    z = rng.generator.integers(K, size=data.n_respondents)
    sigma2 = np.atleast_1d(sample_inverse_gamma(config.v0, np.full(K, config.s0), rng))
    steps = rng.generator.normal(0.0, 1.0, size=(T, K)) * np.sqrt(sigma2)
    steps[0] = 0.0
    pi_tilde = np.cumsum(steps, axis=0)
    beta = [sample_dirichlet(e, rng) for e in config.eta]
    return ChainState(
        z=z, pi=softmax(pi_tilde, axis=1), beta=beta, pi_tilde=pi_tilde, sigma2=sigma2
    )


class DynamicSgldSampler(BaseSampler):
    """Sweep order z -> beta -> pi_tilde (SGLD) -> sigma2."""

    config: DynamicConfig

    def __init__(self, config: DynamicConfig):
        super().__init__(config)
        self.diagnostics = SgldDiagnostics()

    def validate_inputs(self, data: SurveyDataset) -> None:
        super().validate_inputs(data)
        if data.mode != "dynamic":
            raise InvalidModelConfiguration("Dynamic sampler needs a dataset in dynamic mode")

    def init_state(self, data: SurveyDataset, rng: RngStream) -> ChainState:
        return init_state(data, self.config, rng)

    def sweep(
        self, state: ChainState, data: SurveyDataset, rng: RngStream, r: int
    ) -> None:
        config = self.config
        step_z(state, data, rng)
        step_beta(state, data, config.eta, rng)
        step_pi_tilde_sgld(
            state,
            data,
            r,
            rng,
            config.schedule,
            batch_size=config.batch_size,
            diagnostics=self.diagnostics,
        )
        step_sigma(state, rng, config.v0, config.s0)


def run_dynamic(
    data: SurveyDataset, config: DynamicConfig, rng: RngStream, chain: int = 0
) -> tuple[PosteriorDraws, SgldDiagnostics]:
    """Run one dynamic chain; returns the draws and the SGLD diagnostics."""
    sampler = DynamicSgldSampler(config)
    draws = sampler.run(data, rng, chain=chain)
    return draws, sampler.diagnostics
