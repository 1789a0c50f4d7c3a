import logging

import numpy as np

from app.core.exceptions import InvalidModelConfiguration
from app.data.dataset import SurveyDataset
from app.sampler.base import BaseSampler, step_beta, step_z
from app.sampler.distributions import RngStream, sample_dirichlet
from app.sampler.state import ChainState, PosteriorDraws
from app.schemas import StaticConfig

logger = logging.getLogger(__name__)


def group_counts(data: SurveyDataset, z: np.ndarray, K: int) -> np.ndarray:
    """G x K counts C[g, k] = #{i : z_i = k, d_i = g}."""
    flat = data.labels * K + z
    return np.bincount(flat, minlength=data.n_labels * K).reshape(data.n_labels, K)


def step_pi(
    state: ChainState, data: SurveyDataset, alpha: np.ndarray, rng: RngStream
) -> np.ndarray:
    """Draw pi[g, :] ~ Dirichlet(alpha[g, :] + C[g, :]) for every group."""
    state.pi = sample_dirichlet(alpha + group_counts(data, state.z, state.K), rng)
    return state.pi


def init_state(data: SurveyDataset, config: StaticConfig, rng: RngStream) -> ChainState:
    """z uniform on the K types; pi and beta rows drawn from their Dirichlet priors."""
    z = rng.generator.integers(config.K, size=data.n_respondents)
    pi = sample_dirichlet(config.alpha, rng)
    beta = [sample_dirichlet(e, rng) for e in config.eta]
    return ChainState(z=z, pi=pi, beta=beta)


class StaticGibbsSampler(BaseSampler):
    """Gibbs sampler for the static model; sweep order z -> beta -> pi."""

    config: StaticConfig

    def validate_inputs(self, data: SurveyDataset) -> None:
        super().validate_inputs(data)
        if self.config.alpha.shape[0] != data.n_labels:
            raise InvalidModelConfiguration(
                f"alpha has {self.config.alpha.shape[0]} rows for {data.n_labels} groups"
            )

    def init_state(self, data: SurveyDataset, rng: RngStream) -> ChainState:
        return init_state(data, self.config, rng)

    def sweep(
        self, state: ChainState, data: SurveyDataset, rng: RngStream, r: int
    ) -> None:
        step_z(state, data, rng)
        step_beta(state, data, self.config.eta, rng)
        step_pi(state, data, self.config.alpha, rng)


def run_gibbs(
    data: SurveyDataset, config: StaticConfig, rng: RngStream, chain: int = 0
) -> PosteriorDraws:
    """Run one static Gibbs chain and return its thinned post-burn-in draws."""
    return StaticGibbsSampler(config).run(data, rng, chain=chain)
