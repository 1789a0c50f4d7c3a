import logging
from abc import ABC, abstractmethod

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from app.core.config import settings
from app.core.exceptions import InvalidModelConfiguration, NumericalFaultError, SamplerError
from app.data.dataset import MISSING, SurveyDataset
from app.sampler.distributions import (
    RngStream,
    sample_categorical_rows,
    sample_dirichlet,
)
from app.sampler.likelihood import log_type_weights, observed_loglik
from app.sampler.state import ChainState, PosteriorDraws

logger = logging.getLogger(__name__)


def step_z(state: ChainState, data: SurveyDataset, rng: RngStream) -> np.ndarray:
    """
    Resample every z_i with P(z_i = k) proportional to pi[label_i, k] * prod_j beta_j[k, x_ij].

    Products are accumulated in log space. In dynamic mode the labels are
    periods, so the same update uses pi[s_i].

    Raises:
        NumericalFaultError: If every type has zero weight for some respondent
    """
    log_w = log_type_weights(data, state.pi, state.beta)
    log_norm = logsumexp(log_w, axis=1, keepdims=True)
    dead = np.flatnonzero(~np.isfinite(log_norm[:, 0]))
    if dead.size:
        raise NumericalFaultError(
            f"All type weights vanish for respondent {int(dead[0])}",
            details={"respondent": int(dead[0])},
        )
    state.z = sample_categorical_rows(np.exp(log_w - log_norm), rng)
    return state.z


def response_counts(data: SurveyDataset, z: np.ndarray, K: int) -> list[np.ndarray]:
    """Per question K x L_j counts C[k, v] = #{i : z_i = k, x_ij = v}."""
    counts = []
    for j, n_cat in enumerate(data.n_categories):
        column = data.responses[:, j]
        observed = column != MISSING
        flat = z[observed] * n_cat + column[observed]
        counts.append(np.bincount(flat, minlength=K * n_cat).reshape(K, n_cat))
    return counts


def step_beta(
    state: ChainState, data: SurveyDataset, eta: list[np.ndarray], rng: RngStream
) -> list[np.ndarray]:
    """Draw beta_j[k, :] ~ Dirichlet(eta_j[k, :] + C_j[k, :]) for every question and type."""
    counts = response_counts(data, state.z, state.K)
    state.beta = [sample_dirichlet(e + c, rng) for e, c in zip(eta, counts, strict=True)]
    return state.beta


class BaseSampler(ABC):
    """Shared sweep loop; subclasses define initialisation and one full sweep."""

    def __init__(self, config):
        self.config = config

    @abstractmethod
    def init_state(self, data: SurveyDataset, rng: RngStream) -> ChainState:
        """
        Draw a starting state from the priors.

        Args:
            data: Survey dataset
            rng: Random stream owned by this chain

        Returns:
            Initial ChainState
        """
        pass

    @abstractmethod
    def sweep(
        self, state: ChainState, data: SurveyDataset, rng: RngStream, r: int
    ) -> None:
        """Advance the state by one full sweep (iteration r, 1-based)."""
        pass

    def validate_inputs(self, data: SurveyDataset) -> None:
        if len(self.config.eta) != data.n_questions:
            raise InvalidModelConfiguration(
                f"eta has {len(self.config.eta)} blocks for {data.n_questions} questions"
            )
        for j, (e, n_cat) in enumerate(zip(self.config.eta, data.n_categories, strict=True)):
            if e.shape[1] != n_cat:
                raise InvalidModelConfiguration(
                    f"eta[{j}] has {e.shape[1]} columns, question has {n_cat} categories"
                )

    def run(self, data: SurveyDataset, rng: RngStream, chain: int = 0) -> PosteriorDraws:
        """
        Run `iterations` sweeps and keep thinned post-burn-in snapshots.

        Snapshots are taken after sweep r when r > burn_in and
        (r - burn_in) is a multiple of thin, giving
        floor((iterations - burn_in) / thin) snapshots.
        """
        self.validate_inputs(data)
        config = self.config
        state = self.init_state(data, rng)
        draws = PosteriorDraws(
            mode=config.mode, K=config.K, config=config.echo(), rng=[rng.metadata()]
        )

        iterations = tqdm(
            range(1, config.iterations + 1),
            desc=f"{config.mode} chain {chain}",
            disable=not settings.SHOW_PROGRESS,
        )
        for r in iterations:
            try:
                self.sweep(state, data, rng, r)
            except SamplerError as e:
                e.details["iteration"] = r
                e.message = f"{e.message} (iteration {r})"
                logger.error(f"Sampler failed at iteration {r}: {e.message}")
                raise

            if r > config.burn_in and (r - config.burn_in) % config.thin == 0:
                draws.record(state, r, observed_loglik(data, state.beta, state.pi), chain)

        logger.info(
            f"Chain {chain} finished: {config.iterations} sweeps, {draws.n_snapshots} snapshots"
        )
        return draws
