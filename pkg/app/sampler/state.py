import logging
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import SamplerError
from app.schemas import Mode

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-10


class ChainState(BaseModel):
    """
    Current values of one chain: assignments z, mixture rows pi, response
    distributions beta, and in dynamic mode the logits pi_tilde and variances sigma2.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray
    pi: np.ndarray
    beta: list[np.ndarray]
    pi_tilde: np.ndarray | None = None
    sigma2: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.pi.shape[1]

    def copy(self) -> "ChainState":
        return ChainState(
            z=self.z.copy(),
            pi=self.pi.copy(),
            beta=[b.copy() for b in self.beta],
            pi_tilde=None if self.pi_tilde is None else self.pi_tilde.copy(),
            sigma2=None if self.sigma2 is None else self.sigma2.copy(),
        )

    def check_invariants(self) -> None:
        """Raise SamplerError if a row left the simplex or an index is out of range."""
        if not np.allclose(self.pi.sum(axis=1), 1.0, atol=SIMPLEX_TOLERANCE):
            raise SamplerError("pi rows are off the simplex")
        for j, b in enumerate(self.beta):
            if not np.allclose(b.sum(axis=1), 1.0, atol=SIMPLEX_TOLERANCE):
                raise SamplerError(f"beta rows of question {j} are off the simplex")
        if self.z.size and (self.z.min() < 0 or self.z.max() >= self.K):
            raise SamplerError("z outside 0..K-1")
        if self.sigma2 is not None and np.any(self.sigma2 <= 0):
            raise SamplerError("sigma2 must be positive")


class PosteriorDraws(BaseModel):
    """Thinned post-burn-in snapshots plus the metadata needed to reproduce them."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: Mode
    K: int
    snapshots: list[ChainState] = Field(default_factory=list)
    iterations: list[int] = Field(default_factory=list)
    loglik: list[float] = Field(default_factory=list)
    chains: list[int] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)
    rng: list[dict[str, int]] = Field(default_factory=list)

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshots)

    def record(self, state: ChainState, iteration: int, loglik: float, chain: int = 0):
        self.snapshots.append(state.copy())
        self.iterations.append(iteration)
        self.loglik.append(float(loglik))
        self.chains.append(chain)

    def stacked_pi(self) -> np.ndarray:
        return np.stack([s.pi for s in self.snapshots])

    def stacked_beta(self) -> list[np.ndarray]:
        n_questions = len(self.snapshots[0].beta)
        return [np.stack([s.beta[j] for s in self.snapshots]) for j in range(n_questions)]

    def stacked_z(self) -> np.ndarray:
        return np.stack([s.z for s in self.snapshots])

    def stacked_pi_tilde(self) -> np.ndarray:
        return np.stack([s.pi_tilde for s in self.snapshots])

    def stacked_sigma2(self) -> np.ndarray:
        return np.stack([s.sigma2 for s in self.snapshots])


def merge_draws(draws: list[PosteriorDraws]) -> PosteriorDraws:
    """Concatenate independent chains; chain ids are kept per snapshot."""
    if not draws:
        raise SamplerError("No chains to merge")
    first = draws[0]
    merged = PosteriorDraws(mode=first.mode, K=first.K, config=first.config)
    for d in draws:
        if d.K != first.K or d.mode != first.mode:
            raise SamplerError("Cannot merge chains with different K or mode")
        merged.snapshots.extend(d.snapshots)
        merged.iterations.extend(d.iterations)
        merged.loglik.extend(d.loglik)
        merged.chains.extend(d.chains)
        merged.rng.extend(d.rng)
    return merged
