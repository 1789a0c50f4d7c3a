"""Synthetic survey data drawn from the static and dynamic generative processes."""

import logging
from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import InvalidModelConfiguration
from app.data.dataset import QuestionMeta, SurveyDataset
from app.sampler.distributions import (
    RngStream,
    sample_categorical_rows,
    sample_dirichlet,
    softmax,
)
from app.sampler.priors import anchored_eta
from app.schemas import Mode
from app.utils.validators import validate_simplex_rows

logger = logging.getLogger(__name__)


TruthShape = Literal["anchored", "off_anchor"]


class Design(BaseModel):
    """
    Simulation dimensions (labels G, questions J, categories per question, types K)
    and the shape of the true beta rows.

    "anchored" rows lean type k on category k, question 1 with strength
    lead_eta_diag and the rest with the estimation anchor. "off_anchor" rows
    share their first K entries across types and differ only on the remaining
    categories, so the anchoring prior cannot tell the types apart.
    """

    model_config = ConfigDict(frozen=True)

    G: int = Field(..., ge=1)
    J: int = Field(..., ge=1)
    n_categories: int = Field(..., ge=2)
    K: int = Field(..., ge=1)
    truth: TruthShape = "anchored"
    lead_eta_diag: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def validate_truth(self) -> "Design":
        if self.truth == "off_anchor" and self.n_categories < 2 * self.K:
            raise ValueError(
                f"off_anchor truth needs at least {2 * self.K} categories, got {self.n_categories}"
            )
        return self

    @property
    def L(self) -> int:
        return self.J * self.n_categories


DESIGNS: dict[str, Design] = {
    # counting-rule bound 4 >= K; a weak lead anchor leaves question 1 to the data
    "identified": Design(G=5, J=4, n_categories=5, K=3, lead_eta_diag=2.0),
    # counting-rule bound 1 < K; group shares only slide beta along a line
    "under_identified": Design(G=2, J=1, n_categories=4, K=2, truth="off_anchor"),
}


class TrueParams(BaseModel):
    """Data-generating values; pi_true has one row per group or period."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    pi_true: np.ndarray
    beta_true: list[np.ndarray]
    pi_tilde: np.ndarray | None = None
    sigma2: np.ndarray | None = None

    @model_validator(mode="after")
    def validate_params(self) -> "TrueParams":
        self.pi_true = validate_simplex_rows(np.atleast_2d(self.pi_true), "pi_true")
        self.beta_true = [
            validate_simplex_rows(np.atleast_2d(b), f"beta_true[{j}]")
            for j, b in enumerate(self.beta_true)
        ]
        K = self.pi_true.shape[1]
        for j, b in enumerate(self.beta_true):
            if b.shape[0] != K:
                raise ValueError(f"beta_true[{j}] has {b.shape[0]} rows, expected K={K}")
        return self

    @property
    def K(self) -> int:
        return self.pi_true.shape[1]

    @property
    def n_labels(self) -> int:
        return self.pi_true.shape[0]

    @property
    def n_categories(self) -> list[int]:
        return [b.shape[1] for b in self.beta_true]


def _anchored_rows(
    n_categories: int, K: int, eta_diag: float, eta_off: float, rng: RngStream
) -> np.ndarray:
    return sample_dirichlet(anchored_eta(n_categories, K, eta_diag, eta_off)[0], rng)


def _off_anchor_rows(
    n_categories: int, K: int, eta_diag: float, eta_off: float, rng: RngStream
) -> np.ndarray:
    # shared head on the anchor categories, type k's tail leans on category K + k
    head = sample_dirichlet(np.ones(n_categories), rng)[:K]
    tail = sample_dirichlet(anchored_eta(n_categories - K, K, eta_diag, eta_off)[0], rng)
    return np.column_stack([np.tile(head, (K, 1)), tail * (1.0 - head.sum())])


def draw_true_params(
    design: Design,
    rng: RngStream,
    eta_diag: float = 10.0,
    eta_off: float = 1.0,
    alpha: float = 1.0,
) -> TrueParams:
    """
    pi rows from Dirichlet(alpha) and beta rows in the design's truth shape.

    Anchored truth lines posterior types up with the true ones without
    relabeling; off-anchor truth leaves the labels to chance.
    """
    pi = sample_dirichlet(np.full((design.G, design.K), alpha), rng)
    rows = _off_anchor_rows if design.truth == "off_anchor" else _anchored_rows
    beta = [
        rows(
            design.n_categories,
            design.K,
            design.lead_eta_diag if j == 0 and design.truth == "anchored" else eta_diag,
            eta_off,
            rng,
        )
        for j in range(design.J)
    ]
    return TrueParams(pi_true=pi, beta_true=beta)

def _questions(n_categories: list[int]) -> list[QuestionMeta]:
    return [
        QuestionMeta(
            name=f"q{j + 1}",
            codes=[str(v + 1) for v in range(L)],
            category_labels=[str(v + 1) for v in range(L)],
            missing_policy="drop-from-likelihood",
        )
        for j, L in enumerate(n_categories)
    ]


def _sizes(n_per_group: int | Sequence[int], n_labels: int) -> np.ndarray:
    sizes = np.full(n_labels, n_per_group) if np.isscalar(n_per_group) else np.asarray(n_per_group)
    if sizes.shape != (n_labels,) or np.any(sizes < 1):
        raise InvalidModelConfiguration(
            f"Need a positive respondent count for each of {n_labels} labels, got {sizes.tolist()}"
        )
    return sizes.astype(int)


def simulate_static(
    params: TrueParams,
    n_per_group: int | Sequence[int],
    rng: RngStream,
    mode: Mode = "static",
) -> SurveyDataset:
    """
    For each respondent draw z from pi[g] and then every answer x_ij from beta^j[z].

    Args:
        params: True pi (labels x K) and beta (per question K x L_j)
        n_per_group: Respondents per label, scalar or one count per label
        rng: Random stream
        mode: Dataset mode; "dynamic" treats the rows of pi as periods

    Returns:
        SurveyDataset with 1-based string codes and labels
    """
    sizes = _sizes(n_per_group, params.n_labels)
    labels = np.repeat(np.arange(params.n_labels), sizes)
    z = sample_categorical_rows(params.pi_true[labels], rng)
    responses = np.column_stack(
        [sample_categorical_rows(beta[z], rng) for beta in params.beta_true]
    )
    return SurveyDataset(
        ids=[str(i + 1) for i in range(labels.size)],
        questions=_questions(params.n_categories),
        responses=responses,
        labels=labels,
        label_values=[str(g + 1) for g in range(params.n_labels)],
        mode=mode,
    )


def random_walk_logits(
    T: int, K: int, sigma2: np.ndarray | float, rng: RngStream, start: np.ndarray | None = None
) -> np.ndarray:
    """T x K Gaussian random walk pi_tilde[t] = pi_tilde[t-1] + Normal(0, sigma2)."""
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (K,))
    if np.any(sigma2 < 0):
        raise InvalidModelConfiguration("sigma2 must be non-negative")
    steps = rng.generator.normal(0.0, 1.0, size=(T, K)) * np.sqrt(sigma2)
    steps[0] = np.zeros(K) if start is None else start
    return np.cumsum(steps, axis=0)


def simulate_dynamic(
    params: TrueParams,
    n_per_period: int | Sequence[int],
    sigma2_true: np.ndarray | float,
    rng: RngStream,
    T: int | None = None,
) -> tuple[SurveyDataset, TrueParams]:
    """
    Logit paths from a random walk with variance sigma2_true, pi by softmax,
    then responses per period as in simulate_static. The first row of
    params.pi_true sets the starting point; T defaults to its number of rows.

    Returns:
        Tuple of (dataset in dynamic mode, params with the realised pi path)
    """
    T = params.n_labels if T is None else T
    start = np.log(np.clip(params.pi_true[0], 1e-300, None))
    pi_tilde = random_walk_logits(T, params.K, sigma2_true, rng, start=start)
    realised = TrueParams(
        pi_true=softmax(pi_tilde, axis=1),
        beta_true=params.beta_true,
        pi_tilde=pi_tilde,
        sigma2=np.broadcast_to(np.asarray(sigma2_true, dtype=float), (params.K,)).copy(),
    )
    data = simulate_static(realised, n_per_period, rng, mode="dynamic")
    logger.debug(f"Simulated {T} periods, {data.n_respondents} respondents")
    return data, realised
