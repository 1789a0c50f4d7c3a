"""Choosing K: counting rule, scree of the frequency matrix, approximated BIC."""

import logging
import math
from collections.abc import Callable
from fractions import Fraction

import numpy as np

from app.core.config import settings
from app.core.exceptions import InvalidModelConfiguration
from app.data.dataset import SurveyDataset
from app.data.frequency import FrequencyMatrix, frequency_matrix
from app.sampler.engine import EstimationEngine
from app.sampler.likelihood import observed_loglik
from app.sampler.state import PosteriorDraws
from app.schemas import SelectionReport
from app.utils.validators import validate_proportion

logger = logging.getLogger(__name__)

__all__ = [
    "bic",
    "count_parameters",
    "frequency_fit",
    "max_identifiable_k",
    "observed_loglik",
    "posterior_mean_params",
    "scree",
    "select_k",
    "suggest_k_scree",
]


def max_identifiable_k(G: int, J: int, L: int) -> int:
    """
    Largest K passing the counting rule G(L - J) >= K(L - J) + G(K - 1),
    i.e. floor(G - G(G - 1) / (L + G - J)), never below 1.

    Raises:
        InvalidModelConfiguration: If L <= J (no degrees of freedom) or G, J < 1
    """
    if G < 1 or J < 1:
        raise InvalidModelConfiguration(f"G and J must be >= 1, got G={G}, J={J}")
    if L <= J:
        raise InvalidModelConfiguration(
            f"L={L} must exceed J={J}", details={"G": G, "J": J, "L": L}
        )
    bound = Fraction(G) - Fraction(G * (G - 1), L + G - J)
    return max(1, math.floor(bound))


def scree(Y: FrequencyMatrix | np.ndarray) -> np.ndarray:
    """Eigenvalues of the G x G Gram matrix Y Y^T in descending order, clipped at 0."""
    counts = Y.counts if isinstance(Y, FrequencyMatrix) else np.asarray(Y)
    counts = np.atleast_2d(counts).astype(float)
    gram = counts @ counts.T
    eigenvalues = np.linalg.eigvalsh(gram)[::-1]
    return np.clip(eigenvalues, 0.0, None)


def suggest_k_scree(eigenvalues, threshold: float | None = None) -> int:
    """Smallest K whose leading eigenvalues explain at least `threshold` of the total."""
    threshold = settings.SCREE_THRESHOLD if threshold is None else threshold
    validate_proportion(threshold)
    values = np.asarray(eigenvalues, dtype=float)
    if values.size == 0:
        raise InvalidModelConfiguration("Empty eigenvalue list")
    total = values.sum()
    if total <= 0:
        return 1
    share = np.cumsum(values) / total
    # tolerance keeps exact ratios such as 9/10 from failing on rounding
    return int(np.argmax(share >= threshold - 1e-12)) + 1


def count_parameters(data: SurveyDataset, K: int, mode: str | None = None) -> int:
    """
    Free parameters: K * sum_j (L_j - 1) for beta, labels * (K - 1) for the
    mixture rows, plus K random-walk variances in dynamic mode.
    """
    mode = mode or data.mode
    n_params = K * sum(n - 1 for n in data.n_categories) + data.n_labels * (K - 1)
    if mode == "dynamic":
        n_params += K
    return n_params


def posterior_mean_params(draws: PosteriorDraws) -> tuple[list[np.ndarray], np.ndarray]:
    """Elementwise posterior means (beta, pi) of the snapshots."""
    if draws.n_snapshots == 0:
        raise InvalidModelConfiguration("No posterior draws to average")
    beta = [b.mean(axis=0) for b in draws.stacked_beta()]
    pi = draws.stacked_pi().mean(axis=0)
    return beta, pi


def bic(data: SurveyDataset, draws: PosteriorDraws, K: int | None = None) -> float:
    """
    Approximated BIC: -L(theta~) + p_K / 2 * log N, with theta~ the posterior
    mean and N the number of respondents. Lower is better.
    """
    K = draws.K if K is None else K
    beta, pi = posterior_mean_params(draws)
    loglik = observed_loglik(data, beta, pi)
    penalty = 0.5 * count_parameters(data, K, draws.mode) * math.log(data.n_respondents)
    return -loglik + penalty


def frequency_fit(
    data: SurveyDataset, pi: np.ndarray, beta: list[np.ndarray]
) -> tuple[np.ndarray, float]:
    """
    Factorisation view of the frequency matrix: Y_hat = diag(n_g) * pi * B with B
    the K x L stacked beta rows, n_g the observed respondents per label and
    question. Returns (Y_hat, ||Y - Y_hat||_F / ||Y||_F).
    """
    Y = frequency_matrix(data).counts.astype(float)
    blocks = []
    for j, b in enumerate(beta):
        answered = np.bincount(
            data.labels[data.responses[:, j] >= 0], minlength=data.n_labels
        ).astype(float)
        blocks.append(answered[:, None] * (pi @ b))
    Y_hat = np.hstack(blocks)
    norm = np.linalg.norm(Y)
    error = float(np.linalg.norm(Y - Y_hat) / norm) if norm > 0 else 0.0
    return Y_hat, error


def select_k(
    data: SurveyDataset,
    k_values: list[int],
    make_config: Callable[[int], object],
    seed: int,
    chains: int = 1,
    scree_threshold: float | None = None,
    engine: EstimationEngine | None = None,
) -> SelectionReport:
    """
    Counting rule, scree and BIC over a contiguous K range.

    Args:
        data: Survey dataset
        k_values: Contiguous candidate K values
        make_config: Builds the sampler config for a given K
        seed: Base seed shared by every K
        chains: Chains per K
        scree_threshold: Variance share for the scree suggestion
        engine: Chain runner (defaults to EstimationEngine())

    Returns:
        SelectionReport with recommended_k = BIC argmin
    """
    if not k_values:
        raise InvalidModelConfiguration("k-range must not be empty")
    engine = engine or EstimationEngine()
    scree_threshold = settings.SCREE_THRESHOLD if scree_threshold is None else scree_threshold

    G, J, L = data.n_labels, data.n_questions, data.total_categories
    k_bound = max_identifiable_k(G, J, L)
    eigenvalues = scree(frequency_matrix(data))
    k_scree = suggest_k_scree(eigenvalues, scree_threshold)

    warnings = []
    bic_by_k, loglik_by_k, params_by_k, error_by_k = {}, {}, {}, {}
    for K in k_values:
        if K > k_bound:
            message = f"K={K} exceeds the counting-rule bound {k_bound}"
            logger.warning(message)
            warnings.append(message)
        draws, _ = engine.run(data, make_config(K), seed=seed, chains=chains)
        beta, pi = posterior_mean_params(draws)
        loglik_by_k[K] = observed_loglik(data, beta, pi)
        params_by_k[K] = count_parameters(data, K, draws.mode)
        bic_by_k[K] = -loglik_by_k[K] + 0.5 * params_by_k[K] * math.log(data.n_respondents)
        error_by_k[K] = frequency_fit(data, pi, beta)[1]
        logger.info(f"K={K}: loglik={loglik_by_k[K]:.2f}, BIC={bic_by_k[K]:.2f}")

    recommended = min(bic_by_k, key=bic_by_k.get)
    scores = np.array([-bic_by_k[k] for k in k_values])
    weights = np.exp(scores - scores.max())
    weights /= weights.sum()

    return SelectionReport(
        G=G,
        J=J,
        L=L,
        k_max_counting=k_bound,
        eigenvalues=[float(v) for v in eigenvalues],
        scree_threshold=scree_threshold,
        k_scree=k_scree,
        bic_by_k=bic_by_k,
        loglik_by_k=loglik_by_k,
        params_by_k=params_by_k,
        weights_by_k={k: float(w) for k, w in zip(k_values, weights, strict=True)},
        frequency_error_by_k=error_by_k,
        recommended_k=recommended,
        scree_agrees=recommended == k_scree,
        warnings=warnings,
    )
