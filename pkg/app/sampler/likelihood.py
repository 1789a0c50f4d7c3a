import logging

import numpy as np
from scipy.special import logsumexp

from app.data.dataset import MISSING, SurveyDataset

logger = logging.getLogger(__name__)


def log_type_weights(
    data: SurveyDataset, pi: np.ndarray, beta: list[np.ndarray]
) -> np.ndarray:
    """
    N x K matrix of log pi[label_i, k] + sum_j log beta_j[k, x_ij].

    Responses dropped from the likelihood contribute no factor.
    """
    with np.errstate(divide="ignore"):
        weights = np.log(pi)[data.labels].copy()
        for j, b in enumerate(beta):
            column = data.responses[:, j]
            observed = column != MISSING
            weights[observed] += np.log(b).T[column[observed]]
    return weights


def observed_loglik(
    data: SurveyDataset, beta: list[np.ndarray], pi: np.ndarray
) -> float:
    """
    Observed-data log-likelihood with z marginalized:
    sum_i log sum_k pi[label_i, k] prod_j beta_j[k, x_ij].

    Returns -inf, and logs the offending respondents, when some respondent has
    zero likelihood.
    """
    per_respondent = logsumexp(log_type_weights(data, pi, beta), axis=1)
    zero = np.flatnonzero(np.isneginf(per_respondent))
    if zero.size:
        logger.warning(
            f"Zero likelihood for {zero.size} respondents, first at index {int(zero[0])}"
        )
        return float("-inf")
    return float(per_respondent.sum())
