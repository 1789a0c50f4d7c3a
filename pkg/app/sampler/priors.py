import logging

import numpy as np

from app.core.config import settings
from app.data.dataset import SurveyDataset

logger = logging.getLogger(__name__)


def anchored_eta(
    n_categories: int, K: int, eta_diag: float, eta_off: float
) -> tuple[np.ndarray, bool]:
    """
    K x L Dirichlet parameters tying type k to category k.

    Returns:
        Tuple of (eta, truncated) where truncated is True when K > L and the
        surplus types get an all-eta_off row
    """
    eta = np.full((K, n_categories), eta_off, dtype=float)
    anchored = min(K, n_categories)
    eta[np.arange(anchored), np.arange(anchored)] = eta_diag
    return eta, K > n_categories


def default_priors(
    data: SurveyDataset,
    K: int,
    eta_diag: float | None = None,
    eta_off: float | None = None,
    alpha: float | None = None,
) -> tuple[np.ndarray, list[np.ndarray], list[str]]:
    """
    Label-anchoring priors: alpha = 1 everywhere, eta[k, v] = 10 if v == k else 1.

    Args:
        data: Survey dataset supplying label count and per-question categories
        K: Number of belief types
        eta_diag: Anchor value (default settings.ETA_DIAG)
        eta_off: Off-anchor value (default settings.ETA_OFF)
        alpha: Mixture Dirichlet value (default settings.ALPHA)

    Returns:
        Tuple of (alpha labels x K, eta per question K x L_j, warnings)
    """
    eta_diag = settings.ETA_DIAG if eta_diag is None else eta_diag
    eta_off = settings.ETA_OFF if eta_off is None else eta_off
    alpha_value = settings.ALPHA if alpha is None else alpha

    alpha_matrix = np.full((data.n_labels, K), alpha_value, dtype=float)
    etas = []
    warnings = []
    for question in data.questions:
        eta, truncated = anchored_eta(question.n_categories, K, eta_diag, eta_off)
        if truncated:
            message = (
                f"K={K} exceeds the {question.n_categories} categories of question "
                f"'{question.name}'; types {question.n_categories + 1}..{K} are not anchored on it"
            )
            logger.warning(message)
            warnings.append(message)
        etas.append(eta)
    return alpha_matrix, etas, warnings
