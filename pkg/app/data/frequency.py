import logging

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.data.dataset import MISSING, SurveyDataset
from app.utils.validators import validate_proportion

logger = logging.getLogger(__name__)


class FrequencyMatrix(BaseModel):
    """G x L contingency table of responses by label, L = sum_j L_j."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    counts: np.ndarray
    column_index: dict[tuple[int, int], int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


class RareResponse(BaseModel):
    question: str
    category: str
    frequency: float


def column_offsets(data: SurveyDataset) -> np.ndarray:
    """First column of each question in the stacked L-wide layout."""
    return np.concatenate([[0], np.cumsum(data.n_categories)[:-1]]).astype(np.int64)


def frequency_matrix(data: SurveyDataset) -> FrequencyMatrix:
    """
    Count responses by label: counts[g, col(j, v)] = #{i : d_i = g, x_ij = v}.

    Responses dropped from the likelihood are excluded; under own-category policy
    the missing category is an ordinary column.
    """
    offsets = column_offsets(data)
    n_cols = data.total_categories
    counts = np.zeros((data.n_labels, n_cols), dtype=np.int64)

    for j in range(data.n_questions):
        column = data.responses[:, j]
        observed = column != MISSING
        flat = data.labels[observed] * n_cols + offsets[j] + column[observed]
        counts += np.bincount(flat, minlength=data.n_labels * n_cols).reshape(
            data.n_labels, n_cols
        )

    column_index = {
        (j, v): int(offsets[j] + v)
        for j, n_cat in enumerate(data.n_categories)
        for v in range(n_cat)
    }
    return FrequencyMatrix(counts=counts, column_index=column_index)


def rare_response_report(data: SurveyDataset, threshold: float) -> list[RareResponse]:
    """
    List every (question, category) whose sample frequency falls below threshold.

    The frequency of category v of question j is its count over the number of
    non-missing responses to j. The designated missing category is never reported.
    """
    validate_proportion(threshold)
    report = []
    for j, question in enumerate(data.questions):
        column = data.responses[:, j]
        observed = column[column != MISSING]
        if observed.size == 0:
            continue
        freq = np.bincount(observed, minlength=question.n_categories) / observed.size
        for v in np.flatnonzero(freq < threshold):
            if v == question.missing_category:
                continue
            report.append(
                RareResponse(
                    question=question.name,
                    category=question.codes[v],
                    frequency=float(freq[v]),
                )
            )
    if report:
        logger.warning(
            f"{len(report)} responses below frequency {threshold}; consider merging or dropping"
        )
    return report
