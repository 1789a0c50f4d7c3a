"""Posterior summaries, type-proportion series, Rao distances, label diagnostics and the ICS baseline."""

import logging
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings
from app.core.exceptions import DataValidationError, InvalidModelConfiguration
from app.data.dataset import SurveyDataset
from app.sampler.state import PosteriorDraws
from app.utils.validators import validate_proportion

logger = logging.getLogger(__name__)

ICS_BASE_PERIOD_VALUE = 6.7558
ICS_OFFSET = 2.0
ICS_QUESTIONS = 5
SWITCHING_THRESHOLD = 0.1


class PointEstimates(BaseModel):
    """Posterior means, equal-tailed intervals and membership probabilities (0-based types)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: str
    K: int
    level: float
    n_snapshots: int
    beta_mean: list[np.ndarray]
    beta_lower: list[np.ndarray]
    beta_upper: list[np.ndarray]
    pi_mean: np.ndarray
    pi_lower: np.ndarray
    pi_upper: np.ndarray
    memberships: np.ndarray = Field(..., description="N x K fraction of snapshots with z_i = k")

    def to_payload(self, question_names: list[str] | None = None) -> dict[str, Any]:
        names = question_names or [f"q{j + 1}" for j in range(len(self.beta_mean))]
        return {
            "mode": self.mode,
            "K": self.K,
            "level": self.level,
            "n_snapshots": self.n_snapshots,
            "pi": {
                "mean": self.pi_mean.tolist(),
                "lower": self.pi_lower.tolist(),
                "upper": self.pi_upper.tolist(),
            },
            "beta": {
                name: {"mean": m.tolist(), "lower": lo.tolist(), "upper": hi.tolist()}
                for name, m, lo, hi in zip(
                    names, self.beta_mean, self.beta_lower, self.beta_upper, strict=True
                )
            },
        }

    def membership_frame(self, ids: list[str]) -> pd.DataFrame:
        frame = pd.DataFrame(
            self.memberships, columns=[f"p_type{k + 1}" for k in range(self.K)]
        )
        frame.insert(0, "id", ids)
        return frame


def _interval(samples: np.ndarray, level: float) -> tuple[np.ndarray, np.ndarray]:
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(samples, [tail, 1.0 - tail], axis=0)
    return lower, upper


def membership_probabilities(draws: PosteriorDraws) -> np.ndarray:
    """N x K matrix p(z_i = k) estimated by snapshot frequencies."""
    z = draws.stacked_z()
    return np.stack([(z == k).mean(axis=0) for k in range(draws.K)], axis=1)


def summarize(draws: PosteriorDraws, level: float | None = None) -> PointEstimates:
    """
    Elementwise posterior means, equal-tailed credible intervals and membership
    frequencies.

    Raises:
        InvalidModelConfiguration: If there are no snapshots
    """
    level = validate_proportion(settings.CREDIBLE_LEVEL if level is None else level, "level")
    if draws.n_snapshots == 0:
        raise InvalidModelConfiguration("Cannot summarize an empty set of draws")

    betas = draws.stacked_beta()
    pi = draws.stacked_pi()
    beta_mean = [b.mean(axis=0) for b in betas]
    beta_bounds = [_interval(b, level) for b in betas]
    pi_lower, pi_upper = _interval(pi, level)
    pi_mean = pi.mean(axis=0)
    # a skewed marginal can put its mean outside the quantile band
    return PointEstimates(
        mode=draws.mode,
        K=draws.K,
        level=level,
        n_snapshots=draws.n_snapshots,
        beta_mean=beta_mean,
        beta_lower=[np.minimum(lo, m) for (lo, _), m in zip(beta_bounds, beta_mean, strict=True)],
        beta_upper=[np.maximum(hi, m) for (_, hi), m in zip(beta_bounds, beta_mean, strict=True)],
        pi_mean=pi_mean,
        pi_lower=np.minimum(pi_lower, pi_mean),
        pi_upper=np.maximum(pi_upper, pi_mean),
        memberships=membership_probabilities(draws),
    )


class TypeProportionSeries(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def to_frame(self, periods: list[str] | None = None) -> pd.DataFrame:
        T, K = self.mean.shape
        periods = periods or [str(t + 1) for t in range(T)]
        rows = [
            {
                "period": periods[t],
                "type": k + 1,
                "mean": self.mean[t, k],
                "lower": self.lower[t, k],
                "upper": self.upper[t, k],
            }
            for t in range(T)
            for k in range(K)
        ]
        return pd.DataFrame(rows, columns=["period", "type", "mean", "lower", "upper"])


def type_proportion_series(
    draws: PosteriorDraws, level: float | None = None
) -> TypeProportionSeries:
    """Posterior mean and equal-tailed band of pi[t, k] for every period and type."""
    if draws.mode != "dynamic":
        raise InvalidModelConfiguration("Type-proportion series need dynamic-mode draws")
    level = validate_proportion(settings.CREDIBLE_LEVEL if level is None else level, "level")
    pi = draws.stacked_pi()
    lower, upper = _interval(pi, level)
    return TypeProportionSeries(mean=pi.mean(axis=0), lower=lower, upper=upper, level=level)


def rao_distance(p, q) -> float:
    """
    Fisher-Rao distance between two multinomials: 2 * arccos(sum_v sqrt(p_v q_v)).

    Raises:
        InvalidModelConfiguration: If the vectors differ in length
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InvalidModelConfiguration(
            f"Rao distance needs two vectors of equal length, got {p.shape} and {q.shape}"
        )
    coefficient = np.clip(np.sum(np.sqrt(np.clip(p * q, 0.0, None))), 0.0, 1.0)
    return float(2.0 * np.arccos(coefficient))


def rank_questions_by_divergence(
    estimates: PointEstimates, k1: int, k2: int, question_names: list[str] | None = None
) -> list[tuple[str, float]]:
    """Questions ordered by descending Rao distance between types k1 and k2; ties keep input order."""
    if k1 == k2:
        raise InvalidModelConfiguration("k1 and k2 must differ")
    if not (0 <= k1 < estimates.K and 0 <= k2 < estimates.K):
        raise InvalidModelConfiguration(f"types must lie in 0..{estimates.K - 1}")
    names = question_names or [f"q{j + 1}" for j in range(len(estimates.beta_mean))]
    distances = [
        (name, rao_distance(beta[k1], beta[k2]))
        for name, beta in zip(names, estimates.beta_mean, strict=True)
    ]
    return sorted(distances, key=lambda item: -item[1])


def compute_ics(relative_scores) -> float:
    """
    Index of consumer sentiment from five relative scores
    X_j = %favorable - %unfavorable + 100, each rounded half-up to a whole number:
    sum_j round(X_j) / 6.7558 + 2.

    Raises:
        InvalidModelConfiguration: On wrong arity or scores outside [0, 200]
    """
    scores = np.asarray(relative_scores, dtype=float)
    if scores.shape != (ICS_QUESTIONS,):
        raise InvalidModelConfiguration(
            f"ICS needs {ICS_QUESTIONS} relative scores, got {scores.size}"
        )
    if np.any(scores < 0) or np.any(scores > 200):
        raise InvalidModelConfiguration("relative scores must lie in [0, 200]")
    rounded = np.floor(scores + 0.5)
    return float(rounded.sum()) / ICS_BASE_PERIOD_VALUE + ICS_OFFSET


def relative_scores(
    data: SurveyDataset,
    favorable: dict[str, list[str]],
    unfavorable: dict[str, list[str]],
) -> pd.DataFrame:
    """
    Per label and question, %favorable - %unfavorable + 100 over the answered responses.

    Args:
        data: Survey dataset
        favorable: Question name -> response codes counted as favorable
        unfavorable: Question name -> response codes counted as unfavorable

    Returns:
        DataFrame indexed by label value with one column per question in `favorable`
    """
    positions = {q.name: j for j, q in enumerate(data.questions)}
    columns = {}
    for name, good_codes in favorable.items():
        if name not in positions:
            raise DataValidationError(f"Unknown question '{name}'")
        j = positions[name]
        question = data.questions[j]
        good = [question.codes.index(c) for c in good_codes]
        bad = [question.codes.index(c) for c in unfavorable.get(name, [])]
        answers = data.responses[:, j]
        values = []
        for g in range(data.n_labels):
            row = answers[(data.labels == g) & (answers >= 0)]
            if row.size == 0:
                values.append(np.nan)
                continue
            share_good = np.isin(row, good).mean()
            share_bad = np.isin(row, bad).mean()
            values.append(100.0 * (share_good - share_bad) + 100.0)
        columns[name] = values
    return pd.DataFrame(columns, index=pd.Index(data.label_values, name=data.label_column))


def ics_series(
    data: SurveyDataset,
    favorable: dict[str, list[str]],
    unfavorable: dict[str, list[str]],
) -> pd.Series:
    """ICS per label computed from the microdata."""
    scores = relative_scores(data, favorable, unfavorable)
    return scores.apply(lambda row: compute_ics(row.to_numpy()), axis=1).rename("ics")


class AnchoringDiagnostic(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    question: int
    traces: np.ndarray = Field(..., description="S x K' diagonal masses beta[k, k]")
    off_diagonal_mean: np.ndarray
    crossing_fraction: np.ndarray
    switching_suspected: bool

    def to_frame(self) -> pd.DataFrame:
        S, K = self.traces.shape
        return pd.DataFrame(
            {
                "snapshot": np.repeat(np.arange(1, S + 1), K),
                "type": np.tile(np.arange(1, K + 1), S),
                "diagonal_mass": self.traces.reshape(-1),
            }
        )


def anchoring_diagnostic(draws: PosteriorDraws, question: int = 0) -> AnchoringDiagnostic:
    """
    Trace of beta^j[k, k] per snapshot for every anchored type.

    A crossing happens when another type puts more mass on category k than
    type k does; types that lose their anchor in more than a tenth of the
    snapshots are reported as suspected label switching (warning only).
    """
    betas = draws.stacked_beta()
    if not 0 <= question < len(betas):
        raise InvalidModelConfiguration(f"question index {question} out of range")
    beta = betas[question]
    S, K, L = beta.shape
    anchored = min(K, L)
    idx = np.arange(anchored)
    traces = beta[:, idx, idx]

    off_mask = np.ones((K, L), dtype=bool)
    off_mask[idx, idx] = False
    off_diagonal_mean = np.array(
        [beta[:, k, off_mask[k]].mean() if off_mask[k].any() else 0.0 for k in range(anchored)]
    )
    owners = beta[:, :, :anchored].argmax(axis=1)
    crossing = (owners != idx).mean(axis=0) if K > 1 else np.zeros(anchored)
    suspected = bool(np.any(crossing > SWITCHING_THRESHOLD))
    if suspected:
        logger.warning(
            f"Possible label switching on question {question + 1}: "
            f"crossing fractions {np.round(crossing, 3).tolist()}"
        )
    return AnchoringDiagnostic(
        question=question,
        traces=traces,
        off_diagonal_mean=off_diagonal_mean,
        crossing_fraction=crossing,
        switching_suspected=suspected,
    )
