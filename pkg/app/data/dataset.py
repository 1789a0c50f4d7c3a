import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import DataValidationError, EmptyGroupError
from app.schemas import IngestSchema, MissingPolicy, Mode, QuestionSpec

logger = logging.getLogger(__name__)

MISSING = -1


class QuestionMeta(BaseModel):
    """One categorical question; codes are the raw CSV values in index order."""

    model_config = ConfigDict(frozen=True)

    name: str
    codes: list[str]
    category_labels: list[str]
    missing_policy: MissingPolicy = "own-category"

    @model_validator(mode="after")
    def validate_categories(self) -> "QuestionMeta":
        if len(self.codes) < 2:
            raise ValueError(f"Question '{self.name}' needs at least 2 categories")
        if len(self.category_labels) != len(self.codes):
            raise ValueError(
                f"Question '{self.name}': category_labels has length "
                f"{len(self.category_labels)}, expected {len(self.codes)}"
            )
        return self

    @property
    def n_categories(self) -> int:
        return len(self.codes)

    @property
    def missing_category(self) -> int | None:
        """Index of the designated missing category under own-category policy."""
        return self.n_categories - 1 if self.missing_policy == "own-category" else None


class SurveyDataset(BaseModel):
    """
    N respondents x J categorical questions plus a group (static) or period
    (dynamic) label. Category and label indices are 0-based; MISSING (-1) marks
    a response dropped from the likelihood.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ids: list[str]
    questions: list[QuestionMeta] = Field(..., min_length=1)
    responses: np.ndarray
    labels: np.ndarray
    label_values: list[str]
    mode: Mode = "static"
    id_column: str = "id"
    label_column: str = "label"
    missing_code: str = "NA"

    @model_validator(mode="after")
    def validate_dataset(self) -> "SurveyDataset":
        responses = np.asarray(self.responses, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.ids)

        if responses.ndim != 2 or responses.shape != (n, len(self.questions)):
            raise DataValidationError(
                f"responses shape {responses.shape} does not match "
                f"{n} respondents x {len(self.questions)} questions"
            )
        if labels.shape != (n,):
            raise DataValidationError(f"labels shape {labels.shape}, expected ({n},)")

        for j, question in enumerate(self.questions):
            column = responses[:, j]
            bad = (column >= question.n_categories) | (column < MISSING)
            if question.missing_policy == "own-category":
                bad |= column == MISSING
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise DataValidationError(
                    f"Response {int(column[row])} out of range for question '{question.name}'",
                    details={"row": row, "column": question.name},
                )

        n_labels = len(self.label_values)
        if n and (labels.min() < 0 or labels.max() >= n_labels):
            raise DataValidationError(f"labels must lie in 0..{n_labels - 1}")
        counts = np.bincount(labels, minlength=n_labels)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise EmptyGroupError(self.label_values[int(empty[0])])

        responses.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "labels", labels)
        return self

    @property
    def n_respondents(self) -> int:
        return len(self.ids)

    @property
    def n_questions(self) -> int:
        return len(self.questions)

    @property
    def n_labels(self) -> int:
        return len(self.label_values)

    @property
    def n_categories(self) -> list[int]:
        return [q.n_categories for q in self.questions]

    @property
    def total_categories(self) -> int:
        return sum(self.n_categories)

    @property
    def label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_labels)

    def observed_mask(self) -> np.ndarray:
        return self.responses != MISSING

    def to_schema(self) -> IngestSchema:
        """Ingest schema that reloads this dataset with identical indexing."""
        questions = []
        for q in self.questions:
            codes = q.codes[:-1] if q.missing_policy == "own-category" else q.codes
            labels = (
                q.category_labels[:-1]
                if q.missing_policy == "own-category"
                else q.category_labels
            )
            questions.append(
                QuestionSpec(
                    name=q.name,
                    categories=list(codes),
                    category_labels=list(labels),
                    missing_policy=q.missing_policy,
                )
            )
        return IngestSchema(
            id_column=self.id_column,
            label_column=self.label_column,
            mode=self.mode,
            missing_code=self.missing_code,
            label_values=list(self.label_values),
            questions=questions,
        )

    def subset(self, rows: np.ndarray) -> "SurveyDataset":
        """Dataset restricted to the given respondent rows (labels must stay non-empty)."""
        rows = np.asarray(rows)
        return SurveyDataset(
            ids=[self.ids[i] for i in rows],
            questions=self.questions,
            responses=self.responses[rows].copy(),
            labels=self.labels[rows].copy(),
            label_values=self.label_values,
            mode=self.mode,
            id_column=self.id_column,
            label_column=self.label_column,
            missing_code=self.missing_code,
        )
