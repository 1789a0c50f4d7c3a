import logging
import os
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.exceptions import (
    DataNotFoundError,
    FilePermissionError,
    InsufficientCategoriesError,
    SchemaError,
    UnknownCategoryError,
)
from app.data.dataset import MISSING, QuestionMeta, SurveyDataset
from app.schemas import IngestSchema

logger = logging.getLogger(__name__)


def _order_labels(values: pd.Series) -> list[str]:
    """Numeric labels sort numerically, anything else lexicographically."""
    unique = values.unique().tolist()
    try:
        return sorted(unique, key=float)
    except ValueError:
        return sorted(unique)


def _question_meta(spec, missing_code: str) -> QuestionMeta:
    codes = list(spec.categories)
    labels = list(spec.category_labels or spec.categories)
    if spec.missing_policy == "own-category":
        codes.append(missing_code)
        labels.append("missing")
    return QuestionMeta(
        name=spec.name,
        codes=codes,
        category_labels=labels,
        missing_policy=spec.missing_policy,
    )


def _encode_column(
    raw: pd.Series, meta: QuestionMeta, missing_code: str
) -> np.ndarray:
    mapping = {code: idx for idx, code in enumerate(meta.codes)}
    is_missing = raw.isin([missing_code, ""])
    if meta.missing_policy == "own-category":
        encoded = raw.where(~is_missing, missing_code).map(mapping)
    else:
        encoded = raw.map(mapping).where(~is_missing, MISSING)

    unknown = encoded.isna()
    if unknown.any():
        row = int(np.flatnonzero(unknown.to_numpy())[0])
        raise UnknownCategoryError(row=row + 1, column=meta.name, value=str(raw.iloc[row]))
    return encoded.to_numpy(dtype=np.int64)


def load_csv(path: str | Path, schema: IngestSchema) -> SurveyDataset:
    """
    Load and validate a survey CSV according to an ingest schema.

    Category indices follow the schema's declared code order, never the order of
    first appearance, so beta rows stay comparable across runs. Reported row
    numbers are 1-based data rows (the header is row 0).

    Args:
        path: CSV file with a header row and one respondent per row
        schema: Ingest schema naming id, label and question columns

    Returns:
        Validated SurveyDataset

    Raises:
        DataNotFoundError: If the file does not exist
        SchemaError: If a schema column is absent from the file
        UnknownCategoryError: If a value is not declared in the schema
        EmptyGroupError: If a declared label has no respondents
        InsufficientCategoriesError: If a question has fewer than 2 observed categories
    """
    file_path = Path(path)
    if not file_path.exists():
        raise DataNotFoundError(f"Survey file not found: {file_path}")
    if not os.access(file_path, os.R_OK):
        raise FilePermissionError(str(file_path))

    frame = pd.read_csv(file_path, dtype=str, keep_default_na=False)
    required = [schema.id_column, schema.label_column] + [q.name for q in schema.questions]
    missing_columns = [c for c in required if c not in frame.columns]
    if missing_columns:
        raise SchemaError(
            f"Columns missing from {file_path.name}: {missing_columns}",
            details={"columns": missing_columns},
        )

    label_raw = frame[schema.label_column]
    label_values = list(schema.label_values) if schema.label_values else _order_labels(label_raw)
    label_index = {value: idx for idx, value in enumerate(label_values)}
    labels = label_raw.map(label_index)
    if labels.isna().any():
        row = int(np.flatnonzero(labels.isna().to_numpy())[0])
        raise UnknownCategoryError(
            row=row + 1, column=schema.label_column, value=str(label_raw.iloc[row])
        )

    questions = [_question_meta(q, schema.missing_code) for q in schema.questions]
    columns = []
    for meta in questions:
        encoded = _encode_column(frame[meta.name], meta, schema.missing_code)
        observed = np.unique(encoded[encoded != MISSING])
        if observed.size < 2:
            raise InsufficientCategoriesError(meta.name, int(observed.size))
        columns.append(encoded)

    responses = (
        np.column_stack(columns) if columns else np.empty((len(frame), 0), dtype=np.int64)
    )
    dataset = SurveyDataset(
        ids=frame[schema.id_column].tolist(),
        questions=questions,
        responses=responses,
        labels=labels.to_numpy(dtype=np.int64),
        label_values=label_values,
        mode=schema.mode,
        id_column=schema.id_column,
        label_column=schema.label_column,
        missing_code=schema.missing_code,
    )
    logger.info(
        f"Loaded {dataset.n_respondents} respondents, {dataset.n_questions} questions, "
        f"{dataset.n_labels} {'groups' if schema.mode == 'static' else 'periods'} from {file_path.name}"
    )
    return dataset


def write_csv(data: SurveyDataset, path: str | Path) -> Path:
    """
    Write a dataset back to CSV using its original codes and column names.

    Blank cells were read as missing and come back as data.missing_code, so a
    file that used blanks is normalised rather than reproduced byte for byte.
    """
    file_path = Path(path)
    frame = pd.DataFrame(
        {
            data.id_column: data.ids,
            data.label_column: [data.label_values[g] for g in data.labels],
        }
    )
    for j, question in enumerate(data.questions):
        codes = np.array(question.codes + [data.missing_code], dtype=object)
        # MISSING (-1) indexes the appended missing code
        frame[question.name] = codes[data.responses[:, j]]
    frame.to_csv(file_path, index=False)
    return file_path
