import json

import numpy as np
import pytest

from app.data.dataset import QuestionMeta, SurveyDataset
from app.sampler.distributions import RngStream
from app.schemas import IngestSchema, QuestionSpec
from app.simulate import DESIGNS, draw_true_params, simulate_static

SURVEY_ROWS = [
    ("r1", "2020", "1", "a", "NA"),
    ("r2", "2020", "2", "b", "x"),
    ("r3", "2020", "3", "a", "y"),
    ("r4", "2021", "1", "c", "x"),
    ("r5", "2021", "2", "b", ""),
    ("r6", "2021", "1", "c", "y"),
]


@pytest.fixture
def rng():
    """Seeded random stream for tests."""
    return RngStream(12345)


@pytest.fixture
def survey_schema():
    """Three questions: ordinal, nominal and one with missing answers."""
    return IngestSchema(
        id_column="id",
        label_column="year",
        missing_code="NA",
        questions=[
            QuestionSpec(name="q1", categories=["1", "2", "3"]),
            QuestionSpec(name="q2", categories=["a", "b", "c"]),
            QuestionSpec(name="q3", categories=["x", "y"], missing_policy="drop-from-likelihood"),
        ],
    )


@pytest.fixture
def survey_files(tmp_path, survey_schema):
    """Write the sample survey CSV and its schema JSON; returns both paths."""
    csv_path = tmp_path / "survey.csv"
    lines = ["id,year,q1,q2,q3"] + [",".join(row) for row in SURVEY_ROWS]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(json.dumps(survey_schema.model_dump(mode="json")), encoding="utf-8")
    return csv_path, schema_path


@pytest.fixture
def tiny_dataset():
    """Two groups, two binary questions, no missing responses."""
    questions = [
        QuestionMeta(
            name=f"q{j + 1}",
            codes=["1", "2"],
            category_labels=["1", "2"],
            missing_policy="drop-from-likelihood",
        )
        for j in range(2)
    ]
    return SurveyDataset(
        ids=[str(i) for i in range(6)],
        questions=questions,
        responses=np.array([[0, 0], [0, 1], [1, 1], [1, 0], [0, 0], [1, 1]]),
        labels=np.array([0, 0, 0, 1, 1, 1]),
        label_values=["g1", "g2"],
    )


@pytest.fixture
def identified_truth():
    """True parameters of the identified design (G=5, J=4, L_j=5, K=3)."""
    return draw_true_params(DESIGNS["identified"], RngStream(2024))


@pytest.fixture
def identified_data(identified_truth):
    """Simulated identified-design survey with 200 respondents per group."""
    return simulate_static(identified_truth, 200, RngStream(2024, 1))
