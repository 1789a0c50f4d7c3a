import json
import logging

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.config import settings
from app.schemas import (
    DynamicConfig,
    ErrorPayload,
    IngestSchema,
    QuestionSpec,
    RecoveryPoint,
    SelectionReport,
    SgldSchedule,
    StaticConfig,
)

logger = logging.getLogger(__name__)


def _report(**overrides):
    values = dict(
        G=2, J=2, L=4, k_max_counting=1, eigenvalues=[18.0, 2.0], scree_threshold=0.9,
        k_scree=1, bic_by_k={1: 10.0, 2: 12.0}, recommended_k=1,
    )
    values.update(overrides)
    return SelectionReport(**values)


def test_question_spec_valid():
    """Test QuestionSpec defaults to own-category missingness"""
    question = QuestionSpec(name="q1", categories=["1", "2", "3"])
    assert question.missing_policy == "own-category"
    assert question.category_labels is None


def test_question_spec_duplicate_codes():
    """Test duplicate category codes are rejected"""
    with pytest.raises(ValidationError, match="Duplicate category codes"):
        QuestionSpec(name="q1", categories=["1", "1"])


def test_question_spec_label_count():
    """Test category labels must match the codes one to one"""
    with pytest.raises(ValidationError):
        QuestionSpec(name="q1", categories=["1", "2"], category_labels=["good"])


def test_ingest_schema_duplicate_questions():
    """Test question names must be unique"""
    with pytest.raises(ValidationError, match="Duplicate question names"):
        IngestSchema(
            questions=[QuestionSpec(name="q", categories=["a"]), QuestionSpec(name="q", categories=["b"])]
        )


def test_ingest_schema_from_json(survey_files):
    """Test the schema file written by the fixture loads back"""
    _, schema_path = survey_files
    schema = IngestSchema.from_json(schema_path)

    assert schema.label_column == "year"
    assert [q.name for q in schema.questions] == ["q1", "q2", "q3"]
    assert json.loads(schema_path.read_text())["missing_code"] == "NA"


def test_ingest_schema_missing_code_from_settings(mocker):
    """Test an omitted missing code falls back to the MISSING_CODE setting"""
    mocker.patch.object(settings, "MISSING_CODE", "-9")

    schema = IngestSchema(questions=[QuestionSpec(name="q1", categories=["1", "2"])])

    assert schema.missing_code == "-9"
    assert IngestSchema(missing_code="99", questions=schema.questions).missing_code == "99"


def test_error_payload_defaults():
    """Test the CLI error shape defaults details to an empty dict"""
    payload = ErrorPayload(error="DataNotFoundError", message="gone")

    assert payload.model_dump() == {"error": "DataNotFoundError", "message": "gone", "details": {}}


def test_with_missing_policy_none_is_identity(survey_schema):
    """Test no override returns the same schema"""
    assert survey_schema.with_missing_policy(None) is survey_schema


def test_chain_settings_burn_in():
    """Test burn_in must be smaller than iterations"""
    with pytest.raises(ValidationError, match="burn_in"):
        StaticConfig(K=1, alpha=np.ones((1, 1)), eta=[np.ones((1, 2))], iterations=10, burn_in=10)


def test_chain_settings_need_a_snapshot():
    """Test thin larger than iterations - burn_in is rejected"""
    with pytest.raises(ValidationError, match="no snapshots"):
        StaticConfig(
            K=1, alpha=np.ones((1, 1)), eta=[np.ones((1, 2))], iterations=40, burn_in=20, thin=50
        )


def test_static_config_snapshot_count():
    """Test floor((iterations - burn_in) / thin)"""
    config = StaticConfig(
        K=2, alpha=np.ones((3, 2)), eta=[np.ones((2, 4))], iterations=105, burn_in=50, thin=10
    )
    assert config.n_snapshots == 5


def test_static_config_rejects_non_positive_prior():
    """Test Dirichlet parameters must be positive"""
    with pytest.raises(ValidationError, match="alpha"):
        StaticConfig(K=2, alpha=np.array([[1.0, 0.0]]), eta=[np.ones((2, 2))])


def test_static_config_eta_rows():
    """Test eta blocks need K rows"""
    with pytest.raises(ValidationError, match="expected K=2"):
        StaticConfig(K=2, alpha=np.ones((1, 2)), eta=[np.ones((3, 2))])


def test_static_config_echo_is_json_ready():
    """Test echo converts arrays to nested lists"""
    config = StaticConfig(K=2, alpha=np.ones((1, 2)), eta=[np.ones((2, 2))], iterations=4, burn_in=1)
    echo = config.echo()

    assert echo["alpha"] == [[1.0, 1.0]]
    assert echo["mode"] == "static"
    json.dumps(echo)


def test_dynamic_config_defaults():
    """Test the default random-walk prior and step-size schedule"""
    config = DynamicConfig(K=2, eta=[np.ones((2, 3))])

    assert (config.v0, config.s0) == (2.0, 0.5)
    assert config.schedule == SgldSchedule(a=0.01, b=1.0, c=0.5)
    assert config.batch_size is None
    assert config.echo()["schedule"] == {"a": 0.01, "b": 1.0, "c": 0.5}


def test_dynamic_config_batch_size():
    """Test a non-positive mini-batch size is rejected"""
    with pytest.raises(ValidationError):
        DynamicConfig(K=2, eta=[np.ones((2, 3))], batch_size=0)


def test_selection_report_valid():
    """Test a well-formed selection report"""
    report = _report()
    assert report.recommended_k == 1
    assert not report.scree_agrees


def test_selection_report_eigenvalue_order():
    """Test eigenvalues must be descending"""
    with pytest.raises(ValidationError, match="descending"):
        _report(eigenvalues=[2.0, 18.0])


def test_selection_report_contiguous_k():
    """Test the K range may not have gaps"""
    with pytest.raises(ValidationError, match="contiguous"):
        _report(bic_by_k={1: 10.0, 3: 12.0})


def test_recovery_point_design_name():
    """Test only the two built-in designs are accepted"""
    with pytest.raises(ValidationError):
        RecoveryPoint(design="other", n=10, mean_corr=0.5, sd_corr=0.1, reps=2)
