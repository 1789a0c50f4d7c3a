import json
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

from app.core.config import settings
from app.utils.validators import validate_positive_array, validate_proportion

MissingPolicy = Literal["drop-from-likelihood", "own-category"]
Mode = Literal["static", "dynamic"]


class QuestionSpec(BaseModel):
    name: str = Field(..., min_length=1, description="CSV column holding the question")
    categories: list[str] = Field(
        ..., min_length=1, description="Substantive response codes in anchoring order"
    )
    category_labels: list[str] | None = Field(
        None, description="Human readable labels, one per code"
    )
    missing_policy: MissingPolicy = "own-category"

    @field_validator("categories")
    @classmethod
    def validate_unique_codes(cls, v: list[str]) -> list[str]:
        if len(set(v)) != len(v):
            raise ValueError(f"Duplicate category codes: {v}")
        return v

    @model_validator(mode="after")
    def validate_labels(self) -> "QuestionSpec":
        if self.category_labels is not None and len(self.category_labels) != len(
            self.categories
        ):
            raise ValueError(
                f"Question '{self.name}': {len(self.category_labels)} labels for "
                f"{len(self.categories)} categories"
            )
        return self


class IngestSchema(BaseModel):
    id_column: str = "id"
    label_column: str = "label"
    mode: Mode = "static"
    missing_code: str = Field(default_factory=lambda: settings.MISSING_CODE)
    label_values: list[str] | None = Field(
        None, description="Ordered group or period labels; inferred when omitted"
    )
    questions: list[QuestionSpec] = Field(..., min_length=1)

    @field_validator("questions")
    @classmethod
    def validate_unique_questions(cls, v: list[QuestionSpec]) -> list[QuestionSpec]:
        names = [q.name for q in v]
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate question names: {names}")
        return v

    @classmethod
    def from_json(cls, path: str | Path) -> "IngestSchema":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def with_missing_policy(self, policy: MissingPolicy | None) -> "IngestSchema":
        """Override every question's missing policy (CLI --missing-policy)."""
        if policy is None:
            return self
        questions = [q.model_copy(update={"missing_policy": policy}) for q in self.questions]
        return self.model_copy(update={"questions": questions})


class SgldSchedule(BaseModel):
    """Polynomially decaying step size eps_r = a * (b + r) ** -c."""

    a: float = Field(0.01, gt=0)
    b: float = Field(1.0, gt=0)
    c: float = Field(0.5, gt=0, le=1)

    def step_size(self, r: int) -> float:
        return self.a * (self.b + r) ** (-self.c)


class ChainSettings(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    iterations: int = Field(1000, gt=0)
    burn_in: int = Field(500, ge=0)
    thin: int = Field(1, gt=0)

    @model_validator(mode="after")
    def validate_burn_in(self):
        if self.burn_in >= self.iterations:
            raise ValueError(
                f"burn_in ({self.burn_in}) must be smaller than iterations ({self.iterations})"
            )
        if self.n_snapshots == 0:
            raise ValueError(
                f"thin ({self.thin}) leaves no snapshots after burn-in; "
                f"keep it at most iterations - burn_in ({self.iterations - self.burn_in})"
            )
        return self

    @property
    def n_snapshots(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


def _echo(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, list):
        return [_echo(v) for v in value]
    if isinstance(value, BaseModel):
        return value.model_dump()
    return value


class StaticConfig(ChainSettings):
    mode: Literal["static"] = "static"
    K: int = Field(..., ge=1)
    alpha: np.ndarray = Field(..., description="G x K Dirichlet parameters for pi")
    eta: list[np.ndarray] = Field(..., description="Per question K x L_j parameters")

    @field_validator("alpha", mode="before")
    @classmethod
    def validate_alpha(cls, v) -> np.ndarray:
        return np.atleast_2d(validate_positive_array(v, "alpha"))

    @field_validator("eta", mode="before")
    @classmethod
    def validate_eta(cls, v) -> list[np.ndarray]:
        return [np.atleast_2d(validate_positive_array(e, "eta")) for e in v]

    @model_validator(mode="after")
    def validate_shapes(self):
        if self.alpha.shape[1] != self.K:
            raise ValueError(f"alpha has {self.alpha.shape[1]} columns, expected K={self.K}")
        for j, e in enumerate(self.eta):
            if e.shape[0] != self.K:
                raise ValueError(f"eta[{j}] has {e.shape[0]} rows, expected K={self.K}")
        return self

    def echo(self) -> dict[str, Any]:
        return {name: _echo(getattr(self, name)) for name in type(self).model_fields}


class DynamicConfig(ChainSettings):
    mode: Literal["dynamic"] = "dynamic"
    K: int = Field(..., ge=1)
    eta: list[np.ndarray] = Field(..., description="Per question K x L_j parameters")
    v0: float = Field(2.0, gt=0)
    s0: float = Field(0.5, gt=0)
    schedule: SgldSchedule = Field(default_factory=SgldSchedule)
    batch_size: int | None = Field(
        None, gt=0, description="Mini-batch size M; None uses the full sample"
    )

    @field_validator("eta", mode="before")
    @classmethod
    def validate_eta(cls, v) -> list[np.ndarray]:
        return [np.atleast_2d(validate_positive_array(e, "eta")) for e in v]

    @model_validator(mode="after")
    def validate_shapes(self):
        for j, e in enumerate(self.eta):
            if e.shape[0] != self.K:
                raise ValueError(f"eta[{j}] has {e.shape[0]} rows, expected K={self.K}")
        return self

    def echo(self) -> dict[str, Any]:
        return {name: _echo(getattr(self, name)) for name in type(self).model_fields}


class SelectionReport(BaseModel):
    G: int
    J: int
    L: int
    k_max_counting: int = Field(..., ge=1)
    eigenvalues: list[float]
    scree_threshold: float
    k_scree: int = Field(..., ge=1)
    bic_by_k: dict[int, float]
    loglik_by_k: dict[int, float] = Field(default_factory=dict)
    params_by_k: dict[int, int] = Field(default_factory=dict)
    weights_by_k: dict[int, float] = Field(default_factory=dict)
    frequency_error_by_k: dict[int, float] = Field(default_factory=dict)
    recommended_k: int = Field(..., ge=1)
    scree_agrees: bool = False
    parameter_count_rule: str = (
        "K*sum_j(L_j-1) + labels*(K-1) [+ K variances in dynamic mode]"
    )
    likelihood: str = "observed-data, z marginalized, at the posterior mean"
    warnings: list[str] = Field(default_factory=list)

    @field_validator("eigenvalues")
    @classmethod
    def validate_descending(cls, v: list[float]) -> list[float]:
        if any(a < b for a, b in zip(v, v[1:], strict=False)):
            raise ValueError("eigenvalues must be sorted in descending order")
        return v

    @field_validator("bic_by_k")
    @classmethod
    def validate_contiguous(cls, v: dict[int, float]) -> dict[int, float]:
        keys = sorted(v)
        if not keys or keys != list(range(keys[0], keys[0] + len(keys))):
            raise ValueError(f"bic_by_k keys must be contiguous, got {keys}")
        return v

    @field_validator("scree_threshold")
    @classmethod
    def validate_threshold(cls, v: float) -> float:
        return validate_proportion(v, "scree_threshold")


class RecoveryPoint(BaseModel):
    design: Literal["identified", "under_identified"]
    n: int = Field(..., gt=0)
    mean_corr: float
    sd_corr: float
    reps: int = Field(..., gt=0)


class RunManifest(BaseModel):
    command: str
    argv: list[str]
    config: dict[str, Any] = Field(default_factory=dict)
    seed: int | None = None
    data_hash: str | None = None
    started_at: str
    finished_at: str | None = None
    software_version: str
    git_revision: str | None = None
    env: str = "development"
    warnings: list[str] = Field(default_factory=list)


class ErrorPayload(BaseModel):
    """One-line JSON error the CLI writes to stderr."""

    error: str
    message: str
    details: dict[str, Any] = Field(default_factory=dict)
