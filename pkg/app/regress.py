"""
Two-step heterogeneous effects: posterior membership probabilities enter an OLS
as type dummies and as interactions with the treatment.

The last type is the baseline, so with K types the design carries K - 1
membership columns Z1..Z{K-1} and K - 1 interactions treatment:Zk. Standard
errors are the classical OLS ones and ignore that memberships are estimated.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg
import statsmodels.api as sm
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import (
    DataValidationError,
    InvalidModelConfiguration,
    RankDeficiencyError,
)
from app.db.duckdb_engine import DuckDBEngine
from app.utils.validators import validate_simplex_rows

logger = logging.getLogger(__name__)

INTERCEPT = "const"
RANK_TOLERANCE = 1e-10


class RegressionSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    outcome: np.ndarray
    treatment: np.ndarray
    controls: np.ndarray | None = None
    memberships: np.ndarray = Field(..., description="N x K membership probabilities")
    treatment_name: str = "treatment"
    control_names: list[str] | None = None

    @model_validator(mode="after")
    def validate_blocks(self) -> "RegressionSpec":
        self.outcome = np.asarray(self.outcome, dtype=float).reshape(-1)
        self.treatment = np.asarray(self.treatment, dtype=float).reshape(-1)
        n = self.outcome.size
        self.memberships = validate_simplex_rows(self.memberships, "memberships")
        controls = np.empty((n, 0)) if self.controls is None else np.asarray(self.controls, dtype=float)
        self.controls = controls[:, None] if controls.ndim == 1 else controls
        if self.treatment.size != n or self.memberships.shape[0] != n or self.controls.shape[0] != n:
            raise ValueError(
                f"Row counts differ: outcome {n}, treatment {self.treatment.size}, "
                f"controls {self.controls.shape[0]}, memberships {self.memberships.shape[0]}"
            )
        blocks = {"outcome": self.outcome, "treatment": self.treatment, "controls": self.controls}
        for name, block in blocks.items():
            if not np.all(np.isfinite(block)):
                raise ValueError(f"{name} contains non-finite values")
        if self.control_names is None:
            self.control_names = [f"w{c + 1}" for c in range(self.controls.shape[1])]
        elif len(self.control_names) != self.controls.shape[1]:
            raise ValueError("control_names does not match the number of control columns")
        return self

    @property
    def K(self) -> int:
        return self.memberships.shape[1]


class OlsFit(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    names: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    cov: np.ndarray
    r_squared: float
    n_obs: int
    se_type: str = "classical OLS; no correction for estimated memberships"

    @classmethod
    def from_coefficients(cls, coefficients: dict[str, float]) -> "OlsFit":
        """Fit object carrying published point estimates only (no covariance)."""
        names = list(coefficients)
        p = len(names)
        return cls(
            names=names,
            coefficients=np.array([coefficients[n] for n in names], dtype=float),
            standard_errors=np.full(p, np.nan),
            cov=np.full((p, p), np.nan),
            r_squared=float("nan"),
            n_obs=0,
        )

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.index_of(name)])

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidModelConfiguration(f"No coefficient named '{name}'")

    def to_frame(self) -> pd.DataFrame:
        with np.errstate(divide="ignore", invalid="ignore"):
            t_values = self.coefficients / self.standard_errors
        return pd.DataFrame(
            {
                "term": self.names,
                "estimate": self.coefficients,
                "std_error": self.standard_errors,
                "t_value": t_values,
            }
        )


def build_design(spec: RegressionSpec) -> tuple[np.ndarray, list[str]]:
    """
    Design matrix [1, controls, treatment, Z1..Z{K-1}, treatment*Z1..treatment*Z{K-1}].

    Raises:
        RankDeficiencyError: If the columns are linearly dependent; the columns
            left over after a pivoted QR are reported
    """
    n = spec.outcome.size
    dummies = spec.memberships[:, : spec.K - 1]
    X = np.column_stack(
        [np.ones(n), spec.controls, spec.treatment, dummies, spec.treatment[:, None] * dummies]
    )
    names = (
        [INTERCEPT]
        + list(spec.control_names or [])
        + [spec.treatment_name]
        + [f"Z{k + 1}" for k in range(spec.K - 1)]
        + [f"{spec.treatment_name}:Z{k + 1}" for k in range(spec.K - 1)]
    )
    check_rank(X, names)
    return X, names


def check_rank(X: np.ndarray, names: list[str]) -> int:
    if X.shape[0] == 0:
        raise RankDeficiencyError(names, 0, X.shape[1])
    _, R, pivots = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    scale = diagonal[0] if diagonal.size and diagonal[0] > 0 else 1.0
    rank = int(np.sum(diagonal > RANK_TOLERANCE * scale * max(X.shape)))
    if rank < X.shape[1]:
        offending = [names[i] for i in sorted(pivots[rank:])]
        logger.warning(f"Design is rank deficient (rank {rank} of {X.shape[1]}): {offending}")
        raise RankDeficiencyError(offending, rank, X.shape[1])
    return rank


def ols(y: np.ndarray, X: np.ndarray, names: list[str] | None = None) -> OlsFit:
    """
    Least squares through a QR decomposition with homoskedastic standard errors.

    Raises:
        RankDeficiencyError: If X is not of full column rank or has fewer rows than columns
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    X = np.asarray(X, dtype=float)
    names = names or [f"x{c}" for c in range(X.shape[1])]
    if y.size != X.shape[0]:
        raise DataValidationError(f"y has {y.size} rows, X has {X.shape[0]}")
    if X.shape[0] < X.shape[1]:
        raise RankDeficiencyError(names, X.shape[0], X.shape[1])
    check_rank(X, names)

    result = sm.OLS(y, X).fit(method="qr")
    cov = np.asarray(result.cov_params())
    return OlsFit(
        names=names,
        coefficients=np.asarray(result.params),
        standard_errors=np.asarray(result.bse),
        cov=cov,
        r_squared=float(result.rsquared),
        n_obs=int(result.nobs),
    )


def _type_effects(fit: OlsFit, K: int, base: str, prefix: str) -> pd.DataFrame:
    b = fit.index_of(base)
    rows = []
    for k in range(K):
        if k == K - 1:
            estimate = fit.coefficients[b]
            variance = fit.cov[b, b]
        else:
            i = fit.index_of(f"{prefix}Z{k + 1}")
            estimate = fit.coefficients[b] + fit.coefficients[i]
            variance = fit.cov[b, b] + fit.cov[i, i] + 2 * fit.cov[b, i]
        rows.append(
            {"type": k + 1, "estimate": float(estimate), "std_error": float(np.sqrt(variance))}
        )
    return pd.DataFrame(rows, columns=["type", "estimate", "std_error"])


def heterogeneous_returns(fit: OlsFit, K: int, treatment_name: str = "treatment") -> pd.DataFrame:
    """Per-type slope: base treatment coefficient plus the type's interaction (baseline adds 0)."""
    return _type_effects(fit, K, treatment_name, f"{treatment_name}:")


def heterogeneous_intercepts(fit: OlsFit, K: int) -> pd.DataFrame:
    """Per-type intercept: constant plus the type's membership coefficient."""
    return _type_effects(fit, K, INTERCEPT, "")


def join_memberships(
    memberships_path: str | Path,
    outcomes_path: str | Path,
    id_column: str = "id",
    engine: DuckDBEngine | None = None,
) -> pd.DataFrame:
    """
    Join the membership table to an outcome file by respondent id through DuckDB.

    Raises:
        DataValidationError: If no ids match
    """
    owns_engine = engine is None
    engine = engine or DuckDBEngine()
    try:
        engine.register_csv_file("memberships", str(memberships_path))
        engine.register_csv_file("outcomes", str(outcomes_path))
        joined = engine.join_on_id("memberships", "outcomes", id_column)
    finally:
        if owns_engine:
            engine.close()
    if joined.empty:
        raise DataValidationError(
            "No respondent ids shared by memberships and outcomes",
            details={"id_column": id_column},
        )
    logger.info(f"Joined {len(joined)} respondents on '{id_column}'")
    return joined


def spec_from_frame(
    frame: pd.DataFrame,
    outcome: str,
    treatment: str,
    controls: list[str] | None = None,
) -> RegressionSpec:
    """RegressionSpec from a joined table with p_type1..p_typeK membership columns."""
    membership_columns = sorted(
        (c for c in frame.columns if c.startswith("p_type")), key=lambda c: int(c[6:])
    )
    missing = [c for c in [outcome, treatment, *(controls or [])] if c not in frame.columns]
    if missing or not membership_columns:
        raise DataValidationError(
            "Joined table lacks required columns",
            details={"missing": missing, "memberships_found": bool(membership_columns)},
        )
    controls = controls or []
    return RegressionSpec(
        outcome=frame[outcome].astype(float).to_numpy(),
        treatment=frame[treatment].astype(float).to_numpy(),
        controls=frame[controls].astype(float).to_numpy() if controls else None,
        memberships=frame[membership_columns].astype(float).to_numpy(),
        treatment_name=treatment,
        control_names=controls,
    )
