import logging
from typing import Any

logger = logging.getLogger(__name__)


class AppException(Exception):
    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        details: dict[str, Any] | None = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(message)

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}(exit_code={self.exit_code}, message='{self.message}')>"

    def to_payload(self) -> dict[str, Any]:
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }


# Survey data
class DataValidationError(AppException):
    def __init__(
        self,
        message: str = "Invalid survey data",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, exit_code=2, details=details)


class SchemaError(DataValidationError):
    def __init__(
        self,
        message: str = "Invalid ingest schema",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, details=details)


class UnknownCategoryError(DataValidationError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(
            f"Unknown category '{value}' at row {row}, column '{column}'",
            details={"row": row, "column": column, "value": value},
        )


class EmptyGroupError(DataValidationError):
    def __init__(self, label: str):
        super().__init__(
            f"Label '{label}' has no respondents", details={"label": label}
        )


class InsufficientCategoriesError(DataValidationError):
    def __init__(self, question: str, observed: int):
        super().__init__(
            f"Question '{question}' has {observed} observed categories, at least 2 required",
            details={"question": question, "observed": observed},
        )


# Model configuration
class InvalidModelConfiguration(AppException):
    def __init__(
        self,
        message: str = "Invalid model configuration",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, exit_code=2, details=details)


class FactoryConfigurationError(InvalidModelConfiguration):
    """Raised when a factory cannot create a component due to configuration issues."""

    def __init__(self, component_type: str, message: str):
        super().__init__(f"Factory error for {component_type}: {message}")


class DistributionError(AppException):
    def __init__(
        self,
        message: str = "Invalid distribution parameters",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, exit_code=2, details=details)


# Sampling
class SamplerError(AppException):
    def __init__(
        self,
        message: str = "Sampler failed",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, exit_code=3, details=details)


class NumericalFaultError(SamplerError):
    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message, details=details)


class RankDeficiencyError(AppException):
    def __init__(self, columns: list[str], rank: int, n_columns: int):
        super().__init__(
            f"Design matrix has rank {rank} < {n_columns} columns; offending columns: {columns}",
            exit_code=2,
            details={"columns": columns, "rank": rank, "n_columns": n_columns},
        )


# Storage
class DataNotFoundError(AppException):
    def __init__(self, message: str, details: dict[str, Any] | None = None):
        super().__init__(message, exit_code=4, details=details)


class LocalStorageError(DataNotFoundError):
    def __init__(
        self,
        message: str = "Local storage error",
        details: dict[str, Any] | None = None,
    ):
        super().__init__(message, details=details)


class FilePermissionError(LocalStorageError):
    def __init__(self, file_path: str, message: str | None = None):
        if message is None:
            message = f"Permission denied for file: {file_path}"
        super().__init__(message, details={"file_path": file_path})


class InvalidFileTypeError(LocalStorageError):
    def __init__(self, file_path: str, expected_type: str = "parquet"):
        message = f"Invalid file type for {file_path}. Expected {expected_type} file."
        super().__init__(
            message, details={"file_path": file_path, "expected_type": expected_type}
        )


class DatabaseError(AppException):
    def __init__(self, message: str, original_error: Exception | None = None):
        details = (
            {"original_error_type": type(original_error).__name__}
            if original_error
            else {}
        )
        super().__init__(message, exit_code=5, details=details)
