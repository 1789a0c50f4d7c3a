import logging
import os
import re
from pathlib import Path

from app.core.config import settings
from app.core.exceptions import (
    DataNotFoundError,
    FilePermissionError,
    InvalidFileTypeError,
    LocalStorageError,
)
from app.db.duckdb_engine import DuckDBEngine
from app.services.base_artifact_store import BaseArtifactStore

logger = logging.getLogger(__name__)

ALLOWED_SUFFIXES = {".parquet", ".json", ".csv"}


class LocalArtifactStore(BaseArtifactStore):
    def __init__(self, output_dir: str | Path | None = None, db_engine: DuckDBEngine | None = None):
        super().__init__(db_engine)
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR).resolve()
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            logger.debug(f"LocalArtifactStore initialized with output directory: {self.output_dir}")
        except PermissionError as e:
            logger.error(f"Permission denied creating output directory {self.output_dir}: {e}")
            raise FilePermissionError(str(self.output_dir), f"Cannot create output directory: {e}")
        except OSError as e:
            raise LocalStorageError(f"Cannot create output directory {self.output_dir}: {e}")

    def _checked_name(self, name: str) -> str:
        # plain file names only, no traversal out of the output directory
        if not name or not re.match(r"^[\w\-\.]+$", name) or name.startswith("."):
            raise DataNotFoundError(f"Invalid artifact name: {name}")
        if Path(name).suffix.lower() not in ALLOWED_SUFFIXES:
            raise InvalidFileTypeError(name, "/".join(sorted(ALLOWED_SUFFIXES)))
        return name

    def output_path(self, name: str) -> Path:
        path = self.output_dir / self._checked_name(name)
        if path.exists() and not os.access(path, os.W_OK):
            raise FilePermissionError(str(path))
        return path

    def get_path(self, name: str) -> Path:
        file_path = self.output_dir / self._checked_name(name)

        if not file_path.exists():
            raise DataNotFoundError(f"Artifact not found: {file_path}")
        if file_path.is_dir():
            raise DataNotFoundError(f"Path exists but is a directory, not a file: {file_path}")
        if not os.access(file_path, os.R_OK):
            raise FilePermissionError(str(file_path))
        return file_path
