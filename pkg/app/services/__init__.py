from pathlib import Path

from app.db.duckdb_engine import DuckDBEngine
from app.services.base_artifact_store import BaseArtifactStore
from app.services.local_artifact_store import LocalArtifactStore


def get_artifact_store(output_dir: str | Path | None = None) -> BaseArtifactStore:
    return LocalArtifactStore(output_dir, DuckDBEngine())
