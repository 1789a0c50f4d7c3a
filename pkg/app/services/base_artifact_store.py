import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.core.exceptions import DataNotFoundError, LocalStorageError
from app.data.dataset import SurveyDataset
from app.db.duckdb_engine import DuckDBEngine
from app.sampler.state import ChainState, PosteriorDraws
from app.schemas import RunManifest

logger = logging.getLogger(__name__)

DRAWS_FILE = "draws.parquet"
DRAWS_META_FILE = "draws_meta.json"
MANIFEST_FILE = "manifest.json"
DRAW_COLUMNS = ["chain", "snapshot", "iteration", "block", "question", "row", "col", "value"]


def _block_rows(
    block: str, values: np.ndarray, chain: int, snapshot: int, iteration: int, question: int = 0
) -> pd.DataFrame:
    """Long rows for one array; every index column is 1-based."""
    values = np.atleast_2d(values)
    rows, cols = np.indices(values.shape)
    n = values.size
    return pd.DataFrame(
        {
            "chain": np.full(n, chain, dtype=np.int64),
            "snapshot": np.full(n, snapshot, dtype=np.int64),
            "iteration": np.full(n, iteration, dtype=np.int64),
            "block": block,
            "question": np.full(n, question, dtype=np.int64),
            "row": rows.reshape(-1).astype(np.int64) + 1,
            "col": cols.reshape(-1).astype(np.int64) + 1,
            "value": values.reshape(-1).astype(float),
        },
        columns=DRAW_COLUMNS,
    )


def draws_to_frame(draws: PosteriorDraws) -> pd.DataFrame:
    """Long-format table of every snapshot; z and category indices are written 1-based."""
    frames = []
    for s, (state, iteration, loglik, chain) in enumerate(
        zip(draws.snapshots, draws.iterations, draws.loglik, draws.chains, strict=True), start=1
    ):
        c = chain + 1
        frames.append(_block_rows("z", state.z[None, :] + 1, c, s, iteration))
        frames.append(_block_rows("pi", state.pi, c, s, iteration))
        for j, beta in enumerate(state.beta, start=1):
            frames.append(_block_rows("beta", beta, c, s, iteration, question=j))
        if state.pi_tilde is not None:
            frames.append(_block_rows("pi_tilde", state.pi_tilde, c, s, iteration))
        if state.sigma2 is not None:
            frames.append(_block_rows("sigma2", state.sigma2[None, :], c, s, iteration))
        frames.append(_block_rows("loglik", np.array([[loglik]]), c, s, iteration))
    if not frames:
        return pd.DataFrame(columns=DRAW_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def frame_to_draws(frame: pd.DataFrame, meta: dict[str, Any]) -> PosteriorDraws:
    """Rebuild PosteriorDraws from the canonical-ordered long table and its metadata."""
    K = int(meta["K"])
    n_categories = [len(q["codes"]) for q in meta["questions"]]
    n_labels = len(meta["label_values"])
    n_resp = len(meta["ids"])
    blocks = {name: group for name, group in frame.groupby("block", sort=False)}
    if "loglik" not in blocks:
        raise DataNotFoundError("The draw table holds no snapshots", details={"rows": len(frame)})
    loglik = blocks["loglik"]
    S = len(loglik)

    z = blocks["z"]["value"].to_numpy().reshape(S, n_resp).astype(np.int64) - 1
    pi = blocks["pi"]["value"].to_numpy().reshape(S, n_labels, K)
    beta_flat = blocks["beta"]["value"].to_numpy().reshape(S, -1)
    splits = np.cumsum([K * L for L in n_categories])[:-1]
    betas = [
        part.reshape(S, K, L)
        for part, L in zip(np.split(beta_flat, splits, axis=1), n_categories, strict=True)
    ]
    pi_tilde = (
        blocks["pi_tilde"]["value"].to_numpy().reshape(S, n_labels, K) if "pi_tilde" in blocks else None
    )
    sigma2 = blocks["sigma2"]["value"].to_numpy().reshape(S, K) if "sigma2" in blocks else None

    draws = PosteriorDraws(
        mode=meta["mode"], K=K, config=meta.get("config", {}), rng=meta.get("rng", [])
    )
    for s in range(S):
        draws.snapshots.append(
            ChainState(
                z=z[s],
                pi=pi[s],
                beta=[b[s] for b in betas],
                pi_tilde=None if pi_tilde is None else pi_tilde[s],
                sigma2=None if sigma2 is None else sigma2[s],
            )
        )
    draws.iterations.extend(int(i) for i in loglik["iteration"])
    draws.loglik.extend(float(v) for v in loglik["value"])
    draws.chains.extend(int(c) - 1 for c in loglik["chain"])
    return draws


def draws_metadata(draws: PosteriorDraws, data: SurveyDataset) -> dict[str, Any]:
    return {
        "mode": draws.mode,
        "K": draws.K,
        "n_snapshots": draws.n_snapshots,
        "questions": [q.model_dump() for q in data.questions],
        "label_column": data.label_column,
        "label_values": list(data.label_values),
        "id_column": data.id_column,
        "ids": list(data.ids),
        "config": draws.config,
        "rng": draws.rng,
    }


class BaseArtifactStore(ABC):
    """Reads and writes run artifacts; draw files are read back through DuckDB."""

    def __init__(self, db_engine: DuckDBEngine | None = None):
        self.db_engine = db_engine or DuckDBEngine()

    @abstractmethod
    def output_path(self, name: str) -> Path:
        """Path an artifact with this file name is written to."""
        pass

    @abstractmethod
    def get_path(self, name: str) -> Path:
        """Path of an existing, readable artifact."""
        pass

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.output_path(name)
        try:
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            raise LocalStorageError(f"Cannot write {path}: {e}")
        logger.debug(f"Wrote {path}")
        return path

    def read_json(self, name: str) -> Any:
        path = self.get_path(name)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataNotFoundError(f"{path} is not valid JSON: {e}")

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.output_path(name)
        frame.to_csv(path, index=False, lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def read_table(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self.get_path(name))

    def write_manifest(self, manifest: RunManifest) -> Path:
        return self.write_json(MANIFEST_FILE, manifest.model_dump(mode="json"))

    def read_manifest(self) -> RunManifest:
        return RunManifest(**self.read_json(MANIFEST_FILE))

    def write_draws(self, draws: PosteriorDraws, data: SurveyDataset) -> Path:
        """Write draws.parquet and draws_meta.json."""
        path = self.output_path(DRAWS_FILE)
        draws_to_frame(draws).to_parquet(path, engine="pyarrow", index=False)
        self.write_json(DRAWS_META_FILE, draws_metadata(draws, data))
        logger.info(f"Wrote {draws.n_snapshots} snapshots to {path}")
        return path

    def read_draws(self) -> tuple[PosteriorDraws, dict[str, Any]]:
        """Load draws and their metadata; rows come back in canonical order."""
        meta = self.read_json(DRAWS_META_FILE)
        path = self.get_path(DRAWS_FILE)
        try:
            self.db_engine.register_parquet_file("draws", str(path))
            frame = self.db_engine.read_draws("draws")
        except Exception as e:
            raise DataNotFoundError(f"Failed to read draws from {path}: {e}")
        return frame_to_draws(frame, meta), meta
