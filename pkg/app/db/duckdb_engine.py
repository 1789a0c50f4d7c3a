import logging
import re

import duckdb
import pandas as pd

from app.core.exceptions import DatabaseError

logger = logging.getLogger(__name__)

DRAW_ORDER = ["chain", "snapshot", "block", "question", "row", "col"]


class DuckDBEngine:
    """In-process DuckDB connection for reading draw files and joining tabular outputs."""

    def __init__(self, db_path: str = ":memory:", threads: int = 4):
        self.db_path = db_path
        self.threads = threads
        self._conn = None

    def _initialize_connection(self):
        if self._conn is None:
            try:
                self._conn = duckdb.connect(database=self.db_path, read_only=False)
                self._conn.execute(f"PRAGMA threads={int(self.threads)};")
                logger.debug(f"DuckDB engine initialized: {self.db_path}")
            except Exception as e:
                logger.error(f"Failed to initialize DuckDB: {e}")
                raise DatabaseError("DuckDB initialization failed", original_error=e)

    def _validate_identifier(self, identifier: str) -> bool:
        """Validate identifier is safe (alphanumeric and underscores only)."""
        return bool(re.match(r"^[a-zA-Z_][a-zA-Z0-9_]*$", identifier))

    def _safe_identifier(self, identifier: str) -> str:
        if not self._validate_identifier(identifier):
            raise DatabaseError(f"Invalid identifier: {identifier}")
        return identifier

    def _safe_path(self, file_path: str) -> str:
        # DDL takes no parameters, so the path is inlined
        if not file_path or any(token in file_path for token in [";", "--", "/*", "*/", "'"]):
            raise DatabaseError(f"Invalid file path: {file_path}")
        return file_path

    def _register(self, table_name: str, reader: str):
        self._initialize_connection()
        query = f"CREATE OR REPLACE VIEW {self._safe_identifier(table_name)} AS SELECT * FROM {reader}"
        try:
            self._conn.execute(query)  # type: ignore[union-attr]
            logger.debug(f"Registered view {table_name}")
        except duckdb.Error as e:
            logger.error(f"Failed to register {table_name}: {e}")
            raise DatabaseError(f"Registration of {table_name} failed", original_error=e)

    def register_parquet_file(self, table_name: str, file_path: str):
        """Register a parquet file as a queryable view."""
        self._register(table_name, f"read_parquet('{self._safe_path(file_path)}')")

    def register_csv_file(self, table_name: str, file_path: str):
        """Register a CSV file as a view with every column read as text."""
        self._register(
            table_name, f"read_csv('{self._safe_path(file_path)}', header=true, all_varchar=true)"
        )

    def execute_query(self, sql_query: str, params: list | None = None) -> pd.DataFrame:
        """Execute a SQL query with optional parameters"""
        self._initialize_connection()
        if self._conn is None:
            raise DatabaseError("Database connection not initialized")
        try:
            if params:
                df = self._conn.execute(sql_query, params).fetchdf()
            else:
                df = self._conn.execute(sql_query).fetchdf()
            logger.debug(f"Query executed successfully. Rows: {len(df)}")
            return df
        except duckdb.Error as e:
            logger.error(f"DuckDB query error: {e}")
            raise DatabaseError(f"DuckDB query error: {e}", original_error=e)

    def read_draws(self, table_name: str, blocks: list[str] | None = None) -> pd.DataFrame:
        """Long-format draws in canonical (chain, snapshot, block, question, row, col) order."""
        table = self._safe_identifier(table_name)
        order = ", ".join(DRAW_ORDER)
        if blocks:
            placeholders = ", ".join("?" for _ in blocks)
            return self.execute_query(
                f"SELECT * FROM {table} WHERE block IN ({placeholders}) ORDER BY {order}", blocks
            )
        return self.execute_query(f"SELECT * FROM {table} ORDER BY {order}")

    def join_on_id(self, left: str, right: str, id_column: str = "id") -> pd.DataFrame:
        """Inner join of two registered views on a shared id column, in left-table order."""
        left, right, key = (self._safe_identifier(x) for x in (left, right, id_column))
        query = f"""
        SELECT l.*, r.* EXCLUDE ({key})
        FROM (SELECT *, row_number() OVER () AS _position FROM {left}) AS l
        JOIN {right} AS r ON CAST(l.{key} AS VARCHAR) = CAST(r.{key} AS VARCHAR)
        ORDER BY l._position
        """
        return self.execute_query(query).drop(columns="_position")

    def close(self):
        """Close the database connection"""
        if self._conn:
            self._conn.close()
            self._conn = None
            logger.debug("DuckDB connection closed.")

    def __enter__(self):
        self._initialize_connection()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()
