from unittest.mock import patch

import duckdb
import pandas as pd
import pytest

from app.core.exceptions import DatabaseError
from app.db.duckdb_engine import DuckDBEngine


class TestDuckDBEngine:
    """Test cases for DuckDBEngine class"""

    @pytest.fixture
    def duckdb_engine(self):
        """Create a DuckDBEngine instance with in-memory database"""
        engine = DuckDBEngine(db_path=":memory:")
        yield engine
        engine.close()

    @pytest.fixture
    def draws_parquet(self, tmp_path):
        """Long-format draws written out of canonical order"""
        frame = pd.DataFrame(
            {
                "chain": [2, 1, 1, 1],
                "snapshot": [1, 2, 1, 1],
                "block": ["pi", "pi", "beta", "pi"],
                "question": [0, 0, 1, 0],
                "row": [1, 1, 1, 1],
                "col": [1, 1, 1, 1],
                "value": [0.4, 0.3, 0.9, 0.2],
            }
        )
        path = tmp_path / "draws.parquet"
        frame.to_parquet(path, index=False)
        return str(path)

    def test_initialization(self, duckdb_engine):
        """Test DuckDBEngine initialization is lazy"""
        assert duckdb_engine.db_path == ":memory:"
        assert duckdb_engine._conn is None

    def test_initialize_connection_success(self, duckdb_engine):
        """Test successful connection initialization"""
        duckdb_engine._initialize_connection()

        assert isinstance(duckdb_engine._conn, duckdb.DuckDBPyConnection)

    def test_initialize_connection_failure(self):
        """Test connection initialization failure"""
        with patch("duckdb.connect") as mock_connect:
            mock_connect.side_effect = Exception("Connection failed")

            engine = DuckDBEngine(db_path="invalid_path")
            with pytest.raises(DatabaseError, match="DuckDB initialization failed"):
                engine._initialize_connection()

    def test_register_parquet_file_success(self, duckdb_engine, draws_parquet):
        """Test successful parquet file registration"""
        duckdb_engine.register_parquet_file("draws", draws_parquet)

        result = duckdb_engine.execute_query("SELECT COUNT(*) AS count FROM draws")
        assert result.iloc[0]["count"] == 4

    def test_register_parquet_file_invalid_path(self, duckdb_engine):
        """Test parquet registration with a missing file"""
        with pytest.raises(DatabaseError, match="Registration of draws failed"):
            duckdb_engine.register_parquet_file("draws", "nonexistent_file.parquet")

    @pytest.mark.parametrize("path", ["x.parquet'; DROP TABLE t; --", "a/*b*/.parquet", ""])
    def test_register_rejects_unsafe_path(self, duckdb_engine, path):
        """Test paths that could break out of the DDL string are refused"""
        with pytest.raises(DatabaseError, match="Invalid file path"):
            duckdb_engine.register_parquet_file("draws", path)

    def test_register_rejects_unsafe_identifier(self, duckdb_engine, draws_parquet):
        """Test view names must be plain identifiers"""
        with pytest.raises(DatabaseError, match="Invalid identifier"):
            duckdb_engine.register_parquet_file("draws; DROP", draws_parquet)

    def test_execute_query_with_params(self, duckdb_engine):
        """Test parameterised query execution"""
        duckdb_engine._initialize_connection()
        duckdb_engine._conn.execute("CREATE TABLE test (id INTEGER, name VARCHAR)")
        duckdb_engine._conn.execute("INSERT INTO test VALUES (1, 'Alice'), (2, 'Bob')")

        result = duckdb_engine.execute_query("SELECT * FROM test WHERE id = ?", [2])

        assert isinstance(result, pd.DataFrame)
        assert result["name"].tolist() == ["Bob"]

    def test_execute_query_syntax_error(self, duckdb_engine):
        """Test query execution against a missing table"""
        with pytest.raises(DatabaseError, match="DuckDB query error"):
            duckdb_engine.execute_query("SELECT * FROM nonexistent_table")

    def test_read_draws_canonical_order(self, duckdb_engine, draws_parquet):
        """Test rows come back sorted by chain, snapshot, block, question, row, col"""
        duckdb_engine.register_parquet_file("draws", draws_parquet)

        frame = duckdb_engine.read_draws("draws")

        assert frame["value"].tolist() == [0.9, 0.2, 0.3, 0.4]

    def test_read_draws_block_filter(self, duckdb_engine, draws_parquet):
        """Test selecting blocks by name"""
        duckdb_engine.register_parquet_file("draws", draws_parquet)

        frame = duckdb_engine.read_draws("draws", blocks=["beta"])

        assert frame["block"].tolist() == ["beta"]

    def test_join_on_id_keeps_left_order(self, duckdb_engine, tmp_path):
        """Test the inner join drops unmatched ids and keeps left row order"""
        left = tmp_path / "left.csv"
        left.write_text("id,p_type1\n7,0.1\n3,0.9\n5,0.5\n", encoding="utf-8")
        right = tmp_path / "right.csv"
        right.write_text("id,wage\n3,2.5\n7,1.5\n", encoding="utf-8")
        duckdb_engine.register_csv_file("memberships", str(left))
        duckdb_engine.register_csv_file("outcomes", str(right))

        joined = duckdb_engine.join_on_id("memberships", "outcomes")

        assert joined.columns.tolist() == ["id", "p_type1", "wage"]
        assert joined["id"].tolist() == ["7", "3"]
        assert joined["wage"].tolist() == ["1.5", "2.5"]

    def test_close_and_context_manager(self, draws_parquet):
        """Test the context manager opens and closes the connection"""
        with DuckDBEngine() as engine:
            assert engine._conn is not None
            engine.register_parquet_file("draws", draws_parquet)
        assert engine._conn is None

        engine.close()
