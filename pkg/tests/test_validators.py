import numpy as np
import pytest

from app.utils.validators import (
    validate_positive_array,
    validate_proportion,
    validate_simplex_rows,
)


class TestValidateProportion:
    """Test suite for proportion validator."""

    @pytest.mark.parametrize("value", [0.05, 0.9, 1.0])
    def test_valid(self, value):
        """Test values in (0, 1] pass through as floats."""
        assert validate_proportion(value) == value

    @pytest.mark.parametrize("value", [0.0, -0.1, 1.01])
    def test_invalid_raises_value_error(self, value):
        """Test values outside (0, 1] raise ValueError naming the parameter."""
        with pytest.raises(ValueError) as exc_info:
            validate_proportion(value, "level")

        assert f"Invalid level: {value}" in str(exc_info.value)


class TestValidatePositiveArray:
    """Test suite for hyperparameter validator."""

    def test_valid(self):
        """Test a positive list becomes a float array."""
        result = validate_positive_array([1, 2.5])
        assert result.dtype == float
        np.testing.assert_array_equal(result, [1.0, 2.5])

    @pytest.mark.parametrize("value", [[1.0, 0.0], [np.inf], [np.nan, 1.0], []])
    def test_invalid_raises_value_error(self, value):
        """Test zero, non-finite or empty input raises ValueError."""
        with pytest.raises(ValueError, match="Invalid eta"):
            validate_positive_array(value, "eta")


class TestValidateSimplexRows:
    """Test suite for simplex validator."""

    def test_vector_is_promoted(self):
        """Test a single probability vector becomes one row."""
        assert validate_simplex_rows([0.25, 0.75]).shape == (1, 2)

    def test_negative_entry(self):
        """Test negative probabilities raise ValueError."""
        with pytest.raises(ValueError, match="negative"):
            validate_simplex_rows([[1.2, -0.2]])

    def test_rows_must_sum_to_one(self):
        """Test a row summing to 0.9 raises ValueError."""
        with pytest.raises(ValueError, match="sum to 1"):
            validate_simplex_rows([[0.5, 0.5], [0.4, 0.5]], "pi")
