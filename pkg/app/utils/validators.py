import numpy as np

SIMPLEX_TOLERANCE = 1e-10


def validate_proportion(v: float, name: str = "threshold") -> float:
    """
    Validate a proportion lying strictly inside (0, 1].

    Args:
        v: Value to validate
        name: Parameter name used in the error message

    Returns:
        Validated value

    Raises:
        ValueError: If value is not in (0, 1]
    """
    if not 0.0 < v <= 1.0:
        raise ValueError(f"Invalid {name}: {v}. Must lie in (0, 1]")
    return float(v)


def validate_positive_array(v, name: str = "hyperparameter") -> np.ndarray:
    """
    Convert to a float array and require every entry to be finite and > 0.

    Raises:
        ValueError: If any entry is non-positive or not finite
    """
    arr = np.asarray(v, dtype=float)
    if arr.size == 0:
        raise ValueError(f"Invalid {name}: empty array")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"Invalid {name}: all entries must be finite and > 0")
    return arr


def validate_simplex_rows(v, name: str = "probabilities") -> np.ndarray:
    """
    Require a non-negative matrix whose rows sum to one.

    Raises:
        ValueError: If any row is off the simplex
    """
    arr = np.atleast_2d(np.asarray(v, dtype=float))
    if np.any(arr < 0):
        raise ValueError(f"Invalid {name}: negative entries")
    if not np.allclose(arr.sum(axis=1), 1.0, atol=SIMPLEX_TOLERANCE):
        raise ValueError(f"Invalid {name}: rows must sum to 1")
    return arr
