"""Seeded random variates and simplex helpers shared by both samplers."""

import numpy as np

from app.core.exceptions import DistributionError


class RngStream:
    """
    Reproducible random stream identified by (seed, stream_id).

    Uses the counter-based Philox bit generator keyed through a SeedSequence
    whose spawn key is the stream id, so distinct stream ids give
    non-overlapping sequences.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise DistributionError(
                "seed and stream_id must be non-negative",
                details={"seed": seed, "stream_id": stream_id},
            )
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    def metadata(self) -> dict[str, int]:
        return {"seed": self.seed, "stream_id": self.stream_id}

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _positive(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DistributionError(f"{name} entries must be finite and > 0")
    return arr


def sample_dirichlet(alpha, rng: RngStream) -> np.ndarray:
    """
    Draw from Dirichlet(alpha) by normalising Gamma variates.

    A 2-D alpha draws one independent simplex vector per row.
    """
    alpha = _positive(alpha, "alpha")
    gammas = rng.generator.standard_gamma(alpha)
    totals = gammas.sum(axis=-1, keepdims=True)
    # every coordinate underflowed: fall back to the largest alpha
    if np.any(totals == 0):
        degenerate = np.broadcast_to(totals == 0, gammas.shape)
        fallback = (alpha == alpha.max(axis=-1, keepdims=True)).astype(float)
        gammas = np.where(degenerate, fallback, gammas)
        totals = gammas.sum(axis=-1, keepdims=True)
    # entries stay strictly positive when small alphas underflow
    draws = np.maximum(gammas / totals, np.finfo(float).tiny)
    return draws / draws.sum(axis=-1, keepdims=True)


def sample_categorical(weights, rng: RngStream) -> int:
    """Return k with probability weights[k] / sum(weights)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DistributionError("weights must be a finite, non-negative vector")
    total = w.sum()
    if total <= 0:
        raise DistributionError("weights must not all be zero")
    return int(sample_categorical_rows(w[None, :] / total, rng)[0])


def sample_categorical_rows(probs: np.ndarray, rng: RngStream) -> np.ndarray:
    """One categorical draw per row of a row-normalised probability matrix."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.generator.random(probs.shape[0]) * cdf[:, -1]
    draws = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(draws, probs.shape[1] - 1)


def sample_inverse_gamma(
    shape, scale, rng: RngStream, size: int | None = None
) -> np.ndarray | float:
    """Draw from InverseGamma(shape, scale), the reciprocal of Gamma(shape, rate=scale)."""
    shape_arr, scale_arr = np.broadcast_arrays(
        _positive(shape, "shape"), _positive(scale, "scale")
    )
    if size is not None:
        shape_arr = np.broadcast_to(shape_arr, (size,) + shape_arr.shape)
        scale_arr = np.broadcast_to(scale_arr, shape_arr.shape)
    draws = scale_arr / rng.generator.standard_gamma(shape_arr)
    if np.ndim(draws) == 0:
        return float(draws)
    return draws


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along axis (max-subtraction)."""
    x = np.asarray(logits, dtype=float)
    if np.any(np.isnan(x)):
        raise DistributionError("logits contain NaN")
    if not np.all(np.isfinite(x)):
        raise DistributionError("logits must be finite")
    shifted = x - x.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=axis, keepdims=True)
