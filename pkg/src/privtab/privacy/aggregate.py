"""Gaussian noisy-vote release."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError


def noisy_aggregate(n_j: int, k: int, sigma: float, rng: np.random.Generator) -> int:
    """Release the noisy majority label: 1[n_j + N(0, sigma^2) > k/2].

    Strict inequality at the threshold. sigma = 0 (deterministic majority) is
    permitted for tests only; training configs require sigma > 0.
    """
    if not (0 <= n_j <= k):
        raise ParameterError(f"noisy_aggregate: n_j={n_j} outside [0, {k}]")
    if sigma < 0.0:
        raise ParameterError(f"noisy_aggregate: sigma must be >= 0, got {sigma}")
    noise = sigma * rng.standard_normal() if sigma > 0.0 else 0.0
    return int(n_j + noise > k / 2.0)


def noisy_aggregate_batch(
    tallies: np.ndarray, k: int, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Vectorised noisy release of a tally batch; one noise draw per label."""
    tallies = np.asarray(tallies)
    if tallies.size and (tallies.min() < 0 or tallies.max() > k):
        raise ParameterError(f"noisy_aggregate: tallies outside [0, {k}]")
    if sigma < 0.0:
        raise ParameterError(f"noisy_aggregate: sigma must be >= 0, got {sigma}")
    noise = sigma * rng.standard_normal(tallies.shape) if sigma > 0.0 else 0.0
    return (tallies + noise > k / 2.0).astype(np.int64)
