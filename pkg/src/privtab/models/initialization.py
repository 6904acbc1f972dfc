"""Weight initialisation: Kaiming-uniform before relu, Xavier-uniform elsewhere.

Biases and positional embeddings start at zero; fixed rules keep runs
reproducible from a single seed.
"""

from __future__ import annotations

import numpy as np


def kaiming_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))
