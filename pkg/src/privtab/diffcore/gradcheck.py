"""Finite-difference verification harness for catalog ops and composed graphs."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ParameterError
from .ops import weighted_sum
from .tensor import Tensor, no_grad


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    epsilon: float = 1e-5,
    rng: np.random.Generator | None = None,
    sample_per_tensor: int | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `fn(*inputs)` must be deterministic (freeze any sampling). The output is
    scalarised through a fixed random projection so a single backward pass
    yields every analytic derivative. Error metric per entry:
    |analytic - numeric| / max(1, |numeric|).

    `sample_per_tensor` limits the finite-difference probes to that many
    randomly chosen entries per input tensor (for large parameter sets).
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise ParameterError(f"grad_check: epsilon {epsilon} outside [1e-7, 1e-3]")
    rng = rng if rng is not None else np.random.default_rng(0)

    out0 = fn(*inputs)
    weights = rng.standard_normal(out0.data.shape)

    for t in inputs:
        t.zero_grad()
    loss = weighted_sum(out0, weights)
    loss.backward()

    def scalar() -> float:
        with no_grad():
            return float((fn(*inputs).data * weights).sum())

    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if sample_per_tensor is not None and flat.size > sample_per_tensor:
            idx = rng.choice(flat.size, size=sample_per_tensor, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = scalar()
            flat[i] = orig - epsilon
            f_minus = scalar()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
