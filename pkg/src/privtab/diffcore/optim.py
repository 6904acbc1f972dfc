"""Adam optimizer over parameter tensors."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> None:
    """One bias-corrected Adam update, in place on (param, m, v). t >= 1."""
    if grad.shape != param.shape or m.shape != param.shape or v.shape != param.shape:
        raise ShapeError("adam_step", param.shape, grad.shape)
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


class Adam:
    """Standard Adam; defaults follow common GAN practice (beta1=0.5)."""

    def __init__(self, params, lr=1e-4, beta1=0.5, beta2=0.9, eps=1e-8):
        self.params: list[Tensor] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            adam_step(p.data, grad, m, v, self.t, self.lr, self.beta1, self.beta2, self.eps)
