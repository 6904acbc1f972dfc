"""Forward/backward op catalog.

All ops take and return `Tensor`s. Inputs are validated up front and a
`ShapeError` names the op and the offending shapes; non-finite outputs raise
`NumericError`. The token-structured ops (`split_tokens`, `merge_tokens`,
`mean_pool`, `scaled_dot_attention`) treat a (batch, tokens*width) matrix as
a folded token axis so that every tensor in the engine stays 2-D.
"""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError, ShapeError
from .tensor import Tensor, ensure_finite, needs_graph


def _result(data: np.ndarray, op: str, parents, vjp) -> Tensor:
    ensure_finite(data, op)
    track = needs_graph(*parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out.attach(op, parents, vjp)
    return out


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


# ---------------------------------------------------------------------------
# elementwise / linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError("matmul", a.data.shape, b.data.shape)
    data = a.data @ b.data

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _result(data, "matmul", (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; either operand may be a single row broadcast over rows."""
    sa, sb = a.data.shape, b.data.shape
    if sa[1] != sb[1] or (sa[0] != sb[0] and 1 not in (sa[0], sb[0])):
        raise ShapeError("add", sa, sb)
    data = a.data + b.data

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = g.sum(axis=0, keepdims=True) if sa[0] == 1 and g.shape[0] != 1 else g
        if b.requires_grad:
            gb = g.sum(axis=0, keepdims=True) if sb[0] == 1 and g.shape[0] != 1 else g
        return ga, gb

    return _result(data, "add", (a, b), vjp)


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)
    mask = x.data > 0.0  # subgradient at 0 is 0

    def vjp(g):
        return (g * mask,)

    return _result(data, "relu", (x,), vjp)


def _sigmoid_raw(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid_raw(x.data)

    def vjp(g):
        return (g * s * (1.0 - s),)

    return _result(s, "sigmoid", (x,), vjp)


def _softmax_raw(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax."""
    s = _softmax_raw(x.data)

    def vjp(g):
        inner = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - inner),)

    return _result(s, "softmax", (x,), vjp)


# ---------------------------------------------------------------------------
# normalisation

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise normalisation with learnable (1 x d) scale and shift."""
    d = x.data.shape[1]
    if gamma.data.shape != (1, d) or beta.data.shape != (1, d):
        raise ShapeError("layer_norm", x.data.shape, gamma.data.shape, beta.data.shape)
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = gamma.data * xhat + beta.data

    def vjp(g):
        gx = ggamma = gbeta = None
        if gamma.requires_grad:
            ggamma = (g * xhat).sum(axis=0, keepdims=True)
        if beta.requires_grad:
            gbeta = g.sum(axis=0, keepdims=True)
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
            gx = inv * (dxhat - m1 - xhat * m2)
        return gx, ggamma, gbeta

    return _result(data, "layer_norm", (x, gamma, beta), vjp)


class BatchNormState:
    """Running column statistics for batch_norm (momentum-smoothed)."""

    __slots__ = ("running_mean", "running_var")

    def __init__(self, width: int):
        self.running_mean = np.zeros((1, width))
        self.running_var = np.ones((1, width))


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Column-wise normalisation.

    Train mode normalises by batch statistics (biased variance) and updates
    the running statistics in `state`; eval mode reads the running
    statistics only and never mutates them.
    """
    n, d = x.data.shape
    if gamma.data.shape != (1, d) or beta.data.shape != (1, d):
        raise ShapeError("batch_norm", x.data.shape, gamma.data.shape, beta.data.shape)

    if training:
        if n < 2:
            raise ParameterError(f"batch_norm: train mode requires batch size >= 2, got {n}")
        mu = x.data.mean(axis=0, keepdims=True)
        var = x.data.var(axis=0, keepdims=True)
        state.running_mean = momentum * state.running_mean + (1.0 - momentum) * mu
        state.running_var = momentum * state.running_var + (1.0 - momentum) * var
    else:
        mu = state.running_mean
        var = state.running_var

    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = gamma.data * xhat + beta.data

    def vjp(g):
        gx = ggamma = gbeta = None
        if gamma.requires_grad:
            ggamma = (g * xhat).sum(axis=0, keepdims=True)
        if beta.requires_grad:
            gbeta = g.sum(axis=0, keepdims=True)
        if x.requires_grad:
            dxhat = g * gamma.data
            if training:
                m1 = dxhat.mean(axis=0, keepdims=True)
                m2 = (dxhat * xhat).mean(axis=0, keepdims=True)
                gx = inv * (dxhat - m1 - xhat * m2)
            else:
                gx = dxhat * inv
        return gx, ggamma, gbeta

    return _result(data, "batch_norm", (x, gamma, beta), vjp)


# ---------------------------------------------------------------------------
# structure: slicing, concatenation, token folding

def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= x.data.shape[1]):
        raise ShapeError("slice_cols", x.data.shape, (start, stop))
    data = x.data[:, start:stop].copy()

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return _result(data, "slice_cols", (x,), vjp)


def concat(tensors) -> Tensor:
    """Column-wise concatenation of same-height tensors."""
    tensors = list(tensors)
    if not tensors:
        raise ParameterError("concat: empty input list")
    n = tensors[0].data.shape[0]
    for t in tensors:
        if t.data.shape[0] != n:
            raise ShapeError("concat", *(t.data.shape for t in tensors))
    widths = [t.data.shape[1] for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=1)
    offsets = np.cumsum([0] + widths)

    def vjp(g):
        return tuple(
            g[:, offsets[i]:offsets[i + 1]] if t.requires_grad else None
            for i, t in enumerate(tensors)
        )

    return _result(data, "concat", tensors, vjp)


def _token_dims(op: str, shape, n_tokens: int):
    n, w = shape
    if n_tokens < 1 or w % n_tokens != 0:
        raise ShapeError(op, shape, (n_tokens,))
    return n, n_tokens, w // n_tokens


def split_tokens(x: Tensor, n_tokens: int) -> Tensor:
    """(batch, tokens*d) -> (batch*tokens, d); row-major, zero reordering."""
    n, t, d = _token_dims("split_tokens", x.data.shape, n_tokens)
    data = x.data.reshape(n * t, d).copy()

    def vjp(g):
        return (g.reshape(n, t * d),)

    return _result(data, "split_tokens", (x,), vjp)


def merge_tokens(x: Tensor, n_tokens: int) -> Tensor:
    """(batch*tokens, d) -> (batch, tokens*d); inverse of split_tokens."""
    nt, d = x.data.shape
    if n_tokens < 1 or nt % n_tokens != 0:
        raise ShapeError("merge_tokens", x.data.shape, (n_tokens,))
    n = nt // n_tokens
    data = x.data.reshape(n, n_tokens * d).copy()

    def vjp(g):
        return (g.reshape(nt, d),)

    return _result(data, "merge_tokens", (x,), vjp)


def mean_pool(x: Tensor, n_tokens: int) -> Tensor:
    """Average over the folded token axis: (batch, tokens*d) -> (batch, d)."""
    n, t, d = _token_dims("mean_pool", x.data.shape, n_tokens)
    data = x.data.reshape(n, t, d).mean(axis=1)

    def vjp(g):
        gx = np.repeat(g[:, None, :] / t, t, axis=1)
        return (gx.reshape(n, t * d),)

    return _result(data, "mean_pool", (x,), vjp)


# ---------------------------------------------------------------------------
# attention

def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, n_tokens: int, n_heads: int) -> Tensor:
    """Multi-head scaled dot-product attention over folded token matrices.

    q, k, v: (batch, tokens*d_model) with d_model divisible by n_heads.
    All tokens attend to all tokens (no masking).
    """
    if q.data.shape != k.data.shape or q.data.shape != v.data.shape:
        raise ShapeError("scaled_dot_attention", q.data.shape, k.data.shape, v.data.shape)
    n, t, d_model = _token_dims("scaled_dot_attention", q.data.shape, n_tokens)
    if n_heads < 1 or d_model % n_heads != 0:
        raise ShapeError("scaled_dot_attention", q.data.shape, (n_heads,))
    dh = d_model // n_heads
    scale = 1.0 / np.sqrt(dh)

    def heads(arr):
        # (n, t*d_model) -> (n, heads, tokens, dh)
        return arr.reshape(n, t, n_heads, dh).transpose(0, 2, 1, 3)

    def unheads(arr):
        return arr.transpose(0, 2, 1, 3).reshape(n, t * d_model)

    qh, kh, vh = heads(q.data), heads(k.data), heads(v.data)
    scores = np.einsum("bhtd,bhsd->bhts", qh, kh) * scale
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=-1, keepdims=True)
    out = np.einsum("bhts,bhsd->bhtd", attn, vh)
    data = unheads(out)

    def vjp(g):
        go = heads(g)
        gq = gk = gv = None
        if v.requires_grad:
            gv = unheads(np.einsum("bhts,bhtd->bhsd", attn, go))
        g_attn = np.einsum("bhtd,bhsd->bhts", go, vh)
        g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
        if q.requires_grad:
            gq = unheads(np.einsum("bhts,bhsd->bhtd", g_scores, kh) * scale)
        if k.requires_grad:
            gk = unheads(np.einsum("bhts,bhtd->bhsd", g_scores, qh) * scale)
        return gq, gk, gv

    return _result(data, "scaled_dot_attention", (q, k, v), vjp)


# ---------------------------------------------------------------------------
# losses and sampling

def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy on raw logits; numerically stable.

    `targets` is a constant array of 0/1 values shaped like `logits`.
    """
    y = targets.data if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    if y.shape != logits.data.shape:
        raise ShapeError("bce_with_logits", logits.data.shape, y.shape)
    z = logits.data
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    data = np.array([[per.mean()]])

    def vjp(g):
        return (g[0, 0] * (_sigmoid_raw(z) - y) / z.size,)

    return _result(data, "bce_with_logits", (logits,), vjp)


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    """g = -log(-log(u)) with u clamped into [1e-12, 1 - 1e-12]."""
    u = np.clip(rng.random(shape), 1e-12, 1.0 - 1e-12)
    return -np.log(-np.log(u))


def gumbel_softmax(
    logits: Tensor,
    tau: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> Tensor:
    """Row-wise relaxed categorical sample: softmax((logits + g)/tau).

    Differentiable w.r.t. `logits`; the Gumbel draw is a constant. Pass a
    pre-drawn `noise` array to freeze the sample (grad checks, replays).
    """
    if tau <= 0.0:
        raise ParameterError(f"gumbel_softmax: tau must be > 0, got {tau}")
    if logits.data.shape[1] < 2:
        raise ShapeError("gumbel_softmax", logits.data.shape)
    if noise is None:
        if rng is None:
            raise ParameterError("gumbel_softmax: provide rng or noise")
        noise = gumbel_noise(logits.data.shape, rng)
    elif noise.shape != logits.data.shape:
        raise ShapeError("gumbel_softmax", logits.data.shape, noise.shape)

    s = _softmax_raw((logits.data + noise) / tau)

    def vjp(g):
        inner = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - inner) / tau,)

    return _result(s, "gumbel_softmax", (logits,), vjp)


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar projection sum(x * weights); used to scalarise outputs."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.data.shape:
        raise ShapeError("weighted_sum", x.data.shape, w.shape)
    data = np.array([[float((x.data * w).sum())]])

    def vjp(g):
        return (g[0, 0] * w,)

    return _result(data, "weighted_sum", (x,), vjp)
