"""Logistic-regression teachers, one per disjoint shard.

Each fit sees exactly one real shard (label 1) against an equal-size batch
of generator samples (label 0): full-batch gradient descent, L2 penalty
1e-3, 200 iterations at learning rate 0.5 on features standardised within
the fit. The standardisation is folded back into the returned weights so
votes run directly on the shared encoding. Fits are deterministic given
their inputs (zero init, fixed iteration count).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore.ops import _sigmoid_raw as _sigmoid
from ..errors import DataError, NumericError, ParameterError, ShapeError
from ..tabular.encoding import EncodedMatrix
from ..tabular.sharding import ShardView

L2_PENALTY = 1e-3
N_ITERS = 200
LEARNING_RATE = 0.5


@dataclass(frozen=True)
class Teacher:
    weights: np.ndarray  # (n_feat,) in encoded-feature space
    bias: float
    shard_id: int


def _as_fake_array(fake) -> np.ndarray:
    if isinstance(fake, EncodedMatrix):
        if fake.provenance != "synthetic":
            raise DataError("fit_teacher: fake shard must carry synthetic provenance")
        return fake.values
    return np.asarray(fake, dtype=np.float64)


def fit_teacher(real: ShardView, fake, warm_start: Teacher | None = None) -> Teacher:
    """Fit one teacher on its shard (label 1) vs generator samples (label 0)."""
    if not isinstance(real, ShardView):
        raise ParameterError("fit_teacher: real rows must come in as a ShardView")
    fake_arr = _as_fake_array(fake)
    if real.n_rows == 0:
        raise DataError("fit_teacher: empty real shard")
    if fake_arr.shape[0] != real.n_rows:
        raise ParameterError(
            f"fit_teacher: fake shard size {fake_arr.shape[0]} != real shard size {real.n_rows}"
        )
    if fake_arr.shape[1] != real.values.shape[1]:
        raise ShapeError("fit_teacher", real.values.shape, fake_arr.shape)

    teachers = fit_teacher_ensemble([real], [fake_arr], warm_start=[warm_start])
    return teachers[0]


def fit_teacher_ensemble(views, fakes, warm_start=None) -> list[Teacher]:
    """Fit all teachers with one vectorised gradient-descent loop.

    Shards whose sizes differ (by at most one row) are grouped by size and
    fitted in stacked batches; results are identical in distribution to
    per-teacher fits and deterministic for fixed inputs.
    """
    views = list(views)
    fakes = [_as_fake_array(f) for f in fakes]
    if len(views) != len(fakes):
        raise ParameterError("fit_teacher_ensemble: views and fakes must align")
    warm_start = list(warm_start) if warm_start is not None else [None] * len(views)

    by_size: dict[int, list[int]] = {}
    for i, (v, f) in enumerate(zip(views, fakes)):
        if not isinstance(v, ShardView):
            raise ParameterError("fit_teacher_ensemble: real rows must come in as ShardViews")
        if v.n_rows == 0:
            raise DataError("fit_teacher_ensemble: empty real shard")
        if f.shape[0] != v.n_rows:
            raise ParameterError(
                f"fit_teacher_ensemble: fake size {f.shape[0]} != real size {v.n_rows}"
            )
        by_size.setdefault(v.n_rows, []).append(i)

    out: list[Teacher | None] = [None] * len(views)
    for size, idxs in by_size.items():
        X = np.stack(
            [np.concatenate([views[i].values, fakes[i]], axis=0) for i in idxs]
        )  # (g, 2m, d)
        y = np.concatenate([np.ones(size), np.zeros(size)])  # shared across the group
        g, n, d = X.shape

        mu = X.mean(axis=1, keepdims=True)
        sd = X.std(axis=1, keepdims=True)
        sd[sd == 0.0] = 1.0
        Xs = (X - mu) / sd

        W = np.zeros((g, d))
        b = np.zeros(g)
        for i_local, i_global in enumerate(idxs):
            ws = warm_start[i_global]
            if ws is not None:
                # warm start expressed in raw space; refold into the new scaling
                W[i_local] = ws.weights * sd[i_local, 0]
                b[i_local] = ws.bias + ws.weights @ mu[i_local, 0]

        for _ in range(N_ITERS):
            p = _sigmoid(np.einsum("gnd,gd->gn", Xs, W) + b[:, None])
            resid = p - y[None, :]
            grad_w = np.einsum("gnd,gn->gd", Xs, resid) / n + L2_PENALTY * W
            grad_b = resid.mean(axis=1)
            W -= LEARNING_RATE * grad_w
            b -= LEARNING_RATE * grad_b
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise NumericError("fit_teacher_ensemble: non-finite weights after fit")

        # fold standardisation back: score = Ws.(x-mu)/sd + b = (Ws/sd).x + (b - Ws.mu/sd)
        W_raw = W / sd[:, 0, :]
        b_raw = b - np.einsum("gd,gd->g", W_raw, mu[:, 0, :])
        for i_local, i_global in enumerate(idxs):
            out[i_global] = Teacher(
                weights=W_raw[i_local].copy(),
                bias=float(b_raw[i_local]),
                shard_id=views[i_global].shard_id,
            )
    return out  # type: ignore[return-value]


def teacher_vote(teacher: Teacher, x: np.ndarray) -> int:
    """1 iff sigmoid(w.x + b) > 0.5, i.e. w.x + b > 0 (strict; score 0.5 -> 0)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != teacher.weights.shape[0]:
        raise ShapeError("teacher_vote", x.shape, teacher.weights.shape)
    return int(float(teacher.weights @ x + teacher.bias) > 0.0)


def teacher_votes(teacher: Teacher, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != teacher.weights.shape[0]:
        raise ShapeError("teacher_votes", X.shape, teacher.weights.shape)
    return (X @ teacher.weights + teacher.bias > 0.0).astype(np.int64)


def tally_votes(teachers, X: np.ndarray) -> np.ndarray:
    """Per-row count of teachers voting 'real': the tallies n_j."""
    X = np.asarray(X, dtype=np.float64)
    tallies = np.zeros(X.shape[0], dtype=np.int64)
    for t in teachers:
        tallies += teacher_votes(t, X)
    return tallies
