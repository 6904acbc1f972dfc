"""Downstream classifiers for the train-on-synthetic, test-on-real harness.

Five from-scratch binary classifiers behind one interface: fit on (X, y),
score(X) in [0, 1] read as P(positive). Hyperparameters are fixed constants,
not tuned per dataset: logreg mirrors the teacher fit; decision tree is
CART/Gini with max depth 8 and min leaf 5; random forest is 50 bootstrap
trees with sqrt(n_feat) features per split; adaboost is 50 depth-1 stumps
with discrete boosting; the MLP is one hidden layer of width 64 trained
with Adam at lr 1e-3 for up to 200 epochs with early stop on plateau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diffcore as dc
from ..diffcore.ops import _sigmoid_raw
from ..errors import DegradedDataError, ParameterError
from ..models.initialization import kaiming_uniform, xavier_uniform

KINDS = ("logreg", "decision_tree", "random_forest", "adaboost", "mlp")

TREE_MAX_DEPTH = 8
TREE_MIN_LEAF = 5
FOREST_TREES = 50
ADABOOST_ROUNDS = 50
MLP_HIDDEN = 64
MLP_LR = 1e-3
MLP_EPOCHS = 200
MLP_PATIENCE = 10
MLP_TOL = 1e-6


def _check_two_classes(y: np.ndarray) -> None:
    if np.unique(y).size < 2:
        raise DegradedDataError("training sample contains a single class")


# ---------------------------------------------------------------------------
# logistic regression (same procedure as the teacher fit)

class LogisticModel:
    kind = "logreg"

    def __init__(self, weights: np.ndarray, bias: float, mu: np.ndarray, sd: np.ndarray):
        self.weights = weights
        self.bias = bias
        self.mu = mu
        self.sd = sd

    def score(self, X: np.ndarray) -> np.ndarray:
        Xs = (np.asarray(X, dtype=np.float64) - self.mu) / self.sd
        return _sigmoid_raw(Xs @ self.weights + self.bias)


def fit_logreg(X: np.ndarray, y: np.ndarray, l2=1e-3, iters=200, lr=0.5) -> LogisticModel:
    _check_two_classes(y)
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0.0] = 1.0
    Xs = (X - mu) / sd
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(iters):
        p = _sigmoid_raw(Xs @ w + b)
        resid = p - y
        w -= lr * (Xs.T @ resid / len(y) + l2 * w)
        b -= lr * resid.mean()
    return LogisticModel(w, b, mu, sd)


# ---------------------------------------------------------------------------
# CART decision tree (Gini)

@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    prob: float = 0.5  # leaf: P(positive)


def _best_split(X, y, feature_ids, min_leaf):
    """Best (feature, threshold, weighted-gini) over candidate features."""
    n = y.size
    total_pos = y.sum()
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        ys = y[order]
        pos_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        valid = xs[1:] != xs[:-1]
        valid &= (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        pos_right = total_pos - pos_left
        n_right = n - n_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        gini[~valid] = np.inf
        i = int(np.argmin(gini))
        if best is None or gini[i] < best[2]:
            threshold = 0.5 * (xs[i] + xs[i + 1])
            best = (f, threshold, float(gini[i]))
    return best


class DecisionTreeModel:
    kind = "decision_tree"

    def __init__(self, root: _Node):
        self.root = root

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            node = self.root
            while node.feature >= 0:
                node = node.left if X[i, node.feature] <= node.threshold else node.right
            out[i] = node.prob
        return out


def _grow_tree(X, y, depth, max_depth, min_leaf, rng=None, n_sub=None) -> _Node:
    node = _Node(prob=float(y.mean()))
    if depth >= max_depth or y.size < 2 * min_leaf or y.min() == y.max():
        return node
    d = X.shape[1]
    if n_sub is not None and rng is not None and n_sub < d:
        feature_ids = np.sort(rng.choice(d, size=n_sub, replace=False))
    else:
        feature_ids = np.arange(d)
    parent_gini = 2 * node.prob * (1 - node.prob)
    best = _best_split(X, y, feature_ids, min_leaf)
    if best is None or best[2] >= parent_gini - 1e-12:
        return node
    f, thr, _ = best
    mask = X[:, f] <= thr
    node.feature = f
    node.threshold = thr
    node.left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, min_leaf, rng, n_sub)
    node.right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, min_leaf, rng, n_sub)
    return node


def fit_decision_tree(X, y, max_depth=TREE_MAX_DEPTH, min_leaf=TREE_MIN_LEAF) -> DecisionTreeModel:
    _check_two_classes(y)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return DecisionTreeModel(_grow_tree(X, y, 0, max_depth, min_leaf))


# ---------------------------------------------------------------------------
# random forest

class RandomForestModel:
    kind = "random_forest"

    def __init__(self, trees: list):
        self.trees = trees

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.score(X) for t in self.trees], axis=0)


def fit_random_forest(X, y, n_trees=FOREST_TREES, seed=0) -> RandomForestModel:
    _check_two_classes(y)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    n_sub = max(1, int(np.sqrt(d)))
    tree_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_trees)]
    trees = []
    for rng in tree_rngs:
        idx = rng.integers(0, n, size=n)  # bootstrap rows
        yb = y[idx]
        if yb.min() == yb.max():  # degenerate bootstrap: single-leaf tree
            trees.append(DecisionTreeModel(_Node(prob=float(yb.mean()))))
            continue
        root = _grow_tree(X[idx], yb, 0, TREE_MAX_DEPTH, TREE_MIN_LEAF, rng, n_sub)
        trees.append(DecisionTreeModel(root))
    return RandomForestModel(trees)


# ---------------------------------------------------------------------------
# adaboost with decision stumps

@dataclass
class _Stump:
    feature: int
    threshold: float
    polarity: int  # +1: predict +1 above threshold; -1: predict +1 below

    def predict(self, X: np.ndarray) -> np.ndarray:
        above = X[:, self.feature] > self.threshold
        pred = np.where(above, self.polarity, -self.polarity)
        return pred.astype(np.float64)


def _fit_stump(X, ypm, w):
    """Weighted-error-minimising stump; ypm in {-1, +1}, w normalised."""
    n, d = X.shape
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        wy = (w * ypm)[order]
        # err(polarity=+1, cut after i) = w[+1s below] + w[-1s above]
        below_pos = np.concatenate([[0.0], np.cumsum(np.maximum(wy, 0.0))])
        below_neg = np.concatenate([[0.0], np.cumsum(np.maximum(-wy, 0.0))])
        err_plus = below_pos + (below_neg[-1] - below_neg)
        err_minus = (below_pos[-1] - below_pos) + below_neg
        valid = np.ones(n + 1, dtype=bool)
        valid[1:n] = xs[1:] != xs[:-1]  # cuts only between distinct values
        for errs, pol in ((err_plus, 1), (err_minus, -1)):
            masked = np.where(valid, errs, np.inf)
            i = int(np.argmin(masked))
            if best is None or masked[i] < best[0] - 1e-15:
                if i == 0:
                    thr = xs[0] - 1.0
                elif i == n:
                    thr = xs[-1] + 1.0
                else:
                    thr = 0.5 * (xs[i - 1] + xs[i])
                best = (float(masked[i]), _Stump(f, thr, pol))
    return best


class AdaBoostModel:
    kind = "adaboost"

    def __init__(self, stumps: list, alphas: list):
        self.stumps = stumps
        self.alphas = alphas

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(X.shape[0])
        for stump, alpha in zip(self.stumps, self.alphas):
            out += alpha * stump.predict(X)
        return out

    def score(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid_raw(2.0 * self.decision(X))  # logistic link on the margin


def fit_adaboost(X, y, rounds=ADABOOST_ROUNDS) -> AdaBoostModel:
    _check_two_classes(y)
    X = np.asarray(X, dtype=np.float64)
    ypm = np.where(np.asarray(y) > 0, 1.0, -1.0)
    n = ypm.size
    w = np.full(n, 1.0 / n)
    stumps, alphas = [], []
    for _ in range(rounds):
        fitted = _fit_stump(X, ypm, w)
        if fitted is None:
            break
        err, stump = fitted
        err = min(max(err, 1e-10), 1.0 - 1e-10)
        if err >= 0.5 and stumps:
            break  # no remaining edge
        alpha = 0.5 * np.log((1.0 - err) / err)
        pred = stump.predict(X)
        w = w * np.exp(-alpha * ypm * pred)
        w /= w.sum()
        stumps.append(stump)
        alphas.append(float(alpha))
        if err <= 1e-10:
            break
    return AdaBoostModel(stumps, alphas)


# ---------------------------------------------------------------------------
# single-hidden-layer MLP on the autodiff engine

class MlpModel:
    kind = "mlp"

    def __init__(self, w1, b1, w2, b2):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        h = np.maximum(X @ self.w1 + self.b1, 0.0)
        return _sigmoid_raw(h @ self.w2 + self.b2).reshape(-1)


def fit_mlp(X, y, seed=0, hidden=MLP_HIDDEN, lr=MLP_LR, epochs=MLP_EPOCHS) -> MlpModel:
    _check_two_classes(y)
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    w1 = dc.Tensor(kaiming_uniform(d, hidden, rng), requires_grad=True)
    b1 = dc.Tensor(np.zeros((1, hidden)), requires_grad=True)
    w2 = dc.Tensor(xavier_uniform(hidden, 1, rng), requires_grad=True)
    b2 = dc.Tensor(np.zeros((1, 1)), requires_grad=True)
    params = [w1, b1, w2, b2]
    opt = dc.Adam(params, lr=lr, beta1=0.9, beta2=0.999)
    x_t = dc.constant(X)
    best = np.inf
    stale = 0
    for _ in range(epochs):
        opt.zero_grad()
        h = dc.relu(dc.add(dc.matmul(x_t, w1), b1))
        logits = dc.add(dc.matmul(h, w2), b2)
        loss = dc.bce_with_logits(logits, targets)
        value = float(loss.data[0, 0])
        loss.backward()
        opt.step()
        if value < best - MLP_TOL:
            best = value
            stale = 0
        else:
            stale += 1
            if stale >= MLP_PATIENCE:
                break  # plateau
    return MlpModel(w1.data.copy(), b1.data.copy(), w2.data.copy(), b2.data.copy())


# ---------------------------------------------------------------------------

class ConstantModel:
    """Prior-rate scorer substituted for degraded (single-class) fits."""

    kind = "constant"

    def __init__(self, rate: float):
        self.rate = rate

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(X).shape[0], self.rate)


def fit_downstream(kind: str, X, y, seed: int = 0):
    """Fit one classifier by kind; single-class y raises DegradedDataError."""
    if kind == "logreg":
        return fit_logreg(X, y)
    if kind == "decision_tree":
        return fit_decision_tree(X, y)
    if kind == "random_forest":
        return fit_random_forest(X, y, seed=seed)
    if kind == "adaboost":
        return fit_adaboost(X, y)
    if kind == "mlp":
        return fit_mlp(X, y, seed=seed)
    raise ParameterError(f"unknown downstream kind {kind!r} (expected one of {KINDS})")
