"""Synthetic dataset builders for demos, smoke runs and fixtures."""

from __future__ import annotations

import numpy as np

from .tabular.encoding import EncodedMatrix, encode
from .tabular.schema import TableSchema, infer_schema


def two_gaussians(
    n_rows: int = 2000,
    n_features: int = 6,
    separation: float = 2.0,
    positive_frac: float = 0.3,
    pos_std: float = 0.5,
    neg_std: float = 0.5,
    seed: int = 0,
) -> tuple[list[str], list[list[str]]]:
    """Linearly separable two-Gaussian rows: continuous features + binary label.

    Class means sit `separation` apart along every feature with per-class
    noise, so a correct linear direction ranks the classes cleanly; the
    default 30% prevalence mirrors common imbalanced tabular targets.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n_rows * positive_frac))
    labels = np.array([1] * n_pos + [0] * (n_rows - n_pos))
    rng.shuffle(labels)
    stds = np.where(labels[:, None] == 1, pos_std, neg_std)
    means = np.where(labels[:, None] == 1, separation / 2.0, -separation / 2.0)
    X = means + stds * rng.standard_normal((n_rows, n_features))
    header = [f"f{j}" for j in range(n_features)] + ["label"]
    rows = []
    for i in range(n_rows):
        rows.append([f"{v:.6f}" for v in X[i]] + ["pos" if labels[i] else "neg"])
    return header, rows


def mixed_table(
    n_rows: int = 286,
    seed: int = 0,
    positive_frac: float = 0.24,
) -> tuple[list[str], list[list[str]]]:
    """Small mixed-kind table (continuous + categorical + binary + label).

    Shaped like a compact clinical dataset: a couple of hundred rows, modest
    width, imbalanced binary target correlated with the features.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(n_rows * positive_frac))
    labels = np.array([1] * n_pos + [0] * (n_rows - n_pos))
    rng.shuffle(labels)
    cats_a = ("low", "mid", "high")
    cats_b = ("a", "b", "c", "d")
    rows = []
    for i in range(n_rows):
        y = labels[i]
        base = 0.65 if y else 0.35
        x1 = float(np.clip(rng.normal(base, 0.15), 0.0, 1.0))
        x2 = float(np.clip(rng.normal(1.0 - base, 0.2), 0.0, 1.0))
        a = cats_a[int(rng.choice(3, p=[0.2, 0.3, 0.5] if y else [0.5, 0.3, 0.2]))]
        b = cats_b[int(rng.integers(0, 4))]
        flag = "yes" if rng.random() < (0.7 if y else 0.3) else "no"
        rows.append([f"{x1:.5f}", f"{x2:.5f}", a, b, flag, "recur" if y else "clear"])
    header = ["marker1", "marker2", "grade", "site", "node_flag", "outcome"]
    return header, rows


def build_encoded(header, rows, positive_class: str | None = None) -> tuple[TableSchema, EncodedMatrix]:
    schema = infer_schema((header, rows), positive_class=positive_class)
    return schema, encode(rows, schema)
