"""Encode raw rows into the numeric representation and back.

Continuous columns are min-max scaled to [0, 1] (bounds come from the split
the schema was inferred on), categoricals become one-hot groups, binaries
map to {0, 1}. The encoded matrix is the codomain of the generator's output
activations, so real and synthetic data share one representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DataError, ShapeError
from .schema import TableSchema

PROVENANCES = ("real", "synthetic")


@dataclass(frozen=True)
class EncodedMatrix:
    """rows x n_feat float64 values plus schema and immutable provenance."""

    values: np.ndarray
    schema: TableSchema
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DataError(f"EncodedMatrix: provenance must be one of {PROVENANCES}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.schema.n_feat:
            raise ShapeError("encoded_matrix", arr.shape, (self.schema.n_feat,))
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def features_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Split out the target column: (features without target, 0/1 labels).

        Labels are 1 for the schema's positive_class.
        """
        start, stop = self.schema.target_slice()
        tcol = self.schema.column(self.schema.target)
        raw01 = self.values[:, start] > 0.5
        positive_is_one = tcol.values[1] == self.schema.positive_class
        y = raw01 if positive_is_one else ~raw01
        X = np.concatenate([self.values[:, :start], self.values[:, stop:]], axis=1)
        return X, y.astype(np.int64)


def encode(rows: Sequence[Sequence], schema: TableSchema, provenance: str = "real") -> EncodedMatrix:
    """Encode raw rows (cells as strings or numbers) against `schema`."""
    layout = schema.layout()
    n = len(rows)
    out = np.zeros((n, schema.n_feat))
    for j, (col, (name, kind, start, stop)) in enumerate(zip(schema.columns, layout)):
        cells = [row[j] for row in rows]
        if kind == "continuous":
            try:
                vals = np.array([float(c) for c in cells])
            except (TypeError, ValueError) as exc:
                raise DataError(f"column {name!r}: unparseable continuous cell: {exc}") from None
            scaled = (vals - col.vmin) / (col.vmax - col.vmin)
            out[:, start] = np.clip(scaled, 0.0, 1.0)
        elif kind == "categorical":
            index = {c: i for i, c in enumerate(col.categories)}
            for i, c in enumerate(cells):
                key = _raw_key(c, index)
                if key is None:
                    raise DataError(f"column {name!r}: unseen category {c!r}")
                out[i, start + index[key]] = 1.0
        else:
            index = {v: b for b, v in zip((0.0, 1.0), col.values)}
            for i, c in enumerate(cells):
                key = _raw_key(c, index)
                if key is None:
                    raise DataError(f"column {name!r}: unseen binary value {c!r}")
                out[i, start] = index[key]
    return EncodedMatrix(out, schema, provenance)


def _raw_key(cell, index: dict):
    """Category lookup tolerant of numeric formatting (e.g. '1' vs '1.0')."""
    c = str(cell)
    if c in index:
        return c
    try:
        f = float(c)
    except (TypeError, ValueError):
        return None
    for key in index:
        try:
            if float(key) == f:
                return key
        except (TypeError, ValueError):
            continue
    return None


@dataclass
class DecodeStats:
    degenerate_onehot: int = 0
    by_column: dict = field(default_factory=dict)


def decode(matrix: EncodedMatrix | np.ndarray, schema: TableSchema | None = None,
           stats: DecodeStats | None = None) -> list[list[str]]:
    """Invert `encode`: continuous by the affine map, one-hot by argmax,
    binary at threshold 0.5.

    An all-zero (or non-positive) one-hot group decodes to category 0 and
    increments `stats.degenerate_onehot` when a stats collector is passed.
    """
    if isinstance(matrix, EncodedMatrix):
        values = matrix.values
        schema = matrix.schema
    else:
        if schema is None:
            raise DataError("decode: schema required for a bare array")
        values = np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != schema.n_feat:
        raise ShapeError("decode", values.shape, (schema.n_feat,))

    n = values.shape[0]
    rows = [[None] * len(schema.columns) for _ in range(n)]
    for j, (col, (name, kind, start, stop)) in enumerate(zip(schema.columns, schema.layout())):
        block = values[:, start:stop]
        if kind == "continuous":
            raw = col.vmin + block[:, 0] * (col.vmax - col.vmin)
            for i in range(n):
                rows[i][j] = _format_number(raw[i])
        elif kind == "categorical":
            idx = block.argmax(axis=1)
            degenerate = block.max(axis=1) <= 0.0
            if stats is not None and degenerate.any():
                cnt = int(degenerate.sum())
                stats.degenerate_onehot += cnt
                stats.by_column[name] = stats.by_column.get(name, 0) + cnt
            for i in range(n):
                rows[i][j] = col.categories[idx[i]]
        else:
            for i in range(n):
                rows[i][j] = col.values[1] if block[i, 0] > 0.5 else col.values[0]
    return rows


def _format_number(x: float) -> str:
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
