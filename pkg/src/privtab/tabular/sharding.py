"""Disjoint, exhaustive row sharding for the teacher ensemble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from .encoding import EncodedMatrix


@dataclass(frozen=True)
class ShardView:
    """Read-only rows of exactly one shard; the only path into teacher fits.

    Constructed by ShardSet.view only, so a teacher can never be handed rows
    pooled from two shards through the public surface.
    """

    shard_id: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ShardSet:
    """k pairwise-disjoint index lists covering every row, sizes within 1."""

    shards: tuple
    n_rows: int

    def __post_init__(self):
        object.__setattr__(
            self, "shards", tuple(np.asarray(s, dtype=np.int64) for s in self.shards)
        )

    @property
    def k(self) -> int:
        return len(self.shards)

    def sizes(self) -> list[int]:
        return [int(s.size) for s in self.shards]

    def view(self, matrix: EncodedMatrix, i: int) -> ShardView:
        if not (0 <= i < self.k):
            raise ParameterError(f"shard index {i} outside [0, {self.k})")
        return ShardView(shard_id=i, values=matrix.values[self.shards[i]])


def partition_shards(n_rows: int, k: int, rng: np.random.Generator) -> ShardSet:
    """Random permutation split into k near-equal shards (disjoint, exhaustive)."""
    if k < 1:
        raise ParameterError(f"partition_shards: k must be >= 1, got {k}")
    if k > n_rows:
        raise ParameterError(f"partition_shards: k={k} exceeds n_rows={n_rows}")
    perm = rng.permutation(n_rows)
    return ShardSet(shards=tuple(np.array_split(perm, k)), n_rows=n_rows)
