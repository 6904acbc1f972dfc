"""Column typing, schema inference and CSV ingestion.

Kind inference, in order: exactly 2 distinct raw values -> binary; at most
`max_categories` distinct values that are non-numeric or all integral ->
categorical; otherwise numeric-parseable -> continuous. Overrides force a
column's kind. Rows with missing cells are dropped at ingestion and counted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import DataError, ParameterError

MISSING_TOKENS = {"", "?", "NA", "N/A", "na", "n/a", "NaN", "nan", "NULL", "null"}

KINDS = ("continuous", "categorical", "binary")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    vmin: float | None = None
    vmax: float | None = None
    categories: tuple = ()
    values: tuple = ()  # binary: raw values mapping to (0, 1)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"ColumnSpec {self.name}: unknown kind {self.kind!r}")
        if self.kind == "continuous":
            if self.vmin is None or self.vmax is None or not self.vmin < self.vmax:
                raise DataError(
                    f"column {self.name!r}: continuous needs min < max, got "
                    f"[{self.vmin}, {self.vmax}] (constant columns are rejected)"
                )
        elif self.kind == "categorical":
            if len(self.categories) < 3 or len(set(self.categories)) != len(self.categories):
                raise DataError(
                    f"column {self.name!r}: categorical needs >= 3 unique categories"
                )
        else:
            if len(self.values) != 2 or self.values[0] == self.values[1]:
                raise DataError(f"column {self.name!r}: binary needs exactly 2 distinct values")

    @property
    def width(self) -> int:
        return len(self.categories) if self.kind == "categorical" else 1


@dataclass(frozen=True)
class TableSchema:
    columns: tuple
    target: str
    positive_class: str

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("schema: duplicate column names")
        tcol = self.column(self.target)
        if tcol.kind != "binary":
            raise DataError(f"schema: target {self.target!r} must be binary, is {tcol.kind}")
        if self.positive_class not in tcol.values:
            raise DataError(
                f"schema: positive_class {self.positive_class!r} not among target values {tcol.values}"
            )

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError(f"schema: no column named {name!r}")

    @property
    def n_feat(self) -> int:
        return sum(c.width for c in self.columns)

    def layout(self) -> list[tuple[str, str, int, int]]:
        """Per-column (name, kind, start, stop) slices into the encoded matrix."""
        out = []
        start = 0
        for c in self.columns:
            out.append((c.name, c.kind, start, start + c.width))
            start += c.width
        return out

    def target_slice(self) -> tuple[int, int]:
        for name, _, start, stop in self.layout():
            if name == self.target:
                return start, stop
        raise DataError(f"schema: no column named {self.target!r}")

    def with_positive_class(self, positive_class: str) -> "TableSchema":
        return TableSchema(self.columns, self.target, positive_class)

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            d: dict = {"name": c.name, "kind": c.kind}
            if c.kind == "continuous":
                d["min"] = c.vmin
                d["max"] = c.vmax
            elif c.kind == "categorical":
                d["categories"] = list(c.categories)
            else:
                d["values"] = list(c.values)
            cols.append(d)
        return {
            "format": "privtab.schema",
            "version": 1,
            "columns": cols,
            "target": self.target,
            "positive_class": self.positive_class,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_dict(doc: dict) -> "TableSchema":
        if doc.get("format") != "privtab.schema":
            raise DataError("schema document: missing or wrong format tag")
        cols = []
        for d in doc["columns"]:
            kind = d["kind"]
            if kind == "continuous":
                cols.append(ColumnSpec(d["name"], kind, vmin=d["min"], vmax=d["max"]))
            elif kind == "categorical":
                cols.append(ColumnSpec(d["name"], kind, categories=tuple(d["categories"])))
            else:
                cols.append(ColumnSpec(d["name"], kind, values=tuple(d["values"])))
        return TableSchema(tuple(cols), doc["target"], doc["positive_class"])


@dataclass
class IngestReport:
    n_rows: int = 0
    n_dropped_missing: int = 0
    dropped_row_numbers: list = field(default_factory=list)


def read_csv(source) -> tuple[list[str], list[list[str]]]:
    """RFC-4180 CSV with a mandatory header row; returns (header, rows)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("csv: empty input, header row is mandatory") from None
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(
                f"csv: line {lineno}: expected {len(header)} cells, got {len(row)}"
            )
        rows.append([cell.strip() for cell in row])
    return [h.strip() for h in header], rows


def drop_missing(rows: Sequence[Sequence[str]], report: IngestReport | None = None) -> list:
    """Drop rows containing a missing-value token; counts go to `report`."""
    kept = []
    for i, row in enumerate(rows):
        if any(cell in MISSING_TOKENS for cell in row):
            if report is not None:
                report.n_dropped_missing += 1
                report.dropped_row_numbers.append(i)
        else:
            kept.append(list(row))
    if report is not None:
        report.n_rows = len(kept)
    return kept


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _is_integral(cell: str) -> bool:
    try:
        return float(cell) == int(float(cell))
    except (ValueError, OverflowError):
        return False


def _infer_column(name: str, cells: list[str], forced: str | None, max_categories: int) -> ColumnSpec:
    distinct = sorted(set(cells))
    numeric = all(_is_float(c) for c in cells)

    if forced is not None:
        kind = forced
    elif len(distinct) < 2:
        raise DataError(f"column {name!r}: constant column (single distinct value)")
    elif len(distinct) == 2:
        kind = "binary"
    elif len(distinct) <= max_categories and (not numeric or all(_is_integral(c) for c in cells)):
        kind = "categorical"
    elif numeric:
        kind = "continuous"
    else:
        raise DataError(
            f"column {name!r}: {len(distinct)} distinct non-numeric values exceed the "
            f"categorical cap of {max_categories}; force a kind to override"
        )

    if kind == "continuous":
        bad = next((c for c in cells if not _is_float(c)), None)
        if bad is not None:
            raise DataError(f"column {name!r}: unparseable cell {bad!r} in continuous column")
        vals = [float(c) for c in cells]
        vmin, vmax = min(vals), max(vals)
        return ColumnSpec(name, "continuous", vmin=vmin, vmax=vmax)
    if kind == "categorical":
        if numeric:
            distinct = sorted(set(cells), key=lambda c: (float(c), c))
        return ColumnSpec(name, "categorical", categories=tuple(distinct))
    if len(distinct) != 2:
        raise DataError(f"column {name!r}: forced binary but found {len(distinct)} distinct values")
    return ColumnSpec(name, "binary", values=tuple(distinct))


def infer_schema(
    source,
    overrides: dict | None = None,
    target: str | None = None,
    positive_class: str | None = None,
    max_categories: int = 20,
    report: IngestReport | None = None,
) -> TableSchema:
    """Infer a TableSchema from a CSV path/handle or (header, rows) pair.

    `target` defaults to the last column; `positive_class` defaults to the
    minority value of the target (ties break toward the later value in
    first-appearance order).
    """
    if isinstance(source, tuple):
        header, rows = source
    else:
        header, rows = read_csv(source)
    rows = drop_missing(rows, report)
    if not rows:
        raise DataError("csv: no usable rows after dropping missing values")
    overrides = dict(overrides or {})
    for name, kind in overrides.items():
        if name not in header:
            raise DataError(f"override for unknown column {name!r}")
        if kind not in KINDS:
            raise ParameterError(f"override for {name!r}: unknown kind {kind!r}")

    columns = []
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        columns.append(_infer_column(name, cells, overrides.get(name), max_categories))

    target = target if target is not None else header[-1]
    if target not in header:
        raise DataError(f"target column {target!r} not in header")
    tcol = columns[header.index(target)]
    if tcol.kind != "binary":
        raise DataError(f"target column {target!r} must be binary, inferred {tcol.kind}")

    if positive_class is None:
        j = header.index(target)
        cells = [row[j] for row in rows]
        first, second = tcol.values
        # first-appearance order for the tie rule
        appearance = sorted(tcol.values, key=lambda v: cells.index(v))
        counts = {v: cells.count(v) for v in tcol.values}
        if counts[first] == counts[second]:
            positive_class = appearance[1]
        else:
            positive_class = min(tcol.values, key=lambda v: counts[v])

    return TableSchema(tuple(columns), target, positive_class)
