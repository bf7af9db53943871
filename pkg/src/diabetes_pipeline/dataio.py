"""CSV loading under an explicit column schema.

Numeric columns hold float64 with NaN as the missing marker (empty cells).
Literal zeros are kept as read; ``zero_is_missing`` is honoured by
:func:`missing_mask` so that a load/write/load cycle is lossless.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EncodingError, ParseError, SchemaError

KINDS = ("numeric", "binary_symptom", "categorical_group")
ROLES = ("feature", "target", "group_label", "ignored")

_TRUE_TOKENS = {"yes", "1", "1.0"}
_FALSE_TOKENS = {"no", "0", "0.0"}


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str = "numeric"
    role: str = "feature"
    zero_is_missing: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.zero_is_missing and self.kind != "numeric":
            raise SchemaError(f"column {self.name!r}: zero_is_missing requires kind=numeric")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"name", "kind", "role", "zero_is_missing"}
        if unknown:
            raise SchemaError(f"unknown schema keys {sorted(unknown)}")
        if "name" not in d:
            raise SchemaError("schema entry without a name")
        return cls(
            name=str(d["name"]).strip(),
            kind=d.get("kind", "numeric"),
            role=d.get("role", "feature"),
            zero_is_missing=bool(d.get("zero_is_missing", False)),
        )

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "role": self.role,
                "zero_is_missing": self.zero_is_missing}


def load_schema(path_or_list):
    """Read a schema from a JSON file path or an already-parsed list of dicts."""
    if isinstance(path_or_list, (str, Path)):
        try:
            with open(path_or_list, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read schema {path_or_list}: {exc}") from exc
    else:
        raw = path_or_list
    if not isinstance(raw, list):
        raise SchemaError("schema must be a JSON array of column objects")
    schema = [c if isinstance(c, ColumnSchema) else ColumnSchema.from_dict(c) for c in raw]
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    return schema


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in schema], fh, indent=2)


def validate_schema(schema, stage=None):
    """Stage-specific role constraints: one target for stage1, one group label for stage3."""
    roles = [c.role for c in schema]
    if stage == "stage1" and roles.count("target") != 1:
        raise SchemaError(f"a stage-1 schema needs exactly one target column, found {roles.count('target')}")
    if stage == "stage3" and roles.count("group_label") != 1:
        raise SchemaError(
            f"a stage-3 schema needs exactly one group_label column, found {roles.count('group_label')}"
        )


def _freeze(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularDataset:
    schema: tuple
    columns: dict
    source: str = ""
    row_log: tuple = ()
    row_ids: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if not self.schema:
            raise SchemaError("a dataset needs at least one column")
        lengths = {len(self.columns[c.name]) for c in self.schema}
        if len(lengths) != 1:
            raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        (n,) = lengths
        if n == 0:
            raise SchemaError("a dataset needs at least one row")
        frozen = {c.name: _freeze(self.columns[c.name]) for c in self.schema}
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "columns", frozen)
        object.__setattr__(self, "row_log", tuple(self.row_log))
        ids = np.arange(n) if self.row_ids is None else self.row_ids
        object.__setattr__(self, "row_ids", _freeze(ids))

    def equals(self, other):
        """Value equality of schema and cells (NaN equals NaN)."""
        if self.schema != other.schema:
            return False
        for name in self.names:
            a, b = self.columns[name], other.columns[name]
            if a.dtype == object or b.dtype == object:
                if a.dtype != b.dtype or not np.array_equal(a, b):
                    return False
            elif not np.array_equal(a, b, equal_nan=True):
                return False
        return True

    @property
    def n_rows(self):
        return len(self.columns[self.schema[0].name])

    @property
    def names(self):
        return [c.name for c in self.schema]

    def column(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"dataset has no column {name!r}") from None

    def spec(self, name):
        for c in self.schema:
            if c.name == name:
                return c
        raise SchemaError(f"dataset has no column {name!r}")

    def by_role(self, role):
        return [c for c in self.schema if c.role == role]

    @property
    def feature_names(self):
        return [c.name for c in self.by_role("feature")]

    @property
    def target_name(self):
        targets = self.by_role("target")
        if len(targets) != 1:
            raise SchemaError(f"expected exactly one target column, found {len(targets)}")
        return targets[0].name

    def target(self):
        y = np.asarray(self.column(self.target_name), dtype=float)
        if np.any(np.isnan(y)):
            raise SchemaError("target column contains missing values")
        return y.astype(int)

    def feature_matrix(self, names=None):
        names = self.feature_names if names is None else list(names)
        cols = []
        for name in names:
            col = self.column(name)
            if col.dtype == object:
                raise SchemaError(f"column {name!r} is not numeric; encode it first")
            cols.append(col.astype(float))
        return np.column_stack(cols) if cols else np.empty((self.n_rows, 0))

    def missing_mask(self, name):
        """NaN cells, plus literal zeros when the column is flagged zero_is_missing."""
        col = self.column(name)
        if col.dtype == object:
            return np.zeros(len(col), dtype=bool)
        mask = np.isnan(col)
        if self.spec(name).zero_is_missing:
            mask |= col == 0
        return mask

    def take(self, rows, note=None):
        rows = np.asarray(rows, dtype=int)
        log = self.row_log + ((note,) if note else ())
        return TabularDataset(
            schema=self.schema,
            columns={k: v[rows] for k, v in self.columns.items()},
            source=self.source,
            row_log=log,
            row_ids=self.row_ids[rows],
        )

    def replace(self, updates, note=None):
        cols = dict(self.columns)
        cols.update(updates)
        log = self.row_log + ((note,) if note else ())
        return TabularDataset(schema=self.schema, columns=cols, source=self.source,
                              row_log=log, row_ids=self.row_ids)

    def with_schema(self, schema):
        return TabularDataset(schema=tuple(schema), columns=self.columns, source=self.source,
                              row_log=self.row_log, row_ids=self.row_ids)


def _parse_number(text, row, column):
    text = text.strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"cannot parse {text!r} as a number at row {row}, column {column!r}",
            row=row, column=column,
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r} at row {row}, column {column!r}",
                         row=row, column=column)
    return value


def load_csv(path, schema):
    """Load ``path`` into a dataset whose columns follow ``schema`` order.

    Rows are numbered from 1 for the first data row (the header is row 0).
    Binary-symptom columns are kept as stripped strings until
    :func:`encode_binary` runs; numeric-looking binary columns are not
    converted here.
    """
    schema = load_schema(schema)
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        position = {}
        for i, h in enumerate(header):
            if h in position:
                raise SchemaError(f"duplicate header {h!r} in {path}")
            position[h] = i
        missing = [c.name for c in schema if c.name not in position]
        if missing:
            raise SchemaError(f"{path} lacks schema column(s): {', '.join(missing)}")
        values = {c.name: [] for c in schema}
        for row_no, record in enumerate(reader, start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"row {row_no} has {len(record)} cells, header has {len(header)}",
                                 row=row_no)
            for c in schema:
                cell = record[position[c.name]]
                if c.kind == "numeric":
                    values[c.name].append(_parse_number(cell, row_no, c.name))
                else:
                    values[c.name].append(cell.strip())
    columns = {}
    for c in schema:
        if c.kind == "numeric":
            columns[c.name] = np.array(values[c.name], dtype=float)
        else:
            columns[c.name] = np.array(values[c.name], dtype=object)
    if not values[schema[0].name]:
        raise SchemaError(f"{path} has a header but no data rows")
    return TabularDataset(schema=tuple(schema), columns=columns, source=str(path),
                          row_log=(f"loaded {len(values[schema[0].name])} rows from {path}",))


def _format_cell(value):
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def write_csv(dataset, path):
    names = dataset.names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(dataset.n_rows):
            writer.writerow([_format_cell(dataset.columns[n][i]) for n in names])


def encode_binary(dataset):
    """Map Yes/No (any case) and 1/0 tokens in binary-symptom columns to 1.0/0.0."""
    updates = {}
    for c in dataset.schema:
        if c.kind != "binary_symptom":
            continue
        col = dataset.column(c.name)
        if col.dtype != object:
            bad = ~np.isin(col, (0.0, 1.0))
            if np.any(bad):
                raise EncodingError(f"column {c.name!r}: unrecognized value {col[bad][0]!r}",
                                    token=str(col[bad][0]))
            continue
        out = np.empty(len(col))
        for i, token in enumerate(col):
            t = str(token).strip().lower()
            if t in _TRUE_TOKENS:
                out[i] = 1.0
            elif t in _FALSE_TOKENS:
                out[i] = 0.0
            else:
                raise EncodingError(
                    f"column {c.name!r}: unrecognized token {token!r} at row {i + 1}", token=token
                )
        updates[c.name] = out
    if not updates:
        return dataset
    return dataset.replace(updates, note=f"binarised {sorted(updates)}")


def summarize(dataset):
    """Per-column count/missing/min/median/max, plus class balance for the target."""
    summary = {"n_rows": dataset.n_rows, "columns": {}}
    for c in dataset.schema:
        col = dataset.column(c.name)
        entry = {"kind": c.kind, "role": c.role, "count": int(len(col))}
        if col.dtype == object:
            levels, counts = np.unique(col.astype(str), return_counts=True)
            entry["missing"] = int(np.sum(col.astype(str) == ""))
            entry["levels"] = {str(k): int(v) for k, v in zip(levels, counts)}
        else:
            miss = dataset.missing_mask(c.name)
            present = col[~miss]
            entry["missing"] = int(miss.sum())
            if present.size:
                entry.update(min=float(present.min()), median=float(np.median(present)),
                             max=float(present.max()))
            else:
                entry.update(min=None, median=None, max=None)
        if c.role in ("target", "group_label"):
            keys = col.astype(str) if col.dtype == object else col
            levels, counts = np.unique(keys, return_counts=True)
            total = counts.sum()
            entry["balance"] = {_level_key(k): float(v / total) for k, v in zip(levels, counts)}
        summary["columns"][c.name] = entry
    return summary


def _level_key(k):
    if isinstance(k, (float, np.floating)) and float(k).is_integer():
        return str(int(k))
    return str(k)
