"""Typed, immutable tabular data with an explicit missing-cell state.

A :class:`Dataset` is an ordered collection of named :class:`Column` objects,
each carrying a :class:`ColumnType`.  Cells that are absent hold the
:data:`MISSING` singleton rather than a sentinel value, so completeness
metrics can never confuse a legitimate value for a gap.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidGroupKey,
    NonCategoricalAttribute,
    ParseError,
    SchemaMismatch,
    UnknownAttribute,
)

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "null"})


class ColumnType(enum.Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"
    BINARY_LABEL = "binary_label"

    @classmethod
    def parse(cls, text: str) -> "ColumnType":
        try:
            return cls(str(text).lower())
        except ValueError:
            raise SchemaMismatch(f"unknown column type {text!r}") from None


class _MissingType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Missing"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (_MissingType, ())


MISSING = _MissingType()


def is_missing(value) -> bool:
    return value is MISSING


def _check_cell(kind: ColumnType, value, name: str):
    if value is MISSING:
        return value
    if kind is ColumnType.CATEGORICAL:
        if not isinstance(value, str):
            raise TypeError(f"column {name!r}: categorical cells must be str, got {value!r}")
        return value
    if kind is ColumnType.NUMERIC:
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise TypeError(f"column {name!r}: numeric cells must be numbers, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"column {name!r}: numeric cells must be finite, got {value!r}")
        return value
    if value in (0, 1) and not isinstance(value, str):
        return int(value)
    raise ValueError(f"column {name!r}: binary label cells must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnType
    values: tuple

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise SchemaMismatch("attribute names must be non-empty strings")
        kind = self.kind if isinstance(self.kind, ColumnType) else ColumnType.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(
            self, "values", tuple(_check_cell(kind, v, self.name) for v in self.values)
        )

    def __len__(self):
        return len(self.values)

    @cached_property
    def observed(self) -> np.ndarray:
        """Boolean mask of non-missing cells."""
        return np.fromiter((v is not MISSING for v in self.values), dtype=bool, count=len(self.values))

    @cached_property
    def array(self) -> np.ndarray:
        """Object array of cells (numeric columns: float array with NaN at gaps)."""
        if self.kind is ColumnType.CATEGORICAL:
            out = np.empty(len(self.values), dtype=object)
            out[:] = self.values
            return out
        return np.array([np.nan if v is MISSING else float(v) for v in self.values], dtype=float)

    @property
    def n_missing(self) -> int:
        return int(len(self.values) - self.observed.sum())

    def observed_values(self) -> list:
        """Sorted distinct non-missing values."""
        return sorted({v for v in self.values if v is not MISSING})


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        if not isinstance(self.name, str) or not self.name:
            raise SchemaMismatch("dataset name must be a non-empty string")
        index = {}
        for i, col in enumerate(cols):
            if col.name in index:
                raise SchemaMismatch(f"duplicate attribute name {col.name!r}")
            index[col.name] = i
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise SchemaMismatch(f"columns have differing lengths {sorted(lengths)}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_columns(cls, name: str, schema: Sequence, data: Mapping[str, Sequence]) -> "Dataset":
        """Build from a ``[(attribute, kind), ...]`` schema and a name -> cells mapping."""
        return cls(name, tuple(Column(a, k, tuple(data[a])) for a, k in schema))

    @classmethod
    def from_rows(cls, name: str, schema: Sequence, rows: Iterable[Sequence]) -> "Dataset":
        rows = [tuple(r) for r in rows]
        cols = []
        for j, (attr, kind) in enumerate(schema):
            cols.append(Column(attr, kind, tuple(r[j] for r in rows)))
        return cls(name, tuple(cols))

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def attributes(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def schema(self) -> list[tuple[str, ColumnType]]:
        return [(c.name, c.kind) for c in self.columns]

    def __contains__(self, attribute) -> bool:
        return attribute in self._index

    def column(self, attribute: str) -> Column:
        try:
            return self.columns[self._index[attribute]]
        except KeyError:
            raise UnknownAttribute(f"unknown attribute {attribute!r}") from None

    def kind(self, attribute: str) -> ColumnType:
        return self.column(attribute).kind

    def values(self, attribute: str) -> tuple:
        return self.column(attribute).values

    def attributes_of_kind(self, kind: ColumnType) -> list[str]:
        return [c.name for c in self.columns if c.kind is kind]

    def require_categorical(self, attribute: str) -> Column:
        col = self.column(attribute)
        if col.kind is not ColumnType.CATEGORICAL:
            raise NonCategoricalAttribute(f"attribute {attribute!r} is {col.kind.value}, not categorical")
        return col

    def row(self, i: int) -> dict:
        return {c.name: c.values[i] for c in self.columns}

    def iter_rows(self):
        return zip(*(c.values for c in self.columns))

    def missing_count(self) -> int:
        return sum(c.n_missing for c in self.columns)

    def take(self, rows: Iterable[int]) -> "Dataset":
        """New dataset holding ``rows`` in the given order."""
        rows = list(rows)
        cols = tuple(Column(c.name, c.kind, tuple(c.values[i] for i in rows)) for c in self.columns)
        return Dataset(self.name, cols)

    def with_column(self, attribute: str, kind: ColumnType, values: Sequence) -> "Dataset":
        """Replace ``attribute`` if present, else append it."""
        new = Column(attribute, kind, tuple(values))
        if len(new) != self.n_rows and self.columns:
            raise SchemaMismatch(f"column {attribute!r} has {len(new)} cells, dataset has {self.n_rows} rows")
        cols = list(self.columns)
        if attribute in self._index:
            cols[self._index[attribute]] = new
        else:
            cols.append(new)
        return Dataset(self.name, tuple(cols))

    def append_rows(self, rows: Iterable[Mapping]) -> "Dataset":
        """Append rows given as attribute -> value mappings; absent attributes become Missing."""
        rows = list(rows)
        cols = []
        for c in self.columns:
            extra = tuple(r.get(c.name, MISSING) for r in rows)
            cols.append(Column(c.name, c.kind, c.values + extra))
        return Dataset(self.name, tuple(cols))

    def renamed(self, name: str) -> "Dataset":
        return Dataset(name, self.columns)


@dataclass(frozen=True, order=True)
class GroupKey:
    """Conjunction of ``attribute = value`` terms; the empty key matches every row."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple(sorted((str(a), str(v)) for a, v in self.terms))
        attrs = [a for a, _ in terms]
        if len(set(attrs)) != len(attrs):
            raise InvalidGroupKey(f"more than one term per attribute in {terms}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, mapping: Mapping[str, str] | None = None, **kwargs) -> "GroupKey":
        items = dict(mapping or {})
        items.update(kwargs)
        return cls(tuple(items.items()))

    @property
    def attributes(self) -> list[str]:
        return [a for a, _ in self.terms]

    def as_dict(self) -> dict:
        return dict(self.terms)

    def union(self, other: "GroupKey") -> "GroupKey":
        return GroupKey(self.terms + tuple(t for t in other.terms if t not in self.terms))

    def validate(self, ds: Dataset) -> None:
        for attr, _ in self.terms:
            ds.require_categorical(attr)

    def __str__(self):
        if not self.terms:
            return "<all>"
        return ",".join(f"{a}={v}" for a, v in self.terms)


def group_mask(ds: Dataset, g: GroupKey) -> np.ndarray:
    mask = np.ones(ds.n_rows, dtype=bool)
    for attr, value in g.terms:
        mask &= ds.require_categorical(attr).array == value
    return mask


def rows_matching(ds: Dataset, g: GroupKey) -> frozenset:
    """Indices of rows whose cells equal every term of ``g``.

    Rows with a missing cell in a term attribute never match.
    """
    g.validate(ds)
    return frozenset(int(i) for i in np.flatnonzero(group_mask(ds, g)))


def _value_space(ds: Dataset, attributes: Sequence[str], value_extensions=None) -> list[list[str]]:
    if len(set(attributes)) != len(attributes):
        raise InvalidGroupKey(f"duplicate attributes in {list(attributes)}")
    extensions = value_extensions or {}
    space = []
    for attr in attributes:
        col = ds.require_categorical(attr)
        space.append(sorted(set(col.observed_values()) | set(extensions.get(attr, ()))))
    return space


def group_counts(ds: Dataset, attributes: Sequence[str]) -> Counter:
    """Counter of value tuples over rows fully observed on ``attributes``."""
    cols = [ds.require_categorical(a).values for a in attributes]
    if not cols:
        return Counter({(): ds.n_rows})
    return Counter(t for t in zip(*cols) if MISSING not in t)


def enumerate_groups(ds: Dataset, attributes: Sequence[str], value_extensions=None) -> list[tuple[GroupKey, int]]:
    """Every combination of observed values over ``attributes`` with its row count.

    Zero-count combinations are included; rows missing any listed attribute
    are not counted.
    """
    space = _value_space(ds, attributes, value_extensions)
    counts = group_counts(ds, attributes)
    out = []
    for combo in itertools.product(*space):
        out.append((GroupKey(tuple(zip(attributes, combo))), counts.get(combo, 0)))
    return out


def _parse_cell(token: str, kind: ColumnType, row: int, attr: str, missing_tokens):
    if token in missing_tokens:
        return MISSING
    if kind is ColumnType.CATEGORICAL:
        return token
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"row {row}, column {attr!r}: cannot parse {token!r} as a number", row, attr) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {attr!r}: non-finite value {token!r}", row, attr)
    if kind is ColumnType.BINARY_LABEL:
        if value not in (0.0, 1.0):
            raise ParseError(f"row {row}, column {attr!r}: binary label must be 0 or 1, got {token!r}", row, attr)
        return int(value)
    return value


def load_csv(path, schema: Sequence, missing_tokens=None, name: str | None = None) -> Dataset:
    """Read an RFC 4180 CSV file with a header row into a :class:`Dataset`.

    ``schema`` is an ordered ``[(attribute, ColumnType), ...]`` list that must
    match the header exactly.  Cells equal to one of ``missing_tokens`` become
    :data:`MISSING`; unparseable numbers raise :class:`ParseError` with the
    zero-based data row and the attribute name.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    tokens = DEFAULT_MISSING_TOKENS if missing_tokens is None else frozenset(missing_tokens)
    schema = [(a, k if isinstance(k, ColumnType) else ColumnType.parse(k)) for a, k in schema]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: empty file, header row required") from None
        expected = [a for a, _ in schema]
        if header != expected:
            raise SchemaMismatch(f"{path}: header {header} does not match schema {expected}")
        cells = [[] for _ in schema]
        for r, record in enumerate(reader):
            if len(record) != len(schema):
                raise SchemaMismatch(f"{path}: row {r} has {len(record)} fields, expected {len(schema)}")
            for j, (token, (attr, kind)) in enumerate(zip(record, schema)):
                cells[j].append(_parse_cell(token, kind, r, attr, tokens))
    cols = tuple(Column(a, k, tuple(c)) for (a, k), c in zip(schema, cells))
    return Dataset(name or path.stem, cols)


def format_cell(value) -> str:
    if value is MISSING:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(ds: Dataset, path) -> Path:
    """Write ``ds`` so that :func:`load_csv` with the same schema reproduces it exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ds.attributes)
        for row in ds.iter_rows():
            writer.writerow([format_cell(v) for v in row])
    return path
