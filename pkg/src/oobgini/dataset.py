"""Typed tabular data: CSV ingestion, categorical encoding, pseudo-features.

Categorical levels are sorted lexicographically (as strings) and coded
``0..k-1``.  Codes are capped at 64 levels so that a left-subset of levels fits
in one unsigned 64-bit mask.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ParseError, SchemaError
from .seeding import make_rng

MAX_LEVELS = 64


@dataclass(frozen=True)
class Continuous:
    def __str__(self) -> str:
        return "continuous"


@dataclass(frozen=True)
class Categorical:
    level_count: int

    def __post_init__(self):
        if self.level_count < 2:
            raise SchemaError(f"categorical feature needs >= 2 levels, got {self.level_count}")
        if self.level_count > MAX_LEVELS:
            raise SchemaError(f"categorical feature has {self.level_count} levels, cap is {MAX_LEVELS}")

    def __str__(self) -> str:
        return f"categorical({self.level_count})"


FeatureKind = Union[Continuous, Categorical]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column-typed table with a binary response.

    ``columns`` hold float64 values for continuous features and int64 codes for
    categorical ones.  ``levels`` maps a categorical feature name to the string
    label of each code, when the data came from text.
    """

    feature_names: tuple[str, ...]
    kinds: tuple[FeatureKind, ...]
    columns: tuple[np.ndarray, ...]
    response: np.ndarray
    levels: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    response_name: str = "y"
    dropped_rows: int = 0

    def __post_init__(self):
        names = tuple(self.feature_names)
        kinds = tuple(self.kinds)
        if not (len(names) == len(kinds) == len(self.columns)):
            raise SchemaError("feature_names, kinds and columns differ in length")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        y = np.asarray(self.response)
        if y.ndim != 1:
            raise DomainError("response must be one-dimensional")
        if not np.isin(y, (0, 1)).all():
            raise DomainError("response must contain only 0 and 1")
        y = y.astype(np.int8)
        n = len(y)
        cols = []
        for name, kind, col in zip(names, kinds, self.columns):
            col = np.asarray(col)
            if col.shape != (n,):
                raise SchemaError(f"column {name!r} has length {len(col)}, expected {n}")
            if isinstance(kind, Categorical):
                if col.size and (np.any(col != np.round(col)) or col.min() < 0 or col.max() >= kind.level_count):
                    raise SchemaError(f"column {name!r} has codes outside [0, {kind.level_count})")
                col = col.astype(np.int64)
            else:
                col = col.astype(np.float64)
                if not np.isfinite(col).all():
                    raise DomainError(f"column {name!r} has non-finite values")
            col.flags.writeable = False
            cols.append(col)
        y.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "columns", tuple(cols))
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "levels", dict(self.levels))

    @property
    def n(self) -> int:
        return len(self.response)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Row-major float64 design matrix; categorical codes stored exactly."""
        X = np.empty((self.n, self.n_features), dtype=np.float64)
        for j, col in enumerate(self.columns):
            X[:, j] = col
        X.flags.writeable = False
        return X

    @cached_property
    def matrix_t(self) -> np.ndarray:
        """Feature-major copy of :attr:`matrix`, shape ``(n_features, n)``."""
        Xt = np.ascontiguousarray(self.matrix.T)
        Xt.flags.writeable = False
        return Xt

    @cached_property
    def level_counts(self) -> np.ndarray:
        """Per-feature level count, 0 for continuous features."""
        return np.array(
            [k.level_count if isinstance(k, Categorical) else 0 for k in self.kinds],
            dtype=np.int64,
        )

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.index(name)]

    def decode(self, name: str) -> list[str]:
        """Map a categorical column's codes back to their original labels."""
        j = self.index(name)
        if not isinstance(self.kinds[j], Categorical):
            raise SchemaError(f"feature {name!r} is not categorical")
        table = self.levels.get(name) or tuple(str(i) for i in range(self.kinds[j].level_count))
        return [table[c] for c in self.columns[j]]

    def with_feature(self, name: str, kind: FeatureKind, column, levels=None) -> "Dataset":
        if name in self.feature_names:
            raise SchemaError(f"feature {name!r} already exists")
        lv = dict(self.levels)
        if levels is not None:
            lv[name] = tuple(levels)
        return Dataset(
            self.feature_names + (name,),
            self.kinds + (kind,),
            self.columns + (np.asarray(column),),
            self.response,
            lv,
            self.response_name,
            self.dropped_rows,
        )

    def subset(self, names: Sequence[str]) -> "Dataset":
        idx = [self.index(nm) for nm in names]
        return Dataset(
            tuple(self.feature_names[i] for i in idx),
            tuple(self.kinds[i] for i in idx),
            tuple(self.columns[i] for i in idx),
            self.response,
            {k: v for k, v in self.levels.items() if k in names},
            self.response_name,
            self.dropped_rows,
        )


def _parse_kind(spec) -> str:
    s = str(spec).strip().lower()
    if s in ("continuous", "numeric", "real"):
        return "continuous"
    if s in ("categorical", "factor", "nominal"):
        return "categorical"
    raise SchemaError(f"unknown column kind {spec!r} (use 'continuous' or 'categorical')")


def _is_number(s: str) -> bool:
    try:
        return math.isfinite(float(s))
    except ValueError:
        return False


def load_csv(
    path,
    schema: Mapping[str, str] | None,
    response: str,
    *,
    drop_missing: bool = False,
) -> Dataset:
    """Read a headered UTF-8 CSV into a :class:`Dataset`.

    ``schema`` maps feature column names to ``"continuous"`` or
    ``"categorical"``; only those columns become features, in schema order.
    With ``schema=None`` every non-response column is used, typed continuous
    when all its values parse as numbers and categorical otherwise.

    A row with an empty field in a used column raises :class:`ParseError`
    unless ``drop_missing`` is set, in which case the row is dropped
    (complete-case analysis) and counted in ``dropped_rows``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header row required", row=1) from None
        except csv.Error as exc:
            raise ParseError(str(exc), row=1) from None
        header = [h.strip() for h in header]
        if response not in header:
            raise SchemaError(f"response column {response!r} not found in header")
        if schema is None:
            feature_cols = [h for h in header if h != response]
            kinds_in = None
        else:
            feature_cols = list(schema)
            for c in feature_cols:
                if c not in header:
                    raise SchemaError(f"schema column {c!r} not found in header")
                if c == response:
                    raise SchemaError("response column cannot also be a feature")
            kinds_in = [_parse_kind(schema[c]) for c in feature_cols]
        pos = {h: i for i, h in enumerate(header)}
        used = [pos[c] for c in feature_cols] + [pos[response]]

        raw: list[list[str]] = []
        dropped = 0
        try:
            for row in reader:
                line = reader.line_num
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=line)
                vals = [row[i].strip() for i in used]
                if any(v == "" for v in vals):
                    if drop_missing:
                        dropped += 1
                        continue
                    raise ParseError("missing value", row=line)
                raw.append(vals + [line])
        except csv.Error as exc:
            raise ParseError(str(exc), row=reader.line_num) from None

    if not raw:
        raise ParseError("no rows")

    y_raw = [r[-2] for r in raw]
    y = np.empty(len(raw), dtype=np.int8)
    for i, v in enumerate(y_raw):
        if not _is_number(v) or float(v) not in (0.0, 1.0):
            raise DomainError(f"row {raw[i][-1]}: response {v!r} is not 0 or 1")
        y[i] = int(float(v))

    columns, kinds, levels = [], [], {}
    for j, name in enumerate(feature_cols):
        vals = [r[j] for r in raw]
        kind = kinds_in[j] if kinds_in is not None else (
            "continuous" if all(_is_number(v) for v in vals) else "categorical"
        )
        if kind == "continuous":
            col = np.empty(len(vals))
            for i, v in enumerate(vals):
                if not _is_number(v):
                    raise ParseError(f"column {name!r}: {v!r} is not a finite number", row=raw[i][-1])
                col[i] = float(v)
            columns.append(col)
            kinds.append(Continuous())
        else:
            table = sorted(set(vals))
            if len(table) > MAX_LEVELS:
                raise SchemaError(f"column {name!r} has {len(table)} levels, cap is {MAX_LEVELS}")
            if len(table) < 2:
                raise SchemaError(f"column {name!r} has a single level {table[0]!r}")
            code = {lv: c for c, lv in enumerate(table)}
            columns.append(np.array([code[v] for v in vals], dtype=np.int64))
            kinds.append(Categorical(len(table)))
            levels[name] = tuple(table)

    return Dataset(tuple(feature_cols), tuple(kinds), tuple(columns), y, levels, response, dropped)


def shuffle_feature(d: Dataset, feature: str, seed: int, suffix: str = "_shuffled") -> Dataset:
    """Append a seeded permutation of ``feature`` as an uninformative copy."""
    j = d.index(feature)
    perm = make_rng(seed).permutation(d.n)
    col = d.columns[j][perm]
    return d.with_feature(feature + suffix, d.kinds[j], col, d.levels.get(feature))
