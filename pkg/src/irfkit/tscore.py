"""Series and panel containers, CSV ingestion, and lag/lead design matrices.

Shift convention used throughout: a negative shift is a lag, a positive
shift a lead. ``x[-2]`` is :math:`x_{t-2}`, ``x[+3]`` is :math:`x_{t+3}`.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from irfkit.errors import (
    IngestionError,
    InsufficientSampleError,
    ParseError,
    StructuralError,
)

__all__ = [
    "CsvSchema",
    "DesignMatrix",
    "Panel",
    "Series",
    "SeriesCollection",
    "build_design",
    "load_csv",
    "shift_label",
    "trim_common_sample",
    "write_csv",
]

_MISSING = {"", "na", "nan", "null", "none"}


def _period_keys(labels: Sequence[str]) -> list:
    """Ordering keys for opaque period labels (numeric when every label parses)."""
    try:
        return [float(s) for s in labels]
    except ValueError:
        return list(labels)


def _strictly_increasing(labels: Sequence[str]) -> int | None:
    """Position of the first label that breaks strict ordering, or None."""
    keys = _period_keys(labels)
    for i in range(1, len(keys)):
        if not keys[i - 1] < keys[i]:
            return i
    return None


@dataclass(frozen=True, eq=False)
class Series:
    """A named univariate time series."""

    name: str
    values: np.ndarray
    period_index: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size < 1:
            raise IngestionError(f"series {self.name!r} is empty")
        if not np.all(np.isfinite(values)):
            raise IngestionError(f"series {self.name!r} contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.period_index is not None:
            index = tuple(str(p) for p in self.period_index)
            if len(index) != values.size:
                raise StructuralError(
                    f"series {self.name!r}: period_index has {len(index)} labels "
                    f"for {values.size} values"
                )
            bad = _strictly_increasing(index)
            if bad is not None:
                raise StructuralError(
                    f"series {self.name!r}: period labels not strictly increasing "
                    f"at {index[bad - 1]!r} -> {index[bad]!r}"
                )
            object.__setattr__(self, "period_index", index)

    def __len__(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        return f"Series({self.name!r}, n={len(self)})"

    def slice(self, start: int | None = None, stop: int | None = None) -> Series:
        index = None if self.period_index is None else self.period_index[start:stop]
        return Series(self.name, self.values[start:stop], index)

    def rename(self, name: str) -> Series:
        return Series(name, self.values, self.period_index)

    def with_values(self, values, name: str | None = None) -> Series:
        return Series(name or self.name, values, self.period_index)


class SeriesCollection(Mapping):
    """Named series sharing one period index, as read from a CSV file."""

    def __init__(self, series: Mapping[str, Series], rows_dropped: int = 0):
        self._series = dict(series)
        self.rows_dropped = rows_dropped

    def __getitem__(self, key: str) -> Series:
        try:
            return self._series[key]
        except KeyError:
            raise KeyError(
                f"no series named {key!r}; available: {sorted(self._series)}"
            ) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._series)

    def __len__(self) -> int:
        return len(self._series)

    def __repr__(self) -> str:
        return f"SeriesCollection({list(self._series)}, rows_dropped={self.rows_dropped})"


@dataclass(frozen=True, eq=False)
class Panel:
    """Per-entity series for each named variable.

    Unbalanced panels are allowed; each entity keeps its own period index.
    """

    entities: tuple[str, ...]
    data: Mapping[str, Mapping[str, Series]]
    rows_dropped: int = 0
    balanced: bool = field(init=False)

    def __post_init__(self):
        if len(self.entities) < 1:
            raise StructuralError("panel has no entities")
        indices = []
        for entity in self.entities:
            block = self.data[entity]
            idx = {s.period_index for s in block.values()}
            lengths = {len(s) for s in block.values()}
            if len(idx) != 1 or len(lengths) != 1:
                raise StructuralError(f"entity {entity!r}: variables are not aligned")
            indices.append(idx.pop())
        object.__setattr__(self, "balanced", all(ix == indices[0] for ix in indices))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.data[self.entities[0]])

    def series(self, entity: str, variable: str) -> Series:
        return self.data[entity][variable]

    def __repr__(self) -> str:
        return (
            f"Panel(entities={len(self.entities)}, variables={list(self.variables)}, "
            f"balanced={self.balanced})"
        )


@dataclass(frozen=True)
class CsvSchema:
    """Column roles. ``values=None`` means every non-key column."""

    values: tuple[str, ...] | None = None
    period: str | None = "period"
    entity: str | None = "entity"


def _parse_cell(raw: str, row: int, column: str) -> float | None:
    text = raw.strip()
    if text.lower() in _MISSING:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse {raw!r} as a number",
            row=row,
            column=column,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row}, column {column!r}: non-finite value {raw!r}", row=row, column=column
        )
    return value


def load_csv(
    path: str | Path,
    schema: CsvSchema | None = None,
    na_policy: str = "reject",
) -> SeriesCollection | Panel:
    """Read a CSV file into validated series or a panel.

    Lines starting with ``#`` are comments. Rows are numbered from 1 for the
    first data row. With ``na_policy="drop_rows"`` any row with a missing
    value cell is removed whole; ``"reject"`` raises on the first one.
    """
    if na_policy not in ("reject", "drop_rows"):
        raise ValueError(f"na_policy must be 'reject' or 'drop_rows', got {na_policy!r}")
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"file not found: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.lstrip().startswith("#"))
        reader = csv.reader(lines)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: no header row") from None
        records = [r for r in reader if any(cell.strip() for cell in r)]

    if len(set(header)) != len(header):
        raise StructuralError(f"{path}: duplicate column names in header")
    period_col = schema.period if schema.period in header else None
    entity_col = schema.entity if schema.entity in header else None
    if schema.period is not None and period_col is None and schema.period != "period":
        raise IngestionError(f"{path}: period column {schema.period!r} not found")
    if schema.entity is not None and entity_col is None and schema.entity != "entity":
        raise IngestionError(f"{path}: entity column {schema.entity!r} not found")
    keys = {period_col, entity_col} - {None}
    if schema.values is None:
        value_cols = [h for h in header if h not in keys]
    else:
        missing = [v for v in schema.values if v not in header]
        if missing:
            raise IngestionError(f"{path}: value columns not found: {missing}")
        value_cols = list(schema.values)
    if not value_cols:
        raise IngestionError(f"{path}: no value columns")
    pos = {h: i for i, h in enumerate(header)}

    parsed = []
    dropped = 0
    for row_no, record in enumerate(records, start=1):
        if len(record) != len(header):
            raise ParseError(
                f"row {row_no}: expected {len(header)} fields, found {len(record)}", row=row_no
            )
        values = [_parse_cell(record[pos[c]], row_no, c) for c in value_cols]
        if any(v is None for v in values):
            if na_policy == "reject":
                col = value_cols[[v is None for v in values].index(True)]
                raise IngestionError(
                    f"row {row_no}, column {col!r}: missing value (na_policy='reject')"
                )
            dropped += 1
            continue
        period = record[pos[period_col]].strip() if period_col else None
        entity = record[pos[entity_col]].strip() if entity_col else None
        parsed.append((row_no, entity, period, values))

    if not parsed:
        raise IngestionError(f"{path}: no usable rows")

    if entity_col is None:
        periods = [p for _, _, p, _ in parsed] if period_col else None
        if periods is not None:
            _check_periods(periods, [r for r, *_ in parsed], path)
        matrix = np.array([v for *_, v in parsed], dtype=np.float64)
        series = {
            c: Series(c, matrix[:, j], tuple(periods) if periods else None)
            for j, c in enumerate(value_cols)
        }
        return SeriesCollection(series, rows_dropped=dropped)

    by_entity: dict[str, list] = {}
    for item in parsed:
        by_entity.setdefault(item[1], []).append(item)
    data = {}
    for entity, items in by_entity.items():
        periods = [p for _, _, p, _ in items] if period_col else None
        if periods is not None:
            _check_periods(periods, [r for r, *_ in items], path, entity)
        matrix = np.array([v for *_, v in items], dtype=np.float64)
        data[entity] = {
            c: Series(c, matrix[:, j], tuple(periods) if periods else None)
            for j, c in enumerate(value_cols)
        }
    return Panel(tuple(by_entity), data, rows_dropped=dropped)


def _check_periods(periods, rows, path, entity=None):
    where = f"entity {entity!r}, " if entity is not None else ""
    seen: dict[str, int] = {}
    for label, row in zip(periods, rows):
        if label in seen:
            raise StructuralError(
                f"{path}: {where}duplicate period {label!r} (rows {seen[label]} and {row})"
            )
        seen[label] = row
    bad = _strictly_increasing(periods)
    if bad is not None:
        raise StructuralError(
            f"{path}: {where}periods out of order at row {rows[bad]} "
            f"({periods[bad - 1]!r} -> {periods[bad]!r})"
        )


def write_csv(data: Mapping[str, Series] | Panel, path: str | Path, comment: str | None = None):
    """Write series or a panel; floats use ``repr`` so values round-trip exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(data, Panel):
            names = list(data.variables)
            writer.writerow(["entity", "period", *names])
            for entity in data.entities:
                block = data.data[entity]
                first = block[names[0]]
                index = first.period_index or tuple(str(i + 1) for i in range(len(first)))
                for i, label in enumerate(index):
                    writer.writerow([entity, label, *(repr(float(block[n].values[i])) for n in names)])
            return
        names = list(data)
        first = data[names[0]]
        index = first.period_index or tuple(str(i + 1) for i in range(len(first)))
        writer.writerow(["period", *names])
        for i, label in enumerate(index):
            writer.writerow([label, *(repr(float(data[n].values[i])) for n in names)])


def shift_label(name: str, shift: int) -> str:
    if shift == 0:
        return f"{name}[0]"
    return f"{name}[{shift:+d}]"


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Regressors and dependent variable aligned row by row.

    ``rows`` holds, for every design row, the position ``t`` in the source
    series at which the regression is dated.
    """

    columns: tuple[tuple[str, np.ndarray], ...]
    target: np.ndarray
    target_label: str
    rows: np.ndarray
    rows_dropped_head: int
    rows_dropped_tail: int
    periods: tuple[str, ...] | None = None

    def __post_init__(self):
        labels = [label for label, _ in self.columns]
        dup = {label for label in labels if labels.count(label) > 1}
        if dup:
            raise StructuralError(f"duplicate column labels: {sorted(dup)}")
        n = self.target.size
        for label, values in self.columns:
            if values.size != n:
                raise StructuralError(f"column {label!r} has {values.size} rows, target {n}")
        if self.rows.size != n:
            raise StructuralError("row positions do not match target length")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.columns)

    @property
    def nobs(self) -> int:
        return self.target.size

    @cached_property
    def X(self) -> np.ndarray:
        if not self.columns:
            return np.empty((self.nobs, 0))
        return np.column_stack([values for _, values in self.columns])

    def column(self, label: str) -> np.ndarray:
        for lab, values in self.columns:
            if lab == label:
                return values
        raise KeyError(f"no column {label!r}; have {list(self.labels)}")

    def select_rows(self, keep: np.ndarray) -> DesignMatrix:
        """Restrict to a boolean mask, integer positions or a slice over design rows."""
        if not isinstance(keep, slice):
            keep = np.asarray(keep)
        return DesignMatrix(
            columns=tuple((label, values[keep]) for label, values in self.columns),
            target=self.target[keep],
            target_label=self.target_label,
            rows=self.rows[keep],
            rows_dropped_head=self.rows_dropped_head,
            rows_dropped_tail=self.rows_dropped_tail,
            periods=self.periods,
        )

    def with_columns(self, columns: Iterable[tuple[str, np.ndarray]]) -> DesignMatrix:
        return DesignMatrix(
            columns=tuple(columns),
            target=self.target,
            target_label=self.target_label,
            rows=self.rows,
            rows_dropped_head=self.rows_dropped_head,
            rows_dropped_tail=self.rows_dropped_tail,
            periods=self.periods,
        )

    def drop_columns(self, labels: Iterable[str]) -> DesignMatrix:
        drop = set(labels)
        return self.with_columns((lab, v) for lab, v in self.columns if lab not in drop)


def _as_shifts(spec) -> list[int]:
    if isinstance(spec, (int, np.integer)):
        return [int(spec)]
    shifts = [int(s) for s in spec]
    if not shifts:
        raise ValueError("empty shift specification")
    return shifts


def _check_aligned(target: Series, other: Series):
    if len(other) != len(target):
        raise StructuralError(
            f"series {other.name!r} has length {len(other)}, target {target.name!r} {len(target)}"
        )
    if (
        target.period_index is not None
        and other.period_index is not None
        and other.period_index != target.period_index
    ):
        raise StructuralError(f"series {other.name!r} is not aligned with {target.name!r}")


def build_design(
    target: Series,
    horizon: int,
    regressors: Sequence[tuple[Series, int | Iterable[int]]],
    include_intercept: bool = True,
    pad_tail_leads: bool = False,
    require_dof: bool = True,
) -> DesignMatrix:
    """Assemble the regression of ``target[t + horizon]`` on shifted regressors.

    Rows lost at the head equal the deepest lag; rows lost at the tail equal
    ``horizon`` plus the longest lead, so designs with and without leads at
    the same horizon differ only by the lead count.

    With ``pad_tail_leads`` lead values past the end of a series are taken as
    zero and leads do not shorten the sample.

    With ``require_dof`` (the default) a design with fewer than
    ``columns + 1`` rows is an error, since no regression could be run on it.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    T = len(target)
    specs = []
    for series, shift_spec in regressors:
        _check_aligned(target, series)
        specs.append((series, _as_shifts(shift_spec)))

    all_shifts = [s for _, shifts in specs for s in shifts]
    max_lag = max([0] + [-s for s in all_shifts])
    max_lead = max([0] + all_shifts)
    tail = horizon + (0 if pad_tail_leads else max_lead)
    if max_lag + max_lead + horizon >= T:
        raise InsufficientSampleError(
            f"lags ({max_lag}) + leads ({max_lead}) + horizon ({horizon}) exceed "
            f"series length {T}"
        )
    rows = np.arange(max_lag, T - tail)

    columns = []
    if include_intercept:
        columns.append(("const", np.ones(rows.size)))
    for series, shifts in specs:
        values = series.values
        if pad_tail_leads and max_lead > 0:
            values = np.concatenate([values, np.zeros(max_lead)])
        for s in shifts:
            columns.append((shift_label(series.name, s), values[rows + s]))
    y = target.values[rows + horizon]

    design = DesignMatrix(
        columns=tuple(columns),
        target=y,
        target_label=f"{target.name}[t+{horizon}]",
        rows=rows,
        rows_dropped_head=max_lag,
        rows_dropped_tail=tail,
        periods=target.period_index,
    )
    if require_dof and design.nobs < len(columns) + 1:
        raise InsufficientSampleError(
            f"{design.nobs} usable rows for {len(columns)} columns at horizon {horizon}"
        )
    return design


def trim_common_sample(designs: Sequence[DesignMatrix]) -> list[DesignMatrix]:
    """Restrict every design to the rows usable by all of them."""
    if not designs:
        return []
    first = designs[0].periods
    for d in designs[1:]:
        if first is not None and d.periods is not None and d.periods != first:
            raise StructuralError("designs were built from series with different period indices")
    common = designs[0].rows
    for d in designs[1:]:
        common = np.intersect1d(common, d.rows, assume_unique=True)
    if common.size == 0:
        raise InsufficientSampleError("designs share no usable rows")
    out = []
    for d in designs:
        trimmed = d.select_rows(np.isin(d.rows, common))
        if trimmed.nobs < len(trimmed.columns) + 1:
            raise InsufficientSampleError(
                f"common sample of {trimmed.nobs} rows too short for {len(trimmed.columns)} columns"
            )
        out.append(trimmed)
    return out
