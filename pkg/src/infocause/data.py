"""Categorical datasets: one column per node, cells are state labels."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from infocause.errors import ModelError, ParseError, UnknownNode, UnknownState, ValidationError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of categorical observations, stored as integer state codes.

    ``codes[i, j]`` indexes ``states[j]``; labels are recovered through
    :meth:`labels`.
    """

    columns: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    codes: np.ndarray

    def __post_init__(self):
        columns = tuple(self.columns)
        states = tuple(tuple(str(s) for s in st) for st in self.states)
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(columns):
            raise ModelError(f"codes must be (n, {len(columns)}), got {codes.shape}")
        if len(set(columns)) != len(columns):
            raise ModelError("duplicate column")
        if len(states) != len(columns):
            raise ModelError("one state list per column required")
        if codes.shape[0] < 1:
            raise ModelError("a dataset needs at least one row")
        for j, st in enumerate(states):
            col = codes[:, j]
            if col.min() < 0 or col.max() >= len(st):
                raise ValidationError(f"column {columns[j]!r} has codes outside its {len(st)} states")
        codes.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_labels(cls, columns: Sequence[str], states: Sequence[Sequence[str]], rows) -> "Dataset":
        states = [tuple(str(s) for s in st) for st in states]
        lookup = [{s: i for i, s in enumerate(st)} for st in states]
        codes = []
        for r, row in enumerate(rows):
            if len(row) != len(columns):
                raise ValidationError(f"row {r + 1} has {len(row)} cells, expected {len(columns)}")
            try:
                codes.append([lookup[j][str(v)] for j, v in enumerate(row)])
            except KeyError as exc:
                raise UnknownState(f"row {r + 1}: undeclared state {exc.args[0]!r}") from None
        return cls(tuple(columns), tuple(states), np.array(codes, dtype=np.int64).reshape(-1, len(columns)))

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    def __len__(self):
        return self.n

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise UnknownNode(f"dataset has no column {name!r}") from None

    def state_index(self, name: str, state) -> int:
        st = self.states[self.column_index(name)]
        try:
            return st.index(str(state))
        except ValueError:
            raise UnknownState(f"column {name!r} has no state {state!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.column_index(name)]

    def labels(self, name: str) -> list[str]:
        st = self.states[self.column_index(name)]
        return [st[c] for c in self.column(name)]

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.columns, self.states, self.codes[rows])

    def with_column(self, name: str, codes: np.ndarray) -> "Dataset":
        out = np.array(self.codes)
        out[:, self.column_index(name)] = codes
        return Dataset(self.columns, self.states, out)

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.column_index(n) for n in names]
        return Dataset(tuple(names), tuple(self.states[i] for i in idx), self.codes[:, idx])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        tables = [np.array(st, dtype=object) for st in self.states]
        for row in self.codes:
            writer.writerow([tables[j][c] for j, c in enumerate(row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, states: Mapping[str, Sequence[str]]) -> "Dataset":
        """Parse CSV text; ``states`` declares each column's state labels."""
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV: a header row is required") from None
        header = [h.strip() for h in header]
        missing = [h for h in header if h not in states]
        if missing:
            raise UnknownNode(f"CSV columns {missing} are not declared nodes")
        rows = [r for r in reader if r]
        for i, r in enumerate(rows):
            if any(cell == "" for cell in r):
                raise ValidationError(f"row {i + 1} has a missing cell")
        if not rows:
            raise ValidationError("CSV has no data rows")
        return cls.from_labels(header, [states[h] for h in header], [[c.strip() for c in r] for r in rows])
