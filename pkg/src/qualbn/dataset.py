"""Datasets of partially observed cases.

On disk a dataset is delimited text: a header of variable names, one row
per case, ``?`` for a missing value.  In memory the states are kept as
integer indices with ``-1`` for missing, which is what inference consumes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .network import FormatError, Network, NetworkError

MISSING = "?"


class Dataset:
    """Cases over a fixed column list, encoded against a network's state labels."""

    def __init__(self, net: Network, columns: Sequence[str], values: np.ndarray):
        columns = tuple(columns)
        for col in columns:
            net.variable(col)
        if len(set(columns)) != len(columns):
            raise NetworkError("dataset columns must be distinct")
        values = np.asarray(values, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != len(columns):
            values = values.reshape(-1, len(columns))
        for c, col in enumerate(columns):
            bad = (values[:, c] < -1) | (values[:, c] >= net.cardinality(col))
            if bad.any():
                raise NetworkError(f"invalid state index in column {col!r}")
        self.columns = columns
        self.values = values
        self.values.setflags(write=False)
        self._net = net

    @classmethod
    def from_cases(cls, net: Network, cases: Iterable[Mapping[str, str]], columns: Sequence[str] | None = None) -> Dataset:
        cases = list(cases)
        if columns is None:
            present = set().union(*(c.keys() for c in cases)) if cases else set()
            columns = [n for n in net.names if n in present]
        rows = []
        for pos, case in enumerate(cases):
            unknown = set(case) - set(columns)
            if unknown:
                raise NetworkError(f"case {pos} mentions variables outside the columns: {sorted(unknown)}")
            rows.append([
                net.variable(col).state_index(case[col]) if col in case else -1
                for col in columns
            ])
        return cls(net, columns, np.array(rows, dtype=np.int64).reshape(len(rows), len(columns)))

    def __len__(self) -> int:
        return self.values.shape[0]

    def case(self, index: int) -> dict[str, str]:
        row = self.values[index]
        return {
            col: self._net.variable(col).states[s]
            for col, s in zip(self.columns, row) if s >= 0
        }

    def cases(self) -> Iterator[dict[str, str]]:
        for i in range(len(self)):
            yield self.case(i)

    def full_matrix(self, net: Network) -> np.ndarray:
        """State indices over all of ``net``'s variables (-1 where unobserved)."""
        out = np.full((len(self), len(net)), -1, dtype=np.int64)
        for c, col in enumerate(self.columns):
            out[:, net.index(col)] = self.values[:, c]
        return out

    def concat(self, other: Dataset) -> Dataset:
        if other.columns != self.columns:
            raise NetworkError("cannot concatenate datasets with different columns")
        return Dataset(self._net, self.columns, np.vstack([self.values, other.values]))


def save_dataset(data: Dataset, path, net: Network, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(data.columns)
        for row in data.values:
            writer.writerow([
                net.variable(col).states[s] if s >= 0 else MISSING
                for col, s in zip(data.columns, row)
            ])


def load_dataset(path, net: Network, delimiter: str = ",") -> Dataset:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, expected a header row") from None
        for col in header:
            if col not in net:
                raise FormatError(f"{path}: header names unknown variable {col!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            encoded = []
            for col, label in zip(header, row):
                if label == MISSING:
                    encoded.append(-1)
                    continue
                try:
                    encoded.append(net.variable(col).state_index(label))
                except NetworkError as exc:
                    raise FormatError(f"{path}: line {lineno}: {exc}") from None
            rows.append(encoded)
    return Dataset(net, header, np.array(rows, dtype=np.int64).reshape(len(rows), len(header)))
