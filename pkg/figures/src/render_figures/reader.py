"""Trajectory CSV reading.

The log format is one header row of column names, one row per sample, and an
optional trailing ``# aborted ...`` comment line when the producing run was
cut short.  Reading never modifies the file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np


class CsvFormatError(ValueError):
    """The file is empty or not a well-formed trajectory log."""


class MissingColumnError(CsvFormatError):
    def __init__(self, column: str):
        super().__init__(f"required column {column!r} is missing from the CSV")
        self.column = column


@dataclass
class TrajectoryData:
    columns: Dict[str, np.ndarray]
    truncated: bool = False
    truncation_note: str = ""
    component_groups: Dict[str, List[str]] = field(default_factory=dict)

    def require(self, *names: str) -> None:
        for name in names:
            if name not in self.columns:
                raise MissingColumnError(name)

    def group(self, prefix: str) -> List[str]:
        """Column names ``prefix1..prefixN`` in index order."""
        got = []
        i = 1
        while f"{prefix}{i}" in self.columns:
            got.append(f"{prefix}{i}")
            i += 1
        if not got:
            raise MissingColumnError(f"{prefix}1")
        return got


def read_trajectory(path: str | Path) -> TrajectoryData:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CsvFormatError(f"{path} is empty")

    truncated = False
    note = ""
    data_lines = []
    for ln in lines:
        if ln.lstrip().startswith("#"):
            truncated = True
            note = ln.lstrip().lstrip("#").strip()
        else:
            data_lines.append(ln)
    if len(data_lines) < 2:
        raise CsvFormatError(f"{path} has a header but no data rows")

    reader = csv.reader(data_lines)
    header = next(reader)
    rows = []
    for row in reader:
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row with {len(row)} fields, expected {len(header)}")
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise CsvFormatError(f"{path}: non-numeric value in data row") from exc
    table = np.asarray(rows)
    columns = {name: table[:, j] for j, name in enumerate(header)}
    return TrajectoryData(columns=columns, truncated=truncated, truncation_note=note)
