"""Tabular results with CSV and JSON writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _csv_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _json_value(value: Any) -> Any:
    # JSON has no inf/nan; encode them as strings matching the CSV spelling
    if isinstance(value, float) and not math.isfinite(value):
        return _csv_text(value)
    return value


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **values: Any) -> None:
        missing = set(self.columns) - set(values)
        extra = set(values) - set(self.columns)
        if missing or extra:
            raise ValueError(f"row mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append([_cell(values[c]) for c in self.columns])

    def column(self, name: str) -> list[Any]:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_csv_text(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        records = [{c: _json_value(v) for c, v in zip(self.columns, row)} for row in self.rows]
        return json.dumps({"metadata": self.metadata, "columns": self.columns, "records": records},
                          indent=2, sort_keys=False) + "\n"
