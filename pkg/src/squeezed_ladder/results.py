"""Versioned CSV/JSON result documents and trace-file reading."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from squeezed_ladder.exceptions import ValidationError

SCHEMA = "squeezed-ladder v1"
FORMATS = ("csv", "json")


@dataclass
class Section:
    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError(
                    f"Section {self.name!r} row has {len(row)} values for {len(self.columns)} columns"
                )


@dataclass
class ResultDocument:
    """One subcommand's output: summary key/values plus tabular sections."""

    subcommand: str
    summary: dict[str, Any] = field(default_factory=dict)
    sections: list[Section] = field(default_factory=list)

    def add(self, name: str, columns: list[str], rows: list[list[Any]]) -> Section:
        section = Section(name, columns, rows)
        self.sections.append(section)
        return section

    def section(self, name: str) -> Section:
        for s in self.sections:
            if s.name == name:
                return s
        raise KeyError(name)


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(f"{float(value):.12g}")
        return number if math.isfinite(number) else None
    return value


def to_csv(doc: ResultDocument) -> str:
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}, {doc.subcommand}\n")
    for key, value in doc.summary.items():
        buf.write(f"# {key} = {format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for i, section in enumerate(doc.sections):
        if i or doc.summary:
            buf.write("\n")
        if len(doc.sections) > 1:
            buf.write(f"# [{section.name}]\n")
        writer.writerow(section.columns)
        for row in section.rows:
            writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def to_json(doc: ResultDocument) -> str:
    data = {
        "schema": SCHEMA,
        "subcommand": doc.subcommand,
        "summary": {k: _json_value(v) for k, v in doc.summary.items()},
        "sections": {
            s.name: [dict(zip(s.columns, (_json_value(v) for v in row))) for row in s.rows]
            for s in doc.sections
        },
    }
    return json.dumps(data, indent=2) + "\n"


def render(doc: ResultDocument, fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ValidationError(f"Output format must be one of {FORMATS}, got {fmt!r}")
    return to_csv(doc) if fmt == "csv" else to_json(doc)


def write_document(doc: ResultDocument, path: str, fmt: str = "csv") -> None:
    """Write atomically: render fully, write a tmp file, then rename into place."""
    text = render(doc, fmt)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def read_trace(path: str, column: str = "p_down") -> tuple[np.ndarray, np.ndarray]:
    """Read ``t_seconds`` and one value column (``p_down`` by default); '#' lines are comments.

    Raises:
        ValidationError: Missing file, missing columns or non-numeric values.
    """
    if not os.path.exists(path):
        raise ValidationError(f"Trace file not found: {path}")
    with open(path, "r") as f:
        lines = [ln for ln in f if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader, [])]
    missing = [c for c in ("t_seconds", column) if c not in header]
    if missing:
        raise ValidationError(f"Trace file {path} lacks column(s): {', '.join(missing)}")
    t_col, p_col = header.index("t_seconds"), header.index(column)
    times, values = [], []
    for lineno, row in enumerate(reader, 2):
        try:
            times.append(float(row[t_col]))
            values.append(float(row[p_col]))
        except (IndexError, ValueError):
            raise ValidationError(f"Trace file {path}: bad row {lineno}: {','.join(row)}")
    if not times:
        raise ValidationError(f"Trace file {path} has no data rows")
    return np.array(times), np.array(values)
