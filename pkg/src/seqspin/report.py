"""Machine-readable run reports in JSON or CSV.

Floats are rounded to 15 significant digits when a report is built, so
writing and re-reading a report in either format gives back an equal object.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

__all__ = ["Report", "Format", "round15", "load_report"]

Format = Literal["json", "csv"]
Scalar = str | int | float | bool | None
PROVENANCE = ("closed_form", "brute_force", "monte_carlo", "numeric", "published", "exact")


def round15(x: float) -> float:
    if not math.isfinite(x):
        return x
    return float(f"{x:.15g}")


def _norm(v: Any) -> Scalar:
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, int) or (hasattr(v, "dtype") and getattr(v.dtype, "kind", "") in "iu"):
        return int(v)
    return round15(float(v))


def _type_name(values: list[Scalar]) -> str:
    kinds = {type(v) for v in values if v is not None}
    if not kinds:
        return "str"
    if kinds == {bool}:
        return "bool"
    if kinds == {int}:
        return "int"
    if kinds <= {int, float}:
        return "float"
    return "str"


def _fmt(v: Scalar) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.15g}"
    return str(v)


def _parse(text: str, kind: str) -> Scalar:
    if text == "":
        return None
    if kind == "bool":
        return text == "true"
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


@dataclass(eq=False)
class Report:
    """One CLI run: metadata plus named rows. Each row may carry a ``provenance`` tag."""

    command: str
    metadata: dict[str, Scalar] = field(default_factory=dict)
    rows: list[dict[str, Scalar]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.metadata = {str(k): _norm(v) for k, v in self.metadata.items()}
        self.rows = [{str(k): _norm(v) for k, v in r.items()} for r in self.rows]
        for r in self.rows:
            tag = r.get("provenance")
            if tag is not None and tag not in PROVENANCE:
                raise ValueError(f"unknown provenance tag {tag!r}")

    def add(self, **values: Scalar) -> None:
        row = {k: _norm(v) for k, v in values.items()}
        tag = row.get("provenance")
        if tag is not None and tag not in PROVENANCE:
            raise ValueError(f"unknown provenance tag {tag!r}")
        self.rows.append(row)

    @property
    def columns(self) -> list[str]:
        cols: list[str] = []
        for r in self.rows:
            cols.extend(k for k in r if k not in cols)
        return cols

    def filled_rows(self) -> list[dict[str, Scalar]]:
        """Rows with every column present (missing cells become ``None``)."""
        cols = self.columns
        return [{c: r.get(c) for c in cols} for r in self.rows]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Report):
            return NotImplemented
        return (
            self.command == other.command
            and self.metadata == other.metadata
            and self.filled_rows() == other.filled_rows()
        )

    def to_json(self) -> str:
        doc = {"command": self.command, "metadata": self.metadata, "columns": self.columns, "rows": self.filled_rows()}
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        cols = self.columns
        buf = io.StringIO()
        buf.write(f"# command: {json.dumps(self.command)}\n")
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {json.dumps(v)}\n")
        types = [_type_name([r.get(c) for r in self.rows]) for c in cols]
        buf.write("# types: " + ",".join(types) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
        return buf.getvalue()

    def dumps(self, fmt: Format = "json") -> str:
        if fmt == "json":
            return self.to_json()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown format {fmt!r}")

    @classmethod
    def from_json(cls, text: str) -> "Report":
        doc = json.loads(text)
        return cls(doc["command"], doc.get("metadata", {}), doc.get("rows", []))

    @classmethod
    def from_csv(cls, text: str) -> "Report":
        meta: dict[str, Scalar] = {}
        command = ""
        types: list[str] = []
        body = []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                if key == "types":
                    types = val.split(",") if val else []
                elif key == "command":
                    command = json.loads(val)
                else:
                    meta[key] = json.loads(val)
            else:
                body.append(line)
        reader = csv.reader(body)
        cols = next(reader, [])
        rows = []
        for rec in reader:
            rows.append({c: _parse(v, t) for c, t, v in zip(cols, types, rec)})
        return cls(command, meta, rows)

    @classmethod
    def loads(cls, text: str, fmt: Format = "json") -> "Report":
        if fmt == "json":
            return cls.from_json(text)
        if fmt == "csv":
            return cls.from_csv(text)
        raise ValueError(f"unknown format {fmt!r}")

    def write(self, path: str | Path, fmt: Format = "json") -> None:
        Path(path).write_text(self.dumps(fmt), encoding="utf-8")


def load_report(path: str | Path) -> Report:
    """Read a report, picking the format from the file suffix."""
    p = Path(path)
    fmt: Format = "csv" if p.suffix.lower() == ".csv" else "json"
    return Report.loads(p.read_text(encoding="utf-8"), fmt)
