"""CSV reading and writing for result rows (dataclasses with scalar fields)."""
from __future__ import annotations

import csv
import dataclasses
import io
from pathlib import Path
from typing import Sequence, Type, TypeVar

from .exceptions import ValidationError

RowT = TypeVar("RowT")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence, row_type: type | None = None) -> str:
    row_type = row_type or type(rows[0])
    names = [f.name for f in dataclasses.fields(row_type)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_cell(getattr(row, k)) for k in names])
    return buf.getvalue()


def write_rows(path: str | Path, rows: Sequence, row_type: type | None = None) -> None:
    Path(path).write_text(rows_to_csv(rows, row_type))


def _parse(kind, text: str):
    if text == "":
        return None
    if kind in (int, "int", "int | None"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def read_rows(path: str | Path, row_type: Type[RowT]) -> list[RowT]:
    fields = dataclasses.fields(row_type)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {f.name for f in fields} - set(reader.fieldnames or [])
        if missing:
            raise ValidationError(f"{path}: missing CSV columns {sorted(missing)}")
        out = []
        for line, rec in enumerate(reader, start=2):
            try:
                out.append(row_type(**{f.name: _parse(f.type, rec[f.name]) for f in fields}))
            except ValueError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from exc
    return out
