"""Lossless CSV round-tripping for flat dataclass records."""
from __future__ import annotations

import csv
import dataclasses
import io
import typing
from pathlib import Path


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parser(tp):
    if tp is bool:
        return lambda s: {"true": True, "false": False}[s.strip().lower()]
    if tp is int:
        return int
    if tp is float:
        return float
    return str


def format_rows(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in row])
    return buf.getvalue()


def records_to_csv(records, cls=None) -> str:
    records = list(records)
    cls = cls or type(records[0])
    names = [f.name for f in dataclasses.fields(cls)]
    return format_rows(names, ([getattr(r, n) for n in names] for r in records))


def records_from_csv(cls, text: str) -> list:
    hints = typing.get_type_hints(cls)
    reader = csv.DictReader(io.StringIO(text))
    names = [f.name for f in dataclasses.fields(cls)]
    if reader.fieldnames != names:
        raise ValueError(f"expected columns {names}, got {reader.fieldnames}")
    parsers = {n: _parser(hints[n]) for n in names}
    return [cls(**{n: parsers[n](row[n]) for n in names}) for row in reader]


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")
