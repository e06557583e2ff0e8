"""Minimal ARFF reader/writer for context datasets.

Only what the knowledge base produces is supported: numeric and nominal
attributes, unquoted comma-separated rows, ``%`` comments.
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import TextIO, Union

from ..reqmodel import format_number
from .dataset import Attribute, Dataset, DatasetError


class ArffError(ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ArffHeaderError(ArffError):
    pass


class ArffAttributeError(ArffError):
    pass


class ArffArityError(ArffError):
    pass


class ArffValueError(ArffError):
    pass


Destination = Union[str, os.PathLike, TextIO]


def dumps(ds: Dataset) -> str:
    out = [f"@relation {ds.relation_name}", ""]
    for a in ds.attributes:
        kind = "numeric" if a.numeric else "{" + ",".join(a.values) + "}"
        out.append(f"@attribute {a.name} {kind}")
    out.append("")
    out.append("@data")
    for row in ds.records:
        out.append(",".join(
            format_number(v) if a.numeric else v for a, v in zip(ds.attributes, row)))
    return "\n".join(out) + "\n"


def arff_write(ds: Dataset, destination: Destination) -> None:
    text = dumps(ds)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8", newline="\n")


def loads(text: str) -> Dataset:
    relation = None
    attributes: list[Attribute] = []
    rows: list[tuple] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            head, _, rest = line.partition(" ")
            key = head.lower()
            if key == "@relation":
                if not rest.strip():
                    raise ArffHeaderError("@relation without a name", lineno)
                relation = rest.strip()
            elif key == "@attribute":
                attributes.append(_parse_attribute(rest.strip(), lineno))
            elif key == "@data":
                if relation is None or not attributes:
                    raise ArffHeaderError("@data before @relation/@attribute", lineno)
                in_data = True
            else:
                raise ArffHeaderError(f"unexpected header line {line!r}", lineno)
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(attributes):
            raise ArffArityError(f"{len(fields)} values, expected {len(attributes)}", lineno)
        row = []
        for a, f in zip(attributes, fields):
            if a.numeric:
                try:
                    row.append(float(f))
                except ValueError:
                    raise ArffValueError(f"{f!r} is not numeric ({a.name})", lineno) from None
            else:
                if f not in a.values:
                    raise ArffValueError(f"{f!r} is not a value of {a.name}", lineno)
                row.append(f)
        rows.append(tuple(row))
    if not in_data:
        raise ArffHeaderError("missing @data section", lineno if text else 0)
    try:
        return Dataset(attributes, rows, relation)
    except DatasetError as exc:
        raise ArffHeaderError(str(exc), 0) from exc


def _parse_attribute(spec: str, lineno: int) -> Attribute:
    name, _, kind = spec.partition(" ")
    kind = kind.strip()
    if not name or not kind:
        raise ArffHeaderError(f"malformed @attribute {spec!r}", lineno)
    if kind.lower() in ("numeric", "real"):
        return Attribute(name)
    if kind.startswith("{") and kind.endswith("}"):
        values = tuple(v.strip() for v in kind[1:-1].split(","))
        if not all(values):
            raise ArffAttributeError(f"empty nominal value in {kind}", lineno)
        return Attribute(name, values)
    raise ArffAttributeError(f"unknown attribute kind {kind!r}", lineno)


def arff_read(source: Destination) -> Dataset:
    if hasattr(source, "read"):
        return loads(source.read())
    return loads(Path(source).read_text(encoding="utf-8"))
