"""Sensor and driver-action trace files (CSV, LF line endings)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..reqmodel import format_number
from .actuators import DriverAction

SENSOR_HEADER = ("tick", "eyesState", "facePosition", "hbpm", "hosw")
ACTION_HEADER = ("tick", "actuator", "action")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class SensorTraceRow:
    """Raw readings at one vehicle tick; ``None`` marks a lost sensor."""

    tick: int
    eyesState: Optional[float]
    facePosition: Optional[float]
    hbpm: Optional[float]
    hosw: Optional[float]


def _cell(v) -> str:
    return "" if v is None else format_number(v)


def dumps_sensor_trace(rows: Iterable[SensorTraceRow]) -> str:
    lines = [",".join(SENSOR_HEADER)]
    for r in rows:
        lines.append(",".join((str(r.tick), _cell(r.eyesState), _cell(r.facePosition),
                               _cell(r.hbpm), _cell(r.hosw))))
    return "\n".join(lines) + "\n"


def write_sensor_trace(rows, path) -> None:
    Path(path).write_text(dumps_sensor_trace(rows), encoding="utf-8", newline="\n")


def _parse(text: str, header):
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None or tuple(first) != header:
        raise TraceError(f"line 1: expected header {','.join(header)}")
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != len(header):
            raise TraceError(f"line {lineno}: {len(fields)} fields, expected {len(header)}")
        yield lineno, fields


def loads_sensor_trace(text: str) -> list[SensorTraceRow]:
    rows = []
    for lineno, fields in _parse(text, SENSOR_HEADER):
        try:
            tick = int(fields[0])
            values = [None if f == "" else float(f) for f in fields[1:]]
        except ValueError:
            raise TraceError(f"line {lineno}: malformed number") from None
        expected = rows[-1].tick + 1 if rows else tick
        if tick != expected:
            raise TraceError(f"line {lineno}: tick {tick} breaks the contiguous sequence")
        rows.append(SensorTraceRow(tick, *values))
    return rows


def read_sensor_trace(path) -> list[SensorTraceRow]:
    return loads_sensor_trace(Path(path).read_text(encoding="utf-8"))


def dumps_actions(actions: Iterable[DriverAction]) -> str:
    lines = [",".join(ACTION_HEADER)]
    lines += [f"{a.tick},{a.actuator_id},{a.action.value}" for a in actions]
    return "\n".join(lines) + "\n"


def write_actions(actions, path) -> None:
    Path(path).write_text(dumps_actions(actions), encoding="utf-8", newline="\n")


def loads_actions(text: str) -> list[DriverAction]:
    out = []
    for lineno, fields in _parse(text, ACTION_HEADER):
        try:
            out.append(DriverAction.parse(*fields))
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
    return out


def read_actions(path) -> list[DriverAction]:
    return loads_actions(Path(path).read_text(encoding="utf-8"))
