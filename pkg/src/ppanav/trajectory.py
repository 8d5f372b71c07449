"""Trajectory log: one CSV row per control step.

Floats are written with ``repr`` so a parse gives back the exact values.
Empty fields mean "no value" (no marker this step).
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

MODES = ("direct", "fallback", "lost")


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class TrajectoryRecord:
    t: float
    x: float
    y: float
    theta: float
    v: float
    steer: float
    d: float | None
    delta: float | None
    mode: str
    gate_index: int
    out1: float = 0.0
    out2: float = 0.0
    points: tuple | None = None  # ((r, c) x 4) in TL, TR, BL, BR order


_SCALARS = [f.name for f in fields(TrajectoryRecord) if f.name != "points"]
POINT_COLUMNS = [f"p{i}_{ax}" for i in range(1, 5) for ax in ("row", "col")]
HEADER = _SCALARS + POINT_COLUMNS

_OPTIONAL = {"d", "delta"}
_INTS = {"gate_index"}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(records, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(HEADER)
    for rec in records:
        row = [_fmt(v) for v in astuple(rec)[:-1]]
        if rec.points is None:
            row += [""] * 8
        else:
            row += [str(int(v)) for p in rec.points for v in p]
        w.writerow(row)


def emits(records) -> str:
    buf = io.StringIO()
    emit(records, buf)
    return buf.getvalue()


def _parse_row(row, lineno):
    if len(row) != len(HEADER):
        raise ParseError(f"line {lineno}: expected {len(HEADER)} fields, got {len(row)}")
    values = {}
    try:
        for name, text in zip(_SCALARS, row):
            if name == "mode":
                if text not in MODES:
                    raise ParseError(f"line {lineno}: unknown mode {text!r}")
                values[name] = text
            elif text == "" and name in _OPTIONAL:
                values[name] = None
            elif name in _INTS:
                values[name] = int(text)
            else:
                values[name] = float(text)
        tail = row[len(_SCALARS):]
        if all(t == "" for t in tail):
            values["points"] = None
        else:
            nums = [int(t) for t in tail]
            values["points"] = tuple((nums[i], nums[i + 1]) for i in range(0, 8, 2))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"line {lineno}: {exc}") from exc
    return TrajectoryRecord(**values)


def parse(stream) -> list[TrajectoryRecord]:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: missing header") from None
    if header != HEADER:
        raise ParseError(f"unexpected header {header!r}")
    out = [_parse_row(row, i) for i, row in enumerate(reader, start=2)]
    for a, b in zip(out, out[1:]):
        if not b.t > a.t:
            raise ParseError(f"time not increasing at t={b.t!r}")
    return out


def parses(text: str) -> list[TrajectoryRecord]:
    return parse(io.StringIO(text))


def read(path) -> list[TrajectoryRecord]:
    with open(path, newline="") as f:
        return parse(f)


def write(path, records) -> None:
    with open(path, "w", newline="") as f:
        emit(records, f)
