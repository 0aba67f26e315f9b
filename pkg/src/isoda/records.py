"""JSON-lines label records and the flat ``key = value`` experiment config."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

RECORD_KEYS = ("id", "gamma", "label_a", "label_b", "soft")


class RecordError(ValueError):
    """A malformed or inconsistent record; ``row`` is 1-based."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


def fmt_float(x: float) -> str:
    x = float(x)
    # "-0" would parse back as the integer 0
    if x == 0.0 and math.copysign(1.0, x) < 0:
        return "-0.0"
    return format(x, ".17g")


@dataclass(frozen=True)
class LabelRecord:
    id: str
    gamma: float
    label_a: int
    label_b: int
    soft: tuple[float, ...]

    def to_line(self) -> str:
        soft = ", ".join(fmt_float(v) for v in self.soft)
        return (f'{{"id": {json.dumps(self.id)}, "gamma": {fmt_float(self.gamma)}, '
                f'"label_a": {int(self.label_a)}, "label_b": {int(self.label_b)}, "soft": [{soft}]}}')


def parse_record(line: str, row: int) -> LabelRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordError(row, f"invalid JSON ({e.msg})") from None
    if not isinstance(obj, dict) or set(obj) != set(RECORD_KEYS):
        raise RecordError(row, f"expected keys {sorted(RECORD_KEYS)}")
    soft = obj["soft"]
    if not isinstance(obj["id"], str):
        raise RecordError(row, "id must be a string")
    for key in ("label_a", "label_b"):
        if isinstance(obj[key], bool) or not isinstance(obj[key], int):
            raise RecordError(row, f"{key} must be an integer")
    if isinstance(obj["gamma"], bool) or not isinstance(obj["gamma"], (int, float)):
        raise RecordError(row, "gamma must be a number")
    if not isinstance(soft, list) or len(soft) < 2 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in soft):
        raise RecordError(row, "soft must be a list of at least two numbers")
    return LabelRecord(obj["id"], float(obj["gamma"]), obj["label_a"], obj["label_b"],
                       tuple(float(v) for v in soft))


def read_records(lines: Iterable[str]) -> Iterator[LabelRecord]:
    """Parse records, skipping blank lines and checking one label-space size throughout."""
    c = None
    for row, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = parse_record(line, row)
        if c is None:
            c = len(rec.soft)
        elif len(rec.soft) != c:
            raise RecordError(row, f"soft has {len(rec.soft)} entries, earlier rows have {c}")
        yield rec


def write_records(records: Iterable[LabelRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


def parse_config(text: str) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment. Values stay strings."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {n}: empty key")
        if key in out:
            raise ValueError(f"config line {n}: duplicate key {key!r}")
        out[key] = value
    return out
