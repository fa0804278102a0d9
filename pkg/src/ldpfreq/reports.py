"""Sanitized report types and their line-delimited JSON encoding.

Each report kind serializes to one JSON object per line with a ``"t"`` tag:

    {"t": "value", "v": 3}
    {"t": "bits", "b": "01001"}
    {"t": "lh", "seed": 18446744073709551615, "b": 2}
    {"t": "subset", "s": [1, 4]}
    {"t": "dbit", "idx": [0, 3], "bits": "10"}
    {"t": "spl", "reports": [...]}
    {"t": "smp", "attr": 1, "reports": [...]}
    {"t": "rsfd", "reports": [...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

from .errors import LDPError


@dataclass(frozen=True)
class Value:
    v: int


@dataclass(frozen=True)
class Bits:
    b: tuple[int, ...]


@dataclass(frozen=True)
class LhPair:
    seed: int
    bucket: int


@dataclass(frozen=True)
class Subset:
    s: tuple[int, ...]


@dataclass(frozen=True)
class DBitReport:
    idx: tuple[int, ...]
    bits: tuple[int, ...]


@dataclass(frozen=True)
class SplReport:
    reports: tuple


@dataclass(frozen=True)
class SmpReport:
    attr: int
    report: object


@dataclass(frozen=True)
class RsfdReport:
    reports: tuple


Report = Union[Value, Bits, LhPair, Subset, DBitReport]
MdimReport = Union[SplReport, SmpReport, RsfdReport]


def _bitstring(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def _parse_bits(s: str) -> tuple[int, ...]:
    if any(c not in "01" for c in s):
        raise LDPError(f"bit string must contain only 0/1, got {s!r}")
    return tuple(int(c) for c in s)


def to_dict(report) -> dict:
    if isinstance(report, Value):
        return {"t": "value", "v": int(report.v)}
    if isinstance(report, Bits):
        return {"t": "bits", "b": _bitstring(report.b)}
    if isinstance(report, LhPair):
        return {"t": "lh", "seed": int(report.seed), "b": int(report.bucket)}
    if isinstance(report, Subset):
        return {"t": "subset", "s": [int(x) for x in report.s]}
    if isinstance(report, DBitReport):
        return {"t": "dbit", "idx": [int(x) for x in report.idx], "bits": _bitstring(report.bits)}
    if isinstance(report, SplReport):
        return {"t": "spl", "reports": [to_dict(r) for r in report.reports]}
    if isinstance(report, SmpReport):
        return {"t": "smp", "attr": int(report.attr), "reports": [to_dict(report.report)]}
    if isinstance(report, RsfdReport):
        return {"t": "rsfd", "reports": [to_dict(r) for r in report.reports]}
    raise TypeError(f"not a report: {report!r}")


def from_dict(obj: dict):
    t = obj.get("t")
    if t == "value":
        return Value(int(obj["v"]))
    if t == "bits":
        return Bits(_parse_bits(obj["b"]))
    if t == "lh":
        seed = int(obj["seed"])
        if not 0 <= seed < 2**64:
            raise LDPError(f"lh seed out of unsigned 64-bit range: {seed}")
        return LhPair(seed, int(obj["b"]))
    if t == "subset":
        return Subset(tuple(int(x) for x in obj["s"]))
    if t == "dbit":
        return DBitReport(tuple(int(x) for x in obj["idx"]), _parse_bits(obj["bits"]))
    if t == "spl":
        return SplReport(tuple(from_dict(r) for r in obj["reports"]))
    if t == "smp":
        (inner,) = obj["reports"]
        return SmpReport(int(obj["attr"]), from_dict(inner))
    if t == "rsfd":
        return RsfdReport(tuple(from_dict(r) for r in obj["reports"]))
    raise LDPError(f"unknown report tag {t!r}")


def dumps(report) -> str:
    return json.dumps(to_dict(report), separators=(",", ":"))


def loads(line: str):
    return from_dict(json.loads(line))


def write_reports(reports: Iterable, fp: IO[str]) -> int:
    count = 0
    for r in reports:
        fp.write(dumps(r))
        fp.write("\n")
        count += 1
    return count


def read_reports(fp: IO[str]) -> Iterator:
    for line in fp:
        line = line.strip()
        if line:
            yield loads(line)
