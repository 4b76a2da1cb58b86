"""Workload traces and per-request measurement records, with their CSV forms."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Sequence

DEFAULT_SLA = 30.0


@dataclass(frozen=True)
class TraceEntry:
    offset: float
    entity_id: str = ""
    poi_id: str = ""
    formula_ref: str = ""


@dataclass(frozen=True)
class WorkloadTrace:
    """Requests at offsets (seconds from trace start). ``duration`` is the
    nominal window the trace covers; it defaults to the last offset."""

    entries: tuple[TraceEntry, ...]
    duration: float | None = None

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        for a, b in zip(entries, entries[1:]):
            if b.offset < a.offset:
                raise ValueError("trace offsets must be nondecreasing")
        if entries and entries[0].offset < 0:
            raise ValueError("trace offsets must be nonnegative")
        if self.duration is None:
            object.__setattr__(self, "duration", entries[-1].offset if entries else 0.0)

    @classmethod
    def from_offsets(cls, offsets: Iterable[float], duration: float | None = None) -> WorkloadTrace:
        return cls(tuple(TraceEntry(float(o)) for o in offsets), duration)

    @property
    def offsets(self) -> list[float]:
        return [e.offset for e in self.entries]

    def scaled(self, multiplier: float) -> WorkloadTrace:
        """The same requests submitted ``multiplier`` times faster."""
        if multiplier <= 0:
            raise ValueError("multiplier must be positive")
        return WorkloadTrace(
            tuple(TraceEntry(e.offset / multiplier, e.entity_id, e.poi_id, e.formula_ref) for e in self.entries),
            self.duration / multiplier,
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)


def write_trace(path: str | Path, trace: WorkloadTrace) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# duration_s={trace.duration!r}\n")
        w = csv.writer(fh)
        w.writerow(["offset_s", "entity_id", "poi_id", "formula_ref"])
        for e in trace:
            w.writerow([repr(e.offset), e.entity_id, e.poi_id, e.formula_ref])


def read_trace(path: str | Path) -> WorkloadTrace:
    duration = None
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "duration_s":
                    duration = float(value)
                continue
            lines.append(line)
    rows = csv.DictReader(lines)
    entries = sorted(
        (TraceEntry(float(r["offset_s"]), r.get("entity_id") or "", r.get("poi_id") or "", r.get("formula_ref") or "")
         for r in rows),
        key=lambda e: e.offset,
    )
    return WorkloadTrace(tuple(entries), duration)


@dataclass(frozen=True)
class RequestRecord:
    index: int
    submit: float
    start: float
    end: float
    backend: str
    sla_violated: bool
    timed_out: bool = False
    error: str = ""

    def __post_init__(self):
        if not self.error and not self.submit <= self.start <= self.end:
            raise ValueError(f"record {self.index}: need submit <= start <= end")

    @property
    def wait(self) -> float:
        return self.start - self.submit

    @property
    def compute(self) -> float:
        return self.end - self.start

    @property
    def total(self) -> float:
        return self.end - self.submit

    @classmethod
    def make(cls, index, submit, start, end, backend, sla=DEFAULT_SLA, timeout=None, error=""):
        """Build a record, clipping at ``timeout`` and flagging SLA violations."""
        timed_out = False
        if timeout is not None and end - submit > timeout:
            end = submit + timeout
            start = min(start, end)
            timed_out = True
        return cls(index, submit, start, end, backend, (end - submit) > sla or timed_out or bool(error),
                   timed_out, error)


_RECORD_FIELDS = [f.name for f in fields(RequestRecord)]


def write_records(path: str | Path, records: Sequence[RequestRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_RECORD_FIELDS + ["wait", "compute", "total"])
        for r in records:
            w.writerow([repr(getattr(r, f)) if isinstance(getattr(r, f), float) else getattr(r, f)
                        for f in _RECORD_FIELDS] + [repr(r.wait), repr(r.compute), repr(r.total)])


def read_records(path: str | Path) -> list[RequestRecord]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            out.append(RequestRecord(
                int(r["index"]), float(r["submit"]), float(r["start"]), float(r["end"]), r["backend"],
                r["sla_violated"] == "True", r["timed_out"] == "True", r["error"],
            ))
    return out
