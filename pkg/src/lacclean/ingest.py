"""Mobility trace parsing and unique-cell extraction.

Trace CSV format: UTF-8, header line exactly
``timestamp,mcc,mnc,lac,cell_id``; timestamps are ISO-8601 UTC with a
trailing Z and second resolution; mcc/mnc may be empty (absent); lac and
cell_id are decimal integers. Both LF and CRLF line endings are accepted.

Timestamps must be syntactically valid but events need not be in time
order: downstream clustering never uses time, only the coverage plots do.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable

from .errors import MalformedRow
from .models import CellIdentity, CellSet, TraceEvent

TRACE_HEADER = "timestamp,mcc,mnc,lac,cell_id"

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


@dataclass
class ParsedTrace:
    """Events in file order plus, in lenient mode, the skipped lines."""

    events: list[TraceEvent] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (line_no, reason)


def _read_text(stream: IO | bytes | str) -> str:
    if isinstance(stream, str):
        return stream
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _parse_code(raw: str, name: str) -> int | None:
    if raw == "":
        return None
    value = _parse_int(raw, name)
    if not (0 <= value <= 999):
        raise ValueError(f"{name} out of range: {raw}")
    return value


def _parse_int(raw: str, name: str) -> int:
    if not raw or not raw.isascii() or not raw.isdigit():
        raise ValueError(f"{name} is not a decimal integer: {raw!r}")
    return int(raw)


def parse_row(raw: str) -> TraceEvent:
    """Parse one data row; raises ValueError with a reason on any defect."""
    fields = raw.split(",")
    if len(fields) != 5:
        raise ValueError(f"expected 5 fields, got {len(fields)}")
    ts_raw, mcc_raw, mnc_raw, lac_raw, cid_raw = fields
    if not _TS_RE.match(ts_raw):
        raise ValueError(f"bad timestamp: {ts_raw!r}")
    ts = datetime.strptime(ts_raw, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
    mcc = _parse_code(mcc_raw, "mcc")
    mnc = _parse_code(mnc_raw, "mnc")
    lac = _parse_int(lac_raw, "lac")
    cid = _parse_int(cid_raw, "cell_id")
    try:
        cell = CellIdentity(mcc, mnc, lac, cid)
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    return TraceEvent(ts, cell)


def parse_trace(stream: IO | bytes | str, *, lenient: bool = False) -> ParsedTrace:
    """Parse a trace file.

    In strict mode (default) the first malformed line raises MalformedRow
    with its 1-based line number; in lenient mode malformed lines are
    skipped and recorded. Empty input yields an empty result. Duplicate
    rows are kept: repeat visits matter for coverage counts.
    """
    text = _read_text(stream)
    result = ParsedTrace()
    if not text.strip():
        return result
    lines = text.splitlines()
    if lines[0] != TRACE_HEADER:
        if not lenient:
            raise MalformedRow(1, f"bad header, expected {TRACE_HEADER!r}")
        result.skipped.append((1, "bad header"))
    for line_no, raw in enumerate(lines[1:], start=2):
        try:
            result.events.append(parse_row(raw))
        except ValueError as exc:
            if not lenient:
                raise MalformedRow(line_no, str(exc)) from None
            result.skipped.append((line_no, str(exc)))
    return result


def extract_unique_cells(events: Iterable[TraceEvent]) -> CellSet:
    """Distinct cells of a trace, in canonical sort order."""
    return CellSet.from_iterable(e.cell for e in events)
