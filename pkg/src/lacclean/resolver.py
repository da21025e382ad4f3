"""Cell-ID to coordinate resolution against a local database.

The database is a CSV snapshot (header ``mcc,mnc,lac,cell_id,lat,lon,freshness``)
standing in for the public lookup services such batches used to run against.
Two match policies exist:

* exact_only — the query quadruple, including which fields are absent,
  must equal a stored row's key.
* allow_wildcard — when the query lacks mcc and/or mnc, any row agreeing
  on the fields the query does have is a candidate. A unique candidate
  resolves; several candidates resolve to the smallest (mcc, mnc) pair and
  the ambiguity is counted rather than hidden, since LAC reuse across
  operators is exactly the kind of thing that introduces bad coordinates.

Rows with the same quadruple are collapsed at load time, keeping the
highest freshness ordinal (ties: last in file). Stale entries from cell
relabeling/reuse are the main corruption source, so freshness is the only
defensible conflict signal.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

from .errors import MalformedRow
from .ingest import _parse_int, _read_text
from .models import CellIdentity, CellSet, GeoPoint, ResolvedCell

CELL_DB_HEADER = "mcc,mnc,lac,cell_id,lat,lon,freshness"

Quad = tuple[int | None, int | None, int, int]


class MatchPolicy(str, Enum):
    EXACT_ONLY = "exact_only"
    ALLOW_WILDCARD = "allow_wildcard"


@dataclass(frozen=True)
class ResolutionStats:
    total: int
    resolved: int
    unresolved: int
    wildcard_ambiguous: int


def _quad(cell: CellIdentity) -> Quad:
    return (cell.mcc, cell.mnc, cell.lac, cell.cell_id)


def _code_key(value: int | None) -> tuple[int, int]:
    return (0, 0) if value is None else (1, value)


class CellDatabase:
    """Immutable after load; lookups are read-only and thread-safe."""

    def __init__(self, rows: dict[Quad, tuple[GeoPoint, int]]):
        self._rows = rows
        self._by_cell: dict[tuple[int, int], list[Quad]] = {}
        for quad in rows:
            self._by_cell.setdefault((quad[2], quad[3]), []).append(quad)
        for quads in self._by_cell.values():
            quads.sort(key=lambda q: (_code_key(q[0]), _code_key(q[1])))

    def __len__(self) -> int:
        return len(self._rows)

    def get(self, cell: CellIdentity) -> GeoPoint | None:
        row = self._rows.get(_quad(cell))
        return row[0] if row else None

    def candidates(self, cell: CellIdentity) -> list[Quad]:
        """Stored quadruples agreeing with the query's present fields,
        ordered by (mcc, mnc) with absent first."""
        out = []
        for quad in self._by_cell.get((cell.lac, cell.cell_id), []):
            if cell.mcc is not None and quad[0] != cell.mcc:
                continue
            if cell.mnc is not None and quad[1] != cell.mnc:
                continue
            out.append(quad)
        return out

    def point_for(self, quad: Quad) -> GeoPoint:
        return self._rows[quad][0]


def _parse_optional_code(raw: str, name: str) -> int | None:
    if raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} is not an integer: {raw!r}") from None
    if not (0 <= value <= 999):
        raise ValueError(f"{name} out of range: {raw}")
    return value


def load_cell_db(stream: IO | bytes | str) -> CellDatabase:
    """Load the native cell-DB CSV; any malformed line raises MalformedRow."""
    text = _read_text(stream)
    if not text.strip():
        return CellDatabase({})
    lines = text.splitlines()
    if lines[0] != CELL_DB_HEADER:
        raise MalformedRow(1, f"bad header, expected {CELL_DB_HEADER!r}")
    best: dict[Quad, tuple[int, int, GeoPoint]] = {}  # quad -> (freshness, file order, point)
    for line_no, raw in enumerate(lines[1:], start=2):
        try:
            quad, point, freshness = _parse_db_row(raw)
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        prior = best.get(quad)
        if prior is None or freshness >= prior[0]:
            best[quad] = (freshness, line_no, point)
    return CellDatabase({q: (p, f) for q, (f, _, p) in best.items()})


def _parse_db_row(raw: str) -> tuple[Quad, GeoPoint, int]:
    fields = raw.split(",")
    if len(fields) != 7:
        raise ValueError(f"expected 7 fields, got {len(fields)}")
    mcc_raw, mnc_raw, lac_raw, cid_raw, lat_raw, lon_raw, fresh_raw = fields
    mcc = _parse_optional_code(mcc_raw, "mcc")
    mnc = _parse_optional_code(mnc_raw, "mnc")
    lac = _parse_int(lac_raw, "lac")
    cid = _parse_int(cid_raw, "cell_id")
    try:
        cell = CellIdentity(mcc, mnc, lac, cid)
    except ValueError as exc:
        raise ValueError(str(exc)) from None
    try:
        lat = float(lat_raw)
        lon = float(lon_raw)
    except ValueError:
        raise ValueError(f"bad coordinates: {lat_raw!r},{lon_raw!r}") from None
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise ValueError(f"coordinate out of range: {lat},{lon}")
    point = GeoPoint(lat, lon)
    freshness = 0
    if fresh_raw != "":
        try:
            freshness = int(fresh_raw)
        except ValueError:
            raise ValueError(f"bad freshness: {fresh_raw!r}") from None
    return _quad(cell), point, freshness


def load_opencellid_csv(stream: IO | bytes | str) -> CellDatabase:
    """Adapter for OpenCellID-style exports.

    Expects the usual column order ``radio,mcc,net,area,cell,unit,lon,lat,
    range,samples,changeable,created,updated,averageSignal`` (note lon
    before lat) and maps ``updated`` to the freshness ordinal. Non-GSM-range
    identifiers raise like any other malformed row.
    """
    text = _read_text(stream)
    if not text.strip():
        return CellDatabase({})
    lines = text.splitlines()
    start = 1 if lines[0].startswith("radio,") else 0
    best: dict[Quad, tuple[int, int, GeoPoint]] = {}
    for line_no, raw in enumerate(lines[start:], start=start + 1):
        fields = raw.split(",")
        if len(fields) < 13:
            raise MalformedRow(line_no, f"expected >= 13 fields, got {len(fields)}")
        try:
            mcc = _parse_optional_code(fields[1], "mcc")
            mnc = _parse_optional_code(fields[2], "mnc")
            cell = CellIdentity(mcc, mnc, int(fields[3]), int(fields[4]))
            lon = float(fields[6])
            lat = float(fields[7])
            if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
                raise ValueError(f"coordinate out of range: {lat},{lon}")
            freshness = int(fields[12]) if fields[12] else 0
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        quad = _quad(cell)
        prior = best.get(quad)
        if prior is None or freshness >= prior[0]:
            best[quad] = (freshness, line_no, GeoPoint(lat, lon))
    return CellDatabase({q: (p, f) for q, (f, _, p) in best.items()})


def _resolve(db: CellDatabase, cell: CellIdentity,
             policy: MatchPolicy) -> tuple[ResolvedCell | None, bool]:
    """Returns (resolution, ambiguous-wildcard flag)."""
    point = db.get(cell)
    if point is not None:
        return ResolvedCell(cell, point, "exact"), False
    if policy is MatchPolicy.ALLOW_WILDCARD and (cell.mcc is None or cell.mnc is None):
        cands = db.candidates(cell)
        if cands:
            return (
                ResolvedCell(cell, db.point_for(cands[0]), "wildcard"),
                len(cands) > 1,
            )
    return None, False


def resolve_cell(db: CellDatabase, cell: CellIdentity,
                 policy: MatchPolicy = MatchPolicy.ALLOW_WILDCARD) -> ResolvedCell | None:
    """Resolve one cell; None means unresolved (a value, not an error)."""
    return _resolve(db, cell, policy)[0]


def resolve_all(
    db: CellDatabase, cells: CellSet | Iterable[CellIdentity],
    policy: MatchPolicy = MatchPolicy.ALLOW_WILDCARD,
) -> tuple[list[ResolvedCell], list[CellIdentity], ResolutionStats]:
    """Partition cells into resolved and unresolved, preserving input order."""
    resolved: list[ResolvedCell] = []
    unresolved: list[CellIdentity] = []
    ambiguous = 0
    total = 0
    for cell in cells:
        total += 1
        hit, amb = _resolve(db, cell, policy)
        if hit is None:
            unresolved.append(cell)
        else:
            resolved.append(hit)
            if amb:
                ambiguous += 1
    stats = ResolutionStats(total, len(resolved), len(unresolved), ambiguous)
    return resolved, unresolved, stats


class LookupClient(ABC):
    """Interface for batch remote lookups.

    No live endpoint ships with this package (the historical public one is
    gone); implementations adapt whatever service or file a deployment has.
    """

    @abstractmethod
    def query_batch(self, cells: Sequence[CellIdentity]) -> list[GeoPoint | None]:
        """One GeoPoint-or-miss per input cell, in input order."""


class DatabaseLookupClient(LookupClient):
    """LookupClient over a local CellDatabase, mainly for tests and offline use."""

    def __init__(self, db: CellDatabase, policy: MatchPolicy = MatchPolicy.ALLOW_WILDCARD):
        self._db = db
        self._policy = policy

    def query_batch(self, cells: Sequence[CellIdentity]) -> list[GeoPoint | None]:
        out = []
        for cell in cells:
            hit = resolve_cell(self._db, cell, self._policy)
            out.append(hit.point if hit else None)
        return out


class CachingLookupClient(LookupClient):
    """Bounded LRU cache (keyed by quadruple) in front of another client.

    Behaves as if lookups were serialized; concurrent duplicate fetches of
    the same key may both hit the inner client, which is allowed.
    """

    def __init__(self, inner: LookupClient, max_entries: int = 4096):
        if max_entries < 1:
            raise ValueError("max_entries must be >= 1")
        self._inner = inner
        self._max = max_entries
        self._cache: OrderedDict[Quad, GeoPoint | None] = OrderedDict()
        self._lock = threading.Lock()

    def query_batch(self, cells: Sequence[CellIdentity]) -> list[GeoPoint | None]:
        out: list[GeoPoint | None] = [None] * len(cells)
        misses: list[int] = []
        with self._lock:
            for i, cell in enumerate(cells):
                quad = _quad(cell)
                if quad in self._cache:
                    self._cache.move_to_end(quad)
                    out[i] = self._cache[quad]
                else:
                    misses.append(i)
        if misses:
            fetched = self._inner.query_batch([cells[i] for i in misses])
            with self._lock:
                for i, point in zip(misses, fetched):
                    out[i] = point
                    self._cache[_quad(cells[i])] = point
                    self._cache.move_to_end(_quad(cells[i]))
                    while len(self._cache) > self._max:
                        self._cache.popitem(last=False)
        return out
