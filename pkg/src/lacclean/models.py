"""Core domain types shared by every stage of the pipeline.

A GSM cell is identified by the four-part CGI key (MCC, MNC, LAC, Cell-ID).
MCC and MNC may be absent: several public datasets strip them, leaving only
LAC and Cell-ID usable for location lookups. All types are frozen
dataclasses; equality includes field absence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator

# GSM reserves LAC 0, 0xFFFE and 0xFFFF.
LAC_MIN = 1
LAC_MAX = 65533
# 16-bit for GSM cells; 28-bit UMTS-style cell identities are accepted too.
CELL_ID_MAX = 2**28 - 1
CODE_MAX = 999  # MCC / MNC are three decimal digits


@dataclass(frozen=True)
class CellIdentity:
    """Full or partial CGI key. ``mcc``/``mnc`` are None when absent."""

    mcc: int | None
    mnc: int | None
    lac: int
    cell_id: int

    def __post_init__(self):
        for name in ("mcc", "mnc"):
            value = getattr(self, name)
            if value is not None and not (0 <= value <= CODE_MAX):
                raise ValueError(f"{name} out of range: {value}")
        if not (LAC_MIN <= self.lac <= LAC_MAX):
            raise ValueError(f"lac out of range: {self.lac}")
        if not (0 <= self.cell_id <= CELL_ID_MAX):
            raise ValueError(f"cell_id out of range: {self.cell_id}")

    @property
    def sort_key(self) -> tuple:
        """Total order over possibly-partial keys; absent sorts before present."""
        return (
            (0, 0) if self.mcc is None else (1, self.mcc),
            (0, 0) if self.mnc is None else (1, self.mnc),
            self.lac,
            self.cell_id,
        )


@dataclass(frozen=True)
class TraceEvent:
    """One row of a mobility trace: a cell observation at a UTC instant."""

    timestamp: datetime
    cell: CellIdentity


@dataclass(frozen=True)
class CellSet:
    """Distinct cells in canonical order: sorted by (mcc, mnc, lac, cell_id),
    absent fields before present ones."""

    cells: tuple[CellIdentity, ...]

    @classmethod
    def from_iterable(cls, cells: Iterable[CellIdentity]) -> "CellSet":
        return cls(tuple(sorted(set(cells), key=lambda c: c.sort_key)))

    def __iter__(self) -> Iterator[CellIdentity]:
        return iter(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell: object) -> bool:
        return cell in self.cells


@dataclass(frozen=True)
class GeoPoint:
    """WGS-84 coordinates in degrees. ``lon`` is kept in [-180, 180);
    exactly +180 is folded to -180 on construction."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"lat out of range: {self.lat}")
        if self.lon == 180.0:
            object.__setattr__(self, "lon", -180.0)
        elif not (-180.0 <= self.lon < 180.0):
            raise ValueError(f"lon out of range: {self.lon}")


@dataclass(frozen=True)
class ResolvedCell:
    """A cell bound to coordinates, with how the match was made.

    ``match_kind`` is "wildcard" only when the query had absent mcc/mnc.
    """

    cell: CellIdentity
    point: GeoPoint
    match_kind: str = field(default="exact")

    def __post_init__(self):
        if self.match_kind not in ("exact", "wildcard"):
            raise ValueError(f"bad match_kind: {self.match_kind}")
        if self.match_kind == "wildcard" and not (
            self.cell.mcc is None or self.cell.mnc is None
        ):
            raise ValueError("wildcard match requires an absent mcc or mnc")
