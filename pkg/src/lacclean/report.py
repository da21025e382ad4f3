"""Retention statistics, coverage series, and GeoJSON/CSV/SVG exports.

All serializers are pure and deterministic: the same CleanResult yields
byte-identical documents, which the pipeline relies on for reproducible
artifacts. Row/feature order is ascending lac, then representatives,
outliers and insufficient-density members, each in canonical cell order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import IO, Iterable, Sequence

from .cluster import CleanResult, CleanStats, LacCleanResult
from .errors import MalformedRow, OrderingViolation
from .ingest import _read_text
from .models import CellIdentity, GeoPoint, ResolvedCell, TraceEvent

EXPORT_CSV_HEADER = "mcc,mnc,lac,cell_id,lat,lon,role"

ROLE_REPRESENTATIVE = "representative"
ROLE_OUTLIER = "outlier"
ROLE_INSUFFICIENT = "insufficient"

# fixed 12-color cycle keyed by lac % 12
LAC_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)


@dataclass(frozen=True)
class RetentionTable:
    total_unique: int
    resolved: int
    retained: int
    resolved_pct: float
    retained_pct_of_total: float
    notes: tuple[str, ...] = ()


def _pct(part: int, total: int) -> float:
    """100 * part / total, rounded half-up to one decimal."""
    if total == 0:
        return 0.0
    value = Decimal(100 * part) / Decimal(total)
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def retention_stats(
    total: int, resolved: int, retained: int,
    claimed_retained_pct: float | None = None,
) -> RetentionTable:
    """Retention accounting across the two lossy stages.

    ``claimed_retained_pct`` lets callers audit an externally reported
    retention figure: when it disagrees with the percentage computed from
    the counts, the discrepancy is recorded in the table's notes (the
    computed value is authoritative).
    """
    if not (0 <= retained <= resolved <= total):
        raise OrderingViolation(
            f"need retained <= resolved <= total, got {retained}, {resolved}, {total}"
        )
    resolved_pct = _pct(resolved, total)
    retained_pct = _pct(retained, total)
    notes: list[str] = []
    if claimed_retained_pct is not None and claimed_retained_pct != retained_pct:
        notes.append(
            f"retained share computed from counts is {retained_pct}% of total; "
            f"externally claimed figure was {claimed_retained_pct:g}%; "
            "the computed value is authoritative"
        )
    return RetentionTable(total, resolved, retained, resolved_pct, retained_pct, tuple(notes))


def retention_to_dict(table: RetentionTable) -> dict:
    return {
        "total_unique": table.total_unique,
        "resolved": table.resolved,
        "retained": table.retained,
        "resolved_pct": table.resolved_pct,
        "retained_pct_of_total": table.retained_pct_of_total,
        "notes": list(table.notes),
    }


@dataclass(frozen=True)
class CoverageSeries:
    """Per-window event counts before (resolved) and after (retained) cleaning."""

    window: int
    bins: tuple[tuple[int, int, int], ...]  # (bin index, before, after)


def coverage_series(
    events: Sequence[TraceEvent],
    resolved: Iterable[CellIdentity],
    retained: Iterable[CellIdentity],
    window: int,
) -> CoverageSeries:
    """Count events per fixed-size window of trace order.

    ``before`` counts events on resolved cells, ``after`` those on retained
    cells; the final partial window is included.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    resolved_set = frozenset(resolved)
    retained_set = frozenset(retained)
    if not retained_set <= resolved_set:
        raise OrderingViolation("retained cells must be a subset of resolved cells")
    bins = []
    for start in range(0, len(events), window):
        chunk = events[start : start + window]
        before = sum(1 for ev in chunk if ev.cell in resolved_set)
        after = sum(1 for ev in chunk if ev.cell in retained_set)
        bins.append((start // window, before, after))
    return CoverageSeries(window, tuple(bins))


def coverage_to_dict(series: CoverageSeries) -> dict:
    return {
        "window": series.window,
        "bins": [
            {"bin": b, "before": before, "after": after}
            for b, before, after in series.bins
        ],
    }


def _result_rows(result: CleanResult) -> list[tuple[ResolvedCell, str]]:
    rows: list[tuple[ResolvedCell, str]] = []
    for lr in result.per_lac:
        rows.extend((rc, ROLE_REPRESENTATIVE) for rc in lr.representative)
        rows.extend((rc, ROLE_OUTLIER) for rc in lr.outliers)
        rows.extend((rc, ROLE_INSUFFICIENT) for rc in lr.insufficient)
    return rows


def export_geojson(result: CleanResult) -> bytes:
    """FeatureCollection of Point features, coordinates in [lon, lat] order."""
    features = []
    for rc, role in _result_rows(result):
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [rc.point.lon, rc.point.lat],
                },
                "properties": {
                    "mcc": rc.cell.mcc,
                    "mnc": rc.cell.mnc,
                    "lac": rc.cell.lac,
                    "cell_id": rc.cell.cell_id,
                    "role": role,
                },
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def export_csv(result: CleanResult) -> bytes:
    lines = [EXPORT_CSV_HEADER]
    for rc, role in _result_rows(result):
        mcc = "" if rc.cell.mcc is None else rc.cell.mcc
        mnc = "" if rc.cell.mnc is None else rc.cell.mnc
        lines.append(
            f"{mcc},{mnc},{rc.cell.lac},{rc.cell.cell_id},"
            f"{rc.point.lat!r},{rc.point.lon!r},{role}"
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_export_csv(stream: IO | bytes | str) -> list[tuple[CellIdentity, GeoPoint, str]]:
    """Re-parse an export_csv document; the round trip is lossless."""
    text = _read_text(stream)
    if not text.strip():
        return []
    lines = text.splitlines()
    if lines[0] != EXPORT_CSV_HEADER:
        raise MalformedRow(1, f"bad header, expected {EXPORT_CSV_HEADER!r}")
    out = []
    for line_no, raw in enumerate(lines[1:], start=2):
        fields = raw.split(",")
        if len(fields) != 7:
            raise MalformedRow(line_no, f"expected 7 fields, got {len(fields)}")
        mcc_raw, mnc_raw, lac_raw, cid_raw, lat_raw, lon_raw, role = fields
        if role not in (ROLE_REPRESENTATIVE, ROLE_OUTLIER, ROLE_INSUFFICIENT):
            raise MalformedRow(line_no, f"bad role: {role!r}")
        try:
            cell = CellIdentity(
                int(mcc_raw) if mcc_raw else None,
                int(mnc_raw) if mnc_raw else None,
                int(lac_raw),
                int(cid_raw),
            )
            point = GeoPoint(float(lat_raw), float(lon_raw))
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from None
        out.append((cell, point, role))
    return out


def clean_result_from_rows(rows: Sequence[tuple[CellIdentity, GeoPoint, str]]) -> CleanResult:
    """Rebuild a CleanResult from exported rows (for scoring a saved run).

    Discarded-cluster diagnostics are not serialized, so they come back
    empty; buckets and statuses are fully reconstructed.
    """
    by_lac: dict[int, dict[str, list[ResolvedCell]]] = {}
    for cell, point, role in rows:
        bucket = by_lac.setdefault(
            cell.lac,
            {ROLE_REPRESENTATIVE: [], ROLE_OUTLIER: [], ROLE_INSUFFICIENT: []},
        )
        bucket[role].append(ResolvedCell(cell, point, "exact"))
    per_lac = []
    for lac in sorted(by_lac):
        buckets = by_lac[lac]
        for role_rows in buckets.values():
            role_rows.sort(key=lambda rc: rc.cell.sort_key)
        if buckets[ROLE_INSUFFICIENT]:
            per_lac.append(
                LacCleanResult(
                    lac, (), (), "insufficient_density",
                    insufficient=tuple(buckets[ROLE_INSUFFICIENT]),
                )
            )
        else:
            per_lac.append(
                LacCleanResult(
                    lac,
                    tuple(buckets[ROLE_REPRESENTATIVE]),
                    tuple(buckets[ROLE_OUTLIER]),
                    "ok",
                )
            )
    retained = sum(len(r.representative) for r in per_lac)
    outliers = sum(len(r.outliers) for r in per_lac)
    insufficient = sum(len(r.insufficient) for r in per_lac)
    ok = sum(1 for r in per_lac if r.status == "ok")
    stats = CleanStats(
        total=retained + outliers + insufficient,
        retained=retained,
        outliers=outliers,
        insufficient=insufficient,
        lacs=len(per_lac),
        lacs_ok=ok,
        lacs_insufficient=len(per_lac) - ok,
        discarded_dense_clusters=0,
    )
    return CleanResult(tuple(per_lac), stats)


def _svg_document(points: list[tuple[float, float, int, str]]) -> bytes:
    """Render (lat, lon, lac, role) markers into a standalone SVG.

    Equirectangular viewport: x is longitude scaled by cos(mid latitude),
    y is latitude, fit to the data's bounding box plus a 5% margin.
    """
    width = 800.0
    if not points:
        svg = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            'width="800" height="600" viewBox="0 0 800 600">\n'
            '<rect x="0" y="0" width="800" height="600" fill="white"/>\n'
            "</svg>\n"
        )
        return svg.encode("utf-8")

    lats = [p[0] for p in points]
    lons = [p[1] for p in points]
    mid_lat = (min(lats) + max(lats)) / 2.0
    cos0 = math.cos(math.radians(mid_lat))
    xs = [lon * cos0 for lon in lons]
    ys = lats
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    dx = max(x1 - x0, 1e-6)
    dy = max(y1 - y0, 1e-6)
    x0 -= 0.05 * dx
    x1 += 0.05 * dx
    y0 -= 0.05 * dy
    y1 += 0.05 * dy
    dx = x1 - x0
    dy = y1 - y0
    height = width * dy / dx

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width:.0f}" height="{height:.2f}" '
        f'viewBox="0 0 {width:.0f} {height:.2f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.2f}" fill="white"/>',
    ]
    for lat, lon, lac, role in points:
        cx = (lon * cos0 - x0) / dx * width
        cy = height - (lat - y0) / dy * height
        color = LAC_PALETTE[lac % 12]
        if role == ROLE_OUTLIER:
            style = f'fill="none" stroke="{color}" stroke-width="1.5"'
        elif role == ROLE_INSUFFICIENT:
            style = f'fill="{color}" fill-opacity="0.35" stroke="{color}"'
        else:
            style = f'fill="{color}" stroke="none"'
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" {style}/>')
    parts.append("</svg>")
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_scatter(result: CleanResult) -> bytes:
    """One marker per cell: representatives filled, outliers open circles."""
    pts = [
        (rc.point.lat, rc.point.lon, rc.cell.lac, role)
        for rc, role in _result_rows(result)
    ]
    return _svg_document(pts)


def render_cells_scatter(cells: Sequence[ResolvedCell]) -> bytes:
    """Scatter of resolved cells before cleaning, colored by LAC."""
    pts = [
        (rc.point.lat, rc.point.lon, rc.cell.lac, ROLE_REPRESENTATIVE)
        for rc in cells
    ]
    return _svg_document(pts)
