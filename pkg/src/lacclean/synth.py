"""Synthetic GSM topologies with ground-truth outlier labels.

Real cell datasets come without truth: nobody knows which database rows
were stale. This module builds worlds where the truth is known by
construction, so the cleaning pipeline can be scored. A world is a set of
location areas, each a hexagonal lattice of cells around a center (the
classic idealized GSM layout), with every clean cell within 35 km of its
LAC center. Outliers are injected by displacing a cell's stored
coordinate far away while remembering the true position.

All generators are pure functions of (config, seed) using the stdlib
Mersenne Twister; the PRNG identifier is recorded in the world manifest.
Reproducibility is guaranteed per build, not across Python versions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from random import Random
from typing import IO

from .cluster import CleanResult
from .errors import RegionTooSmall, WorldMismatch
from .geo import EARTH_RADIUS_M, Metric, distance, normalize_lon
from .models import CellIdentity, GeoPoint, TraceEvent
from .resolver import CELL_DB_HEADER

PRNG_ID = "mt19937/cpython-random"
MAX_LAC_EXTENT_M = 35_000.0
MIN_LAC_SEPARATION_M = 80_000.0
_PLACEMENT_ATTEMPTS = 10_000

_M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0

TRACE_EPOCH = datetime(2004, 9, 1, tzinfo=timezone.utc)
TRACE_SPACING = timedelta(seconds=60)


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("degenerate bounding box")
        if not (-90.0 <= self.lat_min and self.lat_max <= 90.0):
            raise ValueError("lat bounds out of range")


DEFAULT_REGION = BoundingBox(40.0, 48.0, -80.0, -70.0)


@dataclass(frozen=True)
class SynthCell:
    cell: CellIdentity
    true_point: GeoPoint    # where the cell really is
    stored_point: GeoPoint  # what the database will say
    label: str              # "clean" | "outlier"


@dataclass(frozen=True)
class SyntheticLac:
    lac: int
    center: GeoPoint
    cell_radius_m: float
    cells: tuple[SynthCell, ...]


@dataclass(frozen=True)
class OutlierSpec:
    rate: float
    displacement_min_m: float
    displacement_max_m: float

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise ValueError(f"rate must be in [0, 1], got {self.rate}")
        if not (0.0 <= self.displacement_min_m <= self.displacement_max_m):
            raise ValueError("displacement bounds out of order")


@dataclass(frozen=True)
class SyntheticWorld:
    lacs: tuple[SyntheticLac, ...]
    seed: int
    outlier_seed: int | None = None
    outlier_spec: OutlierSpec | None = None
    prng: str = PRNG_ID

    def all_cells(self) -> list[SynthCell]:
        return [c for lac in self.lacs for c in lac.cells]

    def truth(self) -> dict[tuple, str]:
        return {_key(c.cell): c.label for c in self.all_cells()}


def _key(cell: CellIdentity) -> tuple:
    return (cell.mcc, cell.mnc, cell.lac, cell.cell_id)


def _offset_point(origin: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Displace by local east/north meters (small-offset approximation)."""
    lat = origin.lat + north_m / _M_PER_DEG
    lon = origin.lon + east_m / (_M_PER_DEG * math.cos(math.radians(origin.lat)))
    if not (-90.0 <= lat <= 90.0):
        raise ValueError(f"offset pushed latitude out of range: {lat}")
    return GeoPoint(lat, normalize_lon(lon))


def hex_spiral_offsets(count: int, cell_radius_m: float) -> list[tuple[float, float]]:
    """(east, north) meter offsets of a hexagonal lattice spiral.

    Cell 0 sits at the center; ring k holds 6k cells starting due north
    and proceeding clockwise, with neighbor spacing sqrt(3) * cell radius.
    """
    spacing = math.sqrt(3.0) * cell_radius_m
    offsets = [(0.0, 0.0)]
    ring = 1
    while len(offsets) < count:
        # walk the ring: start at k steps north, then 6 sides of k steps
        east = 0.0
        north = ring * spacing
        emitted = 0
        side_bearings = [120.0 + 60.0 * j for j in range(6)]
        offsets.append((east, north))
        emitted += 1
        for bearing in side_bearings:
            step_e = spacing * math.sin(math.radians(bearing))
            step_n = spacing * math.cos(math.radians(bearing))
            for _ in range(ring):
                if emitted == 6 * ring:
                    break
                east += step_e
                north += step_n
                offsets.append((east, north))
                emitted += 1
        ring += 1
    return offsets[:count]


def generate_topology(
    lac_count: int,
    cells_per_lac: int,
    cell_radius_m: float,
    region: BoundingBox = DEFAULT_REGION,
    seed: int = 0,
    *,
    mcc: int | None = 310,
    mnc: int | None = 26,
    first_lac: int = 1000,
) -> SyntheticWorld:
    """Hexagonal cell layouts around well-separated LAC centers.

    Centers are sampled uniformly in the region with at least 80 km
    pairwise separation (rejection sampling; RegionTooSmall after 10,000
    draws). Deterministic for a fixed seed.
    """
    if lac_count < 1 or cells_per_lac < 1:
        raise ValueError("lac_count and cells_per_lac must be >= 1")
    if cell_radius_m <= 0:
        raise ValueError("cell_radius_m must be > 0")
    offsets = hex_spiral_offsets(cells_per_lac, cell_radius_m)
    max_extent = max(math.sqrt(e * e + n * n) for e, n in offsets)
    if max_extent > MAX_LAC_EXTENT_M:
        raise ValueError(
            f"{cells_per_lac} cells at radius {cell_radius_m} m span "
            f"{max_extent:.0f} m, beyond the {MAX_LAC_EXTENT_M:.0f} m LAC extent"
        )

    rng = Random(seed)
    centers: list[GeoPoint] = []
    attempts = 0
    while len(centers) < lac_count:
        if attempts >= _PLACEMENT_ATTEMPTS:
            raise RegionTooSmall(
                f"placed {len(centers)}/{lac_count} LAC centers in "
                f"{_PLACEMENT_ATTEMPTS} attempts"
            )
        attempts += 1
        cand = GeoPoint(
            rng.uniform(region.lat_min, region.lat_max),
            normalize_lon(rng.uniform(region.lon_min, region.lon_max)),
        )
        if all(distance(cand, c, Metric.EQUIRECT_M) >= MIN_LAC_SEPARATION_M for c in centers):
            centers.append(cand)

    lacs = []
    for i, center in enumerate(centers):
        lac_code = first_lac + i
        cells = []
        for j, (east, north) in enumerate(offsets):
            p = _offset_point(center, east, north)
            cells.append(
                SynthCell(CellIdentity(mcc, mnc, lac_code, j + 1), p, p, "clean")
            )
        lacs.append(SyntheticLac(lac_code, center, cell_radius_m, tuple(cells)))
    return SyntheticWorld(tuple(lacs), seed=seed)


def inject_outliers(world: SyntheticWorld, spec: OutlierSpec, seed: int) -> SyntheticWorld:
    """Displace floor(rate * size) randomly chosen cells per LAC.

    Each chosen cell's stored coordinate moves a uniform-random distance in
    [displacement_min, displacement_max] at a uniform-random bearing; its
    true position stays in the truth record for scoring.
    """
    rng = Random(seed)
    new_lacs = []
    for lac in world.lacs:
        # epsilon keeps fp noise (0.1 * 20 -> 2.0000...04) from moving the floor
        k = math.floor(spec.rate * len(lac.cells) + 1e-9)
        chosen = set(rng.sample(range(len(lac.cells)), k))
        cells = []
        for idx, sc in enumerate(lac.cells):
            if idx in chosen:
                dist = rng.uniform(spec.displacement_min_m, spec.displacement_max_m)
                bearing = math.radians(rng.uniform(0.0, 360.0))
                moved = _offset_point(
                    sc.true_point, dist * math.sin(bearing), dist * math.cos(bearing)
                )
                cells.append(replace(sc, stored_point=moved, label="outlier"))
            else:
                cells.append(sc)
        new_lacs.append(replace(lac, cells=tuple(cells)))
    return replace(
        world, lacs=tuple(new_lacs), outlier_seed=seed, outlier_spec=spec
    )


def generate_trace(world: SyntheticWorld, event_count: int, seed: int) -> list[TraceEvent]:
    """Visit events over the world's cells with heavy-tailed frequencies.

    The first min(event_count, cell count) events enumerate every cell once
    in a seed-shuffled order, so full coverage is guaranteed whenever
    event_count >= total cells. The remainder samples cells with weight
    1/rank, ranked per LAC by lattice position. Timestamps start at a fixed
    epoch and advance 60 s per event.
    """
    if event_count < 0:
        raise ValueError("event_count must be >= 0")
    rng = Random(seed)
    cells = [sc.cell for lac in world.lacs for sc in lac.cells]
    weights = [
        1.0 / (idx + 1) for lac in world.lacs for idx in range(len(lac.cells))
    ]
    first = cells[:]
    rng.shuffle(first)
    sequence = first[: min(event_count, len(first))]
    if event_count > len(cells):
        sequence += rng.choices(cells, weights=weights, k=event_count - len(cells))
    return [
        TraceEvent(TRACE_EPOCH + i * TRACE_SPACING, cell)
        for i, cell in enumerate(sequence)
    ]


def _fmt_code(value: int | None) -> str:
    return "" if value is None else str(value)


def export_world_db(world: SyntheticWorld) -> bytes:
    """The world's cell database (stored coordinates, outliers included)."""
    lines = [CELL_DB_HEADER]
    for lac in world.lacs:
        for sc in lac.cells:
            lines.append(
                f"{_fmt_code(sc.cell.mcc)},{_fmt_code(sc.cell.mnc)},"
                f"{sc.cell.lac},{sc.cell.cell_id},"
                f"{sc.stored_point.lat!r},{sc.stored_point.lon!r},0"
            )
    return ("\n".join(lines) + "\n").encode("utf-8")


def export_trace_csv(events: list[TraceEvent]) -> bytes:
    lines = ["timestamp,mcc,mnc,lac,cell_id"]
    for ev in events:
        ts = ev.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")
        c = ev.cell
        lines.append(f"{ts},{_fmt_code(c.mcc)},{_fmt_code(c.mnc)},{c.lac},{c.cell_id}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def world_to_dict(world: SyntheticWorld) -> dict:
    return {
        "prng": world.prng,
        "seed": world.seed,
        "outlier_seed": world.outlier_seed,
        "outlier_spec": None
        if world.outlier_spec is None
        else {
            "rate": world.outlier_spec.rate,
            "displacement_min_m": world.outlier_spec.displacement_min_m,
            "displacement_max_m": world.outlier_spec.displacement_max_m,
        },
        "lacs": [
            {
                "lac": lac.lac,
                "center": [lac.center.lat, lac.center.lon],
                "cell_radius_m": lac.cell_radius_m,
                "cells": [
                    {
                        "mcc": sc.cell.mcc,
                        "mnc": sc.cell.mnc,
                        "lac": sc.cell.lac,
                        "cell_id": sc.cell.cell_id,
                        "true": [sc.true_point.lat, sc.true_point.lon],
                        "stored": [sc.stored_point.lat, sc.stored_point.lon],
                        "label": sc.label,
                    }
                    for sc in lac.cells
                ],
            }
            for lac in world.lacs
        ],
    }


def world_from_dict(data: dict) -> SyntheticWorld:
    spec = None
    if data.get("outlier_spec"):
        s = data["outlier_spec"]
        spec = OutlierSpec(s["rate"], s["displacement_min_m"], s["displacement_max_m"])
    lacs = tuple(
        SyntheticLac(
            lac=entry["lac"],
            center=GeoPoint(*entry["center"]),
            cell_radius_m=entry["cell_radius_m"],
            cells=tuple(
                SynthCell(
                    cell=CellIdentity(c["mcc"], c["mnc"], c["lac"], c["cell_id"]),
                    true_point=GeoPoint(*c["true"]),
                    stored_point=GeoPoint(*c["stored"]),
                    label=c["label"],
                )
                for c in entry["cells"]
            ),
        )
        for entry in data["lacs"]
    )
    return SyntheticWorld(
        lacs,
        seed=data["seed"],
        outlier_seed=data.get("outlier_seed"),
        outlier_spec=spec,
        prng=data.get("prng", PRNG_ID),
    )


def load_world(stream: IO | bytes | str) -> SyntheticWorld:
    if isinstance(stream, (bytes, str)):
        data = json.loads(stream)
    else:
        data = json.load(stream)
    return world_from_dict(data)


def score_detection(result: CleanResult, world: SyntheticWorld) -> tuple[float, float]:
    """Precision and recall of outlier flagging against the world's truth.

    flagged = the outlier buckets of the clean result. An empty flagged set
    has no false positives, so precision is vacuously 1.0; a world with no
    injected outliers makes recall vacuously 1.0.
    """
    truth = world.truth()
    flagged: set[tuple] = set()
    seen: set[tuple] = set()
    for lr in result.per_lac:
        for rc in lr.representative + lr.outliers + lr.insufficient:
            seen.add(_key(rc.cell))
        for rc in lr.outliers:
            flagged.add(_key(rc.cell))
    unknown = seen - set(truth)
    if unknown:
        raise WorldMismatch(f"{len(unknown)} result cells absent from world")
    true_outliers = {k for k, label in truth.items() if label == "outlier"}
    tp = len(flagged & true_outliers)
    precision = tp / len(flagged) if flagged else 1.0
    recall = tp / len(true_outliers) if true_outliers else 1.0
    return precision, recall
