import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lacclean.cluster import ClusterParams, clean_dataset
from lacclean.geo import EARTH_RADIUS_M
from lacclean.models import CellIdentity, GeoPoint, ResolvedCell
from lacclean.resolver import load_cell_db, resolve_all
from lacclean.synth import (
    DEFAULT_REGION,
    OutlierSpec,
    export_world_db,
    generate_topology,
    inject_outliers,
)

M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


def meridian_point(offset_m: float, lon: float = -71.0, base_lat: float = 42.0) -> GeoPoint:
    """A point offset_m meters north of base_lat along one meridian."""
    return GeoPoint(base_lat + offset_m / M_PER_DEG, lon)


def resolved(lac: int, cell_id: int, point: GeoPoint, mcc=310, mnc=26) -> ResolvedCell:
    return ResolvedCell(CellIdentity(mcc, mnc, lac, cell_id), point, "exact")


@pytest.fixture(scope="session")
def separation_world():
    """14 LACs x 22 cells; 2 cells per LAC displaced 50-60 km.

    Clean cells stay within ~1.6 km of their LAC center, so with the
    default 35 km cutoff every displaced cell is separated from every
    clean one.
    """
    world = generate_topology(14, 22, 150.0, DEFAULT_REGION, seed=42)
    return inject_outliers(world, OutlierSpec(0.1, 50_000.0, 60_000.0), seed=43)


@pytest.fixture(scope="session")
def separation_clean(separation_world):
    """The separation world resolved and cleaned with default parameters."""
    db = load_cell_db(export_world_db(separation_world))
    cells = sorted(
        (c.cell for c in separation_world.all_cells()), key=lambda c: c.sort_key
    )
    resolved_cells, unresolved, stats = resolve_all(db, cells)
    assert not unresolved
    return clean_dataset(resolved_cells, ClusterParams()), resolved_cells
