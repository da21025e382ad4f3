"""lacclean: spatial-outlier cleaning for GSM cell-location data.

Pipeline: parse mobility traces, resolve cell identities to coordinates
through a local cell database, cluster each location area's cells, keep
the dense representative cluster and flag the rest as spatial outliers.
A synthetic topology generator provides ground truth for scoring.
"""

__version__ = "0.1.0"

from .cluster import (
    ClusterParams,
    CleanResult,
    Dendrogram,
    LacCleanResult,
    LacGroup,
    Linkage,
    ProximityMatrix,
    agglomerate,
    clean_dataset,
    flat_clusters,
    group_by_lac,
    proximity_matrix,
    select_representative,
)
from .geo import EARTH_RADIUS_M, Metric, centroid, distance
from .ingest import extract_unique_cells, parse_trace
from .models import CellIdentity, CellSet, GeoPoint, ResolvedCell, TraceEvent
from .resolver import (
    CellDatabase,
    MatchPolicy,
    ResolutionStats,
    load_cell_db,
    resolve_all,
    resolve_cell,
)

__all__ = [
    "__version__",
    "CellIdentity", "CellSet", "GeoPoint", "ResolvedCell", "TraceEvent",
    "Metric", "EARTH_RADIUS_M", "distance", "centroid",
    "parse_trace", "extract_unique_cells",
    "CellDatabase", "MatchPolicy", "ResolutionStats",
    "load_cell_db", "resolve_cell", "resolve_all",
    "Linkage", "ClusterParams", "LacGroup", "ProximityMatrix", "Dendrogram",
    "LacCleanResult", "CleanResult",
    "group_by_lac", "proximity_matrix", "agglomerate", "flat_clusters",
    "select_representative", "clean_dataset",
]
