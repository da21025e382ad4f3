"""Per-LAC agglomerative clustering and spatial-outlier selection.

Cells served by one location area are physically close (tens of km at
most), so within a LAC the cells whose stored coordinates sit far from the
dense mass are bogus: stale database rows, relabeled or reused cell ids.
The cleaning rule, per LAC:

1. build the pairwise proximity matrix over the LAC's resolved cells;
2. repeatedly merge the globally closest pair of clusters whose linkage
   distance is within the cutoff;
3. take the resulting flat clusters; the largest one (meeting a minimum
   size) becomes the LAC's representative set, everything else is flagged
   as spatial outliers.

Centroid linkage is the default: the merge loop re-derives inter-cluster
distance from the merged entity after every step. Single, complete and
average linkage are provided for comparison. The cutoff defaults to
35 km, the upper bound on a (rural) location area's extent; the minimum
representative size defaults to 10 cells.

Discarding every non-representative cluster is deliberately blunt: a
second dense cluster in the same LAC is still discarded. Such clusters
are listed in the result (``discarded_dense``) so the effect is visible
instead of silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import EmptyGroup, MismatchedInput
from .geo import METRIC_CODES, Metric, centroid, distance
from .models import ResolvedCell

DEFAULT_CUTOFF_M = 35_000.0  # maximum LAC extent
DEFAULT_MIN_SIZE = 10


class Linkage(str, Enum):
    CENTROID = "centroid"
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


LINKAGE_CODES = {
    Linkage.SINGLE: kernels.LINKAGE_SINGLE,
    Linkage.COMPLETE: kernels.LINKAGE_COMPLETE,
    Linkage.AVERAGE: kernels.LINKAGE_AVERAGE,
    Linkage.CENTROID: kernels.LINKAGE_CENTROID,
}


@dataclass(frozen=True)
class ClusterParams:
    linkage: Linkage = Linkage.CENTROID
    cutoff: float = DEFAULT_CUTOFF_M  # in the active metric's units
    min_size: int = DEFAULT_MIN_SIZE
    metric: Metric = Metric.EQUIRECT_M

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.min_size < 1:
            raise ValueError(f"min_size must be >= 1, got {self.min_size}")


@dataclass(frozen=True)
class LacGroup:
    """One LAC's resolved cells, in canonical order."""

    lac: int
    members: tuple[ResolvedCell, ...]


@dataclass(frozen=True)
class ProximityMatrix:
    """Symmetric pairwise distances with zero diagonal, canonical order."""

    n: int
    d: np.ndarray


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    new_id: int


@dataclass(frozen=True)
class Dendrogram:
    """Accepted merges in order. Leaves are 0..leaf_count-1 in canonical
    member order; merged clusters get ids leaf_count, leaf_count+1, ..."""

    leaf_count: int
    merges: tuple[Merge, ...]


@dataclass(frozen=True)
class LacCleanResult:
    lac: int
    representative: tuple[ResolvedCell, ...]
    outliers: tuple[ResolvedCell, ...]
    status: str  # "ok" | "insufficient_density"
    # members of a LAC whose largest cluster missed min_size; reported in
    # their own bucket, never silently dropped
    insufficient: tuple[ResolvedCell, ...] = ()
    # non-representative clusters that nevertheless met min_size
    discarded_dense: tuple[tuple[ResolvedCell, ...], ...] = ()


@dataclass(frozen=True)
class CleanStats:
    total: int
    retained: int
    outliers: int
    insufficient: int
    lacs: int
    lacs_ok: int
    lacs_insufficient: int
    discarded_dense_clusters: int


@dataclass(frozen=True)
class CleanResult:
    per_lac: tuple[LacCleanResult, ...]
    stats: CleanStats


def group_by_lac(cells: Iterable[ResolvedCell]) -> list[LacGroup]:
    """One group per distinct LAC, ordered by lac; members canonical."""
    by_lac: dict[int, list[ResolvedCell]] = {}
    for rc in cells:
        by_lac.setdefault(rc.cell.lac, []).append(rc)
    groups = []
    for lac in sorted(by_lac):
        members = tuple(sorted(by_lac[lac], key=lambda rc: rc.cell.sort_key))
        groups.append(LacGroup(lac, members))
    return groups


def _coords(group: LacGroup) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lats = np.array([m.point.lat for m in group.members], dtype=np.float64)
    lons = np.array([m.point.lon for m in group.members], dtype=np.float64)
    cids = np.array([m.cell.cell_id for m in group.members], dtype=np.int64)
    return lats, lons, cids


def proximity_matrix(group: LacGroup, metric: Metric = Metric.EQUIRECT_M) -> ProximityMatrix:
    if not group.members:
        raise EmptyGroup(f"lac {group.lac} has no members")
    lats, lons, _ = _coords(group)
    d = kernels.pairwise_distances(lats, lons, METRIC_CODES[metric])
    return ProximityMatrix(len(group.members), d)


def agglomerate(group: LacGroup, params: ClusterParams) -> Dendrogram:
    """Merge the closest pair until the cutoff stops it or one cluster is left.

    Ties in closest-pair selection break on (min member cell_id, min member
    canonical index) of the left then right cluster, with the pair oriented
    so the smaller key is left. Keying on cell ids keeps results invariant
    to input order.
    """
    if not group.members:
        raise EmptyGroup(f"lac {group.lac} has no members")
    lats, lons, cids = _coords(group)
    linkage_code = LINKAGE_CODES[params.linkage]
    metric_code = METRIC_CODES[params.metric]
    if params.linkage is Linkage.CENTROID:
        dist = None
    else:
        dist = kernels.pairwise_distances(lats, lons, metric_code)
    left, right, dists, new_ids = kernels.agglomerate_merges(
        dist, lats, lons, cids, linkage_code, metric_code, float(params.cutoff)
    )
    merges = tuple(
        Merge(int(l), int(r), float(d), int(n))
        for l, r, d, n in zip(left, right, dists, new_ids)
    )
    return Dendrogram(len(group.members), merges)


def flat_clusters(dend: Dendrogram, group: LacGroup) -> list[tuple[ResolvedCell, ...]]:
    """Connected components induced by the accepted merges.

    Components are ordered by their smallest canonical member index and
    partition the group's members exactly.
    """
    n = len(group.members)
    if dend.leaf_count != n:
        raise MismatchedInput(
            f"dendrogram has {dend.leaf_count} leaves, group has {n} members"
        )
    components: dict[int, list[int]] = {i: [i] for i in range(n)}
    for m in dend.merges:
        merged = components.pop(m.left) + components.pop(m.right)
        components[m.new_id] = merged
    ordered = sorted(components.values(), key=min)
    return [tuple(group.members[i] for i in sorted(leaves)) for leaves in ordered]


def _mean_centroid_distance(cluster: Sequence[ResolvedCell], metric: Metric) -> float:
    c = centroid([m.point for m in cluster])
    return sum(distance(m.point, c, metric) for m in cluster) / len(cluster)


def select_representative(
    clusters: Sequence[Sequence[ResolvedCell]],
    min_size: int = DEFAULT_MIN_SIZE,
    metric: Metric = Metric.EQUIRECT_M,
) -> LacCleanResult:
    """Pick the densest-population cluster as the LAC's representative.

    The largest cluster with size >= min_size wins; size ties go to the
    cluster with the smaller mean member-to-centroid distance, then to the
    one containing the smallest cell_id. All members outside the winner are
    outliers. If no cluster reaches min_size, the LAC is reported as
    insufficient_density and its members land in a separate bucket.
    """
    members = sorted(
        (rc for cl in clusters for rc in cl), key=lambda rc: rc.cell.sort_key
    )
    if not members:
        raise EmptyGroup("no clusters given")
    lac = members[0].cell.lac
    eligible = [cl for cl in clusters if len(cl) >= min_size]
    if not eligible:
        return LacCleanResult(
            lac, (), (), "insufficient_density", insufficient=tuple(members)
        )

    def rank(cl: Sequence[ResolvedCell]):
        return (
            -len(cl),
            _mean_centroid_distance(cl, metric),
            min(rc.cell.cell_id for rc in cl),
            min(rc.cell.sort_key for rc in cl),
        )

    winner = min(eligible, key=rank)
    winner_cells = {rc.cell for rc in winner}
    representative = tuple(rc for rc in members if rc.cell in winner_cells)
    outliers = tuple(rc for rc in members if rc.cell not in winner_cells)
    discarded = tuple(
        tuple(sorted(cl, key=lambda rc: rc.cell.sort_key))
        for cl in clusters
        if len(cl) >= min_size and cl is not winner
    )
    return LacCleanResult(lac, representative, outliers, "ok", discarded_dense=discarded)


def clean_lac(group: LacGroup, params: ClusterParams) -> LacCleanResult:
    dend = agglomerate(group, params)
    clusters = flat_clusters(dend, group)
    return select_representative(clusters, params.min_size, params.metric)


def clean_dataset(cells: Iterable[ResolvedCell], params: ClusterParams | None = None) -> CleanResult:
    """Run the whole per-LAC pipeline and aggregate retention statistics.

    Per-LAC results are independent (safe to parallelize) and are always
    reported in ascending lac order, so the output is identical however the
    work is scheduled.
    """
    if params is None:
        params = ClusterParams()
    per_lac = tuple(clean_lac(group, params) for group in group_by_lac(cells))
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
        discarded_dense_clusters=sum(len(r.discarded_dense) for r in per_lac),
    )
    return CleanResult(per_lac, stats)
