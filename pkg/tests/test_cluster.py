import math
import random

import numpy as np
import pytest

from _reference import haversine_oracle, naive_agglomerate, naive_flat_clusters
from conftest import meridian_point, resolved
from lacclean.cluster import (
    ClusterParams,
    Linkage,
    agglomerate,
    clean_dataset,
    flat_clusters,
    group_by_lac,
    proximity_matrix,
    select_representative,
)
from lacclean.errors import EmptyGroup, MismatchedInput
from lacclean.geo import Metric, normalize_lon
from lacclean.models import CellIdentity, GeoPoint, ResolvedCell
from lacclean.resolver import load_cell_db, resolve_all
from lacclean.synth import DEFAULT_REGION, export_world_db, generate_topology

ALL_LINKAGES = list(Linkage)


def make_group(points, lac=100, cell_ids=None):
    cell_ids = cell_ids or list(range(1, len(points) + 1))
    cells = [resolved(lac, cid, p) for cid, p in zip(cell_ids, points)]
    (group,) = group_by_lac(cells)
    return group


def random_group(rng, n, lac=100, spread=0.5):
    lat0 = rng.uniform(-55.0, 55.0)
    lon0 = rng.uniform(-170.0, 170.0)
    points = [
        GeoPoint(lat0 + rng.uniform(-spread, spread), lon0 + rng.uniform(-spread, spread))
        for _ in range(n)
    ]
    ids = rng.sample(range(1, 10 * n), n)
    return make_group(points, lac=lac, cell_ids=ids)


# ---------------------------------------------------------------- group_by_lac

def test_group_by_lac_empty():
    assert group_by_lac([]) == []


def test_group_by_lac_partition():
    p = GeoPoint(1.0, 1.0)
    cells = [resolved(5, 1, p), resolved(9, 2, p), resolved(5, 3, p)]
    groups = group_by_lac(cells)
    assert [g.lac for g in groups] == [5, 9]
    assert [len(g.members) for g in groups] == [2, 1]


def test_group_by_lac_synth_world_sizes_sum():
    # 14 LACs x 50 cells, database covering only 680 of the 700
    world = generate_topology(14, 50, 200.0, DEFAULT_REGION, seed=8)
    db_text = export_world_db(world).decode()
    lines = db_text.splitlines()
    db = load_cell_db("\n".join(lines[:681]) + "\n")
    cells = sorted((c.cell for c in world.all_cells()), key=lambda c: c.sort_key)
    resolved_cells, _, stats = resolve_all(db, cells)
    assert stats.resolved == 680
    groups = group_by_lac(resolved_cells)
    assert len(groups) == 14
    assert sum(len(g.members) for g in groups) == 680


# ------------------------------------------------------------ proximity_matrix

def test_proximity_identical_points():
    p = GeoPoint(42.0, -71.0)
    m = proximity_matrix(make_group([p, p]))
    assert m.n == 2
    assert np.array_equal(m.d, np.zeros((2, 2)))


def test_proximity_collinear_meridian_points():
    pts = [meridian_point(0.0), meridian_point(1000.0), meridian_point(3000.0)]
    m = proximity_matrix(make_group(pts), Metric.EQUIRECT_M)
    assert m.d[0, 1] == pytest.approx(1000.0, abs=1.0)
    assert m.d[0, 2] == pytest.approx(3000.0, abs=1.0)
    assert m.d[1, 2] == pytest.approx(2000.0, abs=1.0)
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i != j:
                assert m.d[i, j] == pytest.approx(haversine_oracle(p, q), rel=1e-6)


def test_proximity_symmetric():
    rng = random.Random(3)
    group = random_group(rng, 9)
    m = proximity_matrix(group)
    assert np.array_equal(m.d, m.d.T)
    assert np.all(np.diag(m.d) == 0.0)


def test_proximity_empty_group_raises():
    from lacclean.cluster import LacGroup

    with pytest.raises(EmptyGroup):
        proximity_matrix(LacGroup(1, ()))


# ----------------------------------------------------------------- agglomerate

def test_agglomerate_single_member_no_merges():
    group = make_group([GeoPoint(42.0, -71.0)])
    dend = agglomerate(group, ClusterParams())
    assert dend.merges == ()
    assert dend.leaf_count == 1


def test_agglomerate_cutoff_halts_merging():
    # 0, 1 km, 10 km along a meridian; cutoff 5 km, centroid linkage
    pts = [meridian_point(0.0), meridian_point(1000.0), meridian_point(10_000.0)]
    group = make_group(pts)
    params = ClusterParams(linkage=Linkage.CENTROID, cutoff=5000.0)
    dend = agglomerate(group, params)
    assert len(dend.merges) == 1
    assert dend.merges[0].left == 0 and dend.merges[0].right == 1
    assert dend.merges[0].distance == pytest.approx(1000.0, abs=1.0)
    clusters = flat_clusters(dend, group)
    assert sorted(len(c) for c in clusters) == [1, 2]
    # merged pair's centroid sits ~9.5 km from the third point
    from lacclean.geo import centroid, distance

    c = centroid([pts[0], pts[1]])
    assert distance(c, pts[2]) == pytest.approx(9500.0, abs=5.0)


@pytest.mark.parametrize("linkage", ALL_LINKAGES)
def test_agglomerate_matches_naive_reference(linkage):
    rng = random.Random(101)
    for _ in range(25):
        n = rng.randint(2, 12)
        group = random_group(rng, n)
        params = ClusterParams(linkage=linkage, cutoff=math.inf)
        dend = agglomerate(group, params)
        expected = naive_agglomerate(
            [m.point for m in group.members],
            [m.cell.cell_id for m in group.members],
            linkage.value,
            Metric.EQUIRECT_M,
        )
        assert len(dend.merges) == len(expected) == n - 1
        for got, (left, right, d, new_id) in zip(dend.merges, expected):
            assert (got.left, got.right, got.new_id) == (left, right, new_id)
            assert got.distance == pytest.approx(d, rel=1e-9)


@pytest.mark.parametrize("linkage", ALL_LINKAGES)
def test_agglomerate_matches_naive_reference_with_cutoff(linkage):
    rng = random.Random(103)
    for _ in range(15):
        n = rng.randint(2, 12)
        group = random_group(rng, n, spread=0.2)
        cutoff = rng.uniform(2000.0, 30_000.0)
        dend = agglomerate(group, ClusterParams(linkage=linkage, cutoff=cutoff))
        expected = naive_agglomerate(
            [m.point for m in group.members],
            [m.cell.cell_id for m in group.members],
            linkage.value,
            Metric.EQUIRECT_M,
            cutoff=cutoff,
        )
        assert [(m.left, m.right) for m in dend.merges] == [e[:2] for e in expected]


def test_single_linkage_merge_distances_non_decreasing():
    rng = random.Random(107)
    for _ in range(20):
        group = random_group(rng, rng.randint(2, 30))
        dend = agglomerate(group, ClusterParams(linkage=Linkage.SINGLE, cutoff=math.inf))
        ds = [m.distance for m in dend.merges]
        assert ds == sorted(ds)


def test_cutoff_monotonicity_single_linkage():
    rng = random.Random(109)
    for _ in range(20):
        group = random_group(rng, rng.randint(2, 20))
        counts = []
        for cutoff in (1000.0, 5000.0, 20_000.0, 60_000.0):
            dend = agglomerate(group, ClusterParams(linkage=Linkage.SINGLE, cutoff=cutoff))
            counts.append(len(flat_clusters(dend, group)))
        assert counts == sorted(counts, reverse=True)


def test_input_order_invariance():
    rng = random.Random(113)
    base_cells = []
    for lac in (100, 101):
        group = random_group(rng, 15, lac=lac)
        base_cells.extend(group.members)
    expected = clean_dataset(base_cells, ClusterParams())
    for _ in range(5):
        shuffled = base_cells[:]
        rng.shuffle(shuffled)
        got = clean_dataset(shuffled, ClusterParams())
        assert got == expected


def test_longitude_translation_invariance_of_membership():
    rng = random.Random(127)
    group = random_group(rng, 20, spread=0.3)
    params = ClusterParams(cutoff=20_000.0)

    def membership(cells):
        result = clean_dataset(cells, params)
        (lr,) = result.per_lac
        return (
            {rc.cell for rc in lr.representative},
            {rc.cell for rc in lr.outliers},
        )

    base = membership(group.members)
    for metric in (Metric.EQUIRECT_M, Metric.HAVERSINE_M):
        shifted = [
            ResolvedCell(
                rc.cell,
                GeoPoint(rc.point.lat, normalize_lon(rc.point.lon + 7.3)),
                rc.match_kind,
            )
            for rc in group.members
        ]
        assert membership(shifted) == base


def test_agglomerate_empty_group_raises():
    from lacclean.cluster import LacGroup

    with pytest.raises(EmptyGroup):
        agglomerate(LacGroup(1, ()), ClusterParams())


# --------------------------------------------------------------- flat_clusters

def test_flat_clusters_no_merges():
    pts = [meridian_point(d) for d in (0.0, 100_000.0, 200_000.0)]
    group = make_group(pts)
    dend = agglomerate(group, ClusterParams(cutoff=1000.0))
    clusters = flat_clusters(dend, group)
    assert [len(c) for c in clusters] == [1, 1, 1]


def test_flat_clusters_complete_merge():
    rng = random.Random(131)
    group = random_group(rng, 8, spread=0.01)
    dend = agglomerate(group, ClusterParams(cutoff=math.inf))
    clusters = flat_clusters(dend, group)
    assert len(clusters) == 1
    assert set(clusters[0]) == set(group.members)


def test_flat_clusters_matches_naive_components():
    rng = random.Random(137)
    for _ in range(10):
        n = rng.randint(2, 12)
        group = random_group(rng, n, spread=0.2)
        cutoff = rng.uniform(3000.0, 40_000.0)
        dend = agglomerate(group, ClusterParams(linkage=Linkage.AVERAGE, cutoff=cutoff))
        got = flat_clusters(dend, group)
        merges = [(m.left, m.right, m.distance, m.new_id) for m in dend.merges]
        expected = naive_flat_clusters(n, merges)
        got_indices = sorted(
            sorted(group.members.index(rc) for rc in cl) for cl in got
        )
        assert got_indices == sorted(expected)


def test_flat_clusters_mismatched_input():
    group_a = make_group([meridian_point(0.0), meridian_point(500.0)])
    group_b = make_group([meridian_point(0.0)])
    dend = agglomerate(group_a, ClusterParams())
    with pytest.raises(MismatchedInput):
        flat_clusters(dend, group_b)


# -------------------------------------------------------- select_representative

def ring_cluster(lac, first_cell_id, center, radius_m, count):
    """Cells evenly spread on a circle: mean centroid distance ~= radius."""
    cells = []
    for k in range(count):
        ang = 2 * math.pi * k / count
        east, north = radius_m * math.sin(ang), radius_m * math.cos(ang)
        point = GeoPoint(
            center.lat + north / 111_195.0,
            center.lon + east / (111_195.0 * math.cos(math.radians(center.lat))),
        )
        cells.append(resolved(lac, first_cell_id + k, point))
    return cells


def test_select_representative_basic():
    big = ring_cluster(7, 1, GeoPoint(40.0, -70.0), 300.0, 12)
    small = ring_cluster(7, 100, GeoPoint(40.5, -70.5), 300.0, 3)
    result = select_representative([big, small], min_size=10)
    assert result.status == "ok"
    assert len(result.representative) == 12
    assert len(result.outliers) == 3
    assert set(result.representative) | set(result.outliers) == set(big) | set(small)


def test_select_representative_insufficient_density():
    a = ring_cluster(7, 1, GeoPoint(40.0, -70.0), 300.0, 4)
    b = ring_cluster(7, 100, GeoPoint(40.5, -70.5), 300.0, 3)
    result = select_representative([a, b], min_size=10)
    assert result.status == "insufficient_density"
    assert result.representative == () and result.outliers == ()
    assert set(result.insufficient) == set(a) | set(b)


def test_select_representative_size_tie_breaks_by_compactness():
    tight = ring_cluster(7, 100, GeoPoint(40.0, -70.0), 200.0, 10)
    loose = ring_cluster(7, 1, GeoPoint(40.5, -70.5), 900.0, 10)
    result = select_representative([loose, tight], min_size=10)
    assert result.status == "ok"
    assert set(result.representative) == set(tight)


def test_select_representative_reports_discarded_dense_clusters():
    big = ring_cluster(7, 1, GeoPoint(40.0, -70.0), 300.0, 12)
    also_dense = ring_cluster(7, 100, GeoPoint(40.5, -70.5), 300.0, 11)
    tiny = ring_cluster(7, 200, GeoPoint(41.0, -70.9), 300.0, 2)
    result = select_representative([big, also_dense, tiny], min_size=10)
    assert len(result.representative) == 12
    assert len(result.outliers) == 13
    assert len(result.discarded_dense) == 1
    assert len(result.discarded_dense[0]) == 11


# --------------------------------------------------------------- clean_dataset

def test_clean_dataset_empty():
    result = clean_dataset([], ClusterParams())
    assert result.per_lac == ()
    assert result.stats.total == 0
    assert result.stats.retained == 0


def test_clean_dataset_separation_fixture(separation_clean, separation_world):
    result, _ = separation_clean
    truth = separation_world.truth()
    assert result.stats.retained == 280
    assert result.stats.outliers == 28
    for lr in result.per_lac:
        assert lr.status == "ok"
        assert len(lr.representative) == 20
        assert len(lr.outliers) == 2
        for rc in lr.outliers:
            key = (rc.cell.mcc, rc.cell.mnc, rc.cell.lac, rc.cell.cell_id)
            assert truth[key] == "outlier"


def test_clean_dataset_fixpoint(separation_clean):
    result, _ = separation_clean
    retained = [rc for lr in result.per_lac for rc in lr.representative]
    again = clean_dataset(retained, ClusterParams())
    retained_again = [rc for lr in again.per_lac for rc in lr.representative]
    assert retained_again == retained
    assert again.stats.outliers == 0


def test_separation_guarantee_random_construction():
    rng = random.Random(139)
    for trial in range(10):
        lac = 300 + trial
        n_dense = rng.randint(10, 18)
        dense = ring_cluster(lac, 1, GeoPoint(40.0, -70.0), rng.uniform(100, 2000), n_dense)
        far = [
            resolved(lac, 500 + i, GeoPoint(40.0 + rng.uniform(0.5, 1.0) * rng.choice([-1, 1]),
                                            -70.0 + rng.uniform(0.5, 1.0) * rng.choice([-1, 1])))
            for i in range(rng.randint(1, 4))
        ]
        params = ClusterParams(linkage=Linkage.SINGLE, cutoff=20_000.0, min_size=10)
        result = clean_dataset(dense + far, params)
        (lr,) = result.per_lac
        assert set(lr.outliers) == set(far)
        assert set(lr.representative) == set(dense)


def test_parallel_lacs_equal_sequential(separation_clean):
    # per-LAC cleaning is pure; cleaning LACs separately must reproduce
    # the combined run exactly
    result, resolved_cells = separation_clean
    params = ClusterParams()
    for lr in result.per_lac:
        solo = clean_dataset(
            [rc for rc in resolved_cells if rc.cell.lac == lr.lac], params
        )
        assert solo.per_lac == (lr,)
