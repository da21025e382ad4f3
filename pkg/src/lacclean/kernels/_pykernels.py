"""Pure-Python clustering kernels.

Fallback used when the compiled extension is unavailable. Semantics are
the contract both backends satisfy:

* cluster ids: leaves 0..n-1 in canonical member order, merged clusters
  n, n+1, ... in merge order;
* tie key of a cluster: (min member cell_id, min member canonical index);
* a candidate pair is oriented so the smaller-keyed cluster is "left";
* each step merges the active pair minimizing
  (distance, left key, right key); merging stops when the minimum
  exceeds the cutoff or one cluster remains.

single/complete/average use exact Lance-Williams updates over a slot-reuse
distance matrix plus a lazy-deletion heap (O(n^2 log n)). centroid linkage
recomputes centroid distances from the leaves each step (O(n^3) worst
case), accumulating coordinates in leaf-index order so results match
geo.centroid applied to canonically sorted members.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from ..geo import Metric, distance_deg

LINKAGE_SINGLE = 0
LINKAGE_COMPLETE = 1
LINKAGE_AVERAGE = 2
LINKAGE_CENTROID = 3

_METRIC_BY_CODE = {0: Metric.EQUIRECT_M, 1: Metric.HAVERSINE_M, 2: Metric.DEGREES_EUCLID}


def pairwise_distances(lats, lons, metric_code: int):
    """Symmetric n x n distance matrix with zero diagonal."""
    metric = _METRIC_BY_CODE[metric_code]
    n = len(lats)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = distance_deg(lats[i], lons[i], lats[j], lons[j], metric)
            out[i, j] = d
            out[j, i] = d
    return out


def agglomerate_merges(dist, lats, lons, cell_ids, linkage_code: int,
                       metric_code: int, cutoff: float):
    """Run the merge loop; returns (left, right, distance, new_id) arrays."""
    n = len(cell_ids)
    if linkage_code == LINKAGE_CENTROID:
        merges = _centroid_loop(lats, lons, cell_ids, metric_code, cutoff)
    else:
        if dist is None:
            dist = pairwise_distances(lats, lons, metric_code)
        merges = _heap_loop(np.array(dist, dtype=np.float64, copy=True),
                            cell_ids, linkage_code, cutoff)
    left = np.array([m[0] for m in merges], dtype=np.int64)
    right = np.array([m[1] for m in merges], dtype=np.int64)
    dists = np.array([m[2] for m in merges], dtype=np.float64)
    new = np.arange(n, n + len(merges), dtype=np.int64)
    return left, right, dists, new


def _heap_loop(D, cell_ids, linkage_code, cutoff):
    n = len(cell_ids)
    total = 2 * n - 1 if n else 0
    key_cid = [0] * total
    key_idx = [0] * total
    size = [0] * total
    active = [False] * total
    slot_of = [0] * total          # cluster id -> row of D while active
    cluster_at = [-1] * n          # row of D -> cluster id, -1 when free
    for i in range(n):
        key_cid[i] = int(cell_ids[i])
        key_idx[i] = i
        size[i] = 1
        active[i] = True
        slot_of[i] = i
        cluster_at[i] = i

    heap = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = _orient(i, j, key_cid, key_idx)
            heap.append((D[i, j], key_cid[a], key_idx[a], key_cid[b], key_idx[b], a, b))
    heapq.heapify(heap)

    merges = []
    next_id = n
    remaining = n
    while remaining > 1 and heap:
        d, _, _, _, _, a, b = heapq.heappop(heap)
        if not (active[a] and active[b]):
            continue
        if d > cutoff:
            break
        c = next_id
        next_id += 1
        merges.append((a, b, d))
        active[a] = False
        active[b] = False
        active[c] = True
        key_cid[c] = min(key_cid[a], key_cid[b])
        key_idx[c] = min(key_idx[a], key_idx[b])
        size[c] = size[a] + size[b]
        sa, sb = slot_of[a], slot_of[b]
        slot_of[c] = sa
        cluster_at[sa] = c
        cluster_at[sb] = -1
        remaining -= 1
        na, nb = size[a], size[b]
        for sx in range(n):
            x = cluster_at[sx]
            if x < 0 or sx == sa:
                continue
            dax = D[sa, sx]
            dbx = D[sb, sx]
            if linkage_code == LINKAGE_SINGLE:
                dcx = dax if dax < dbx else dbx
            elif linkage_code == LINKAGE_COMPLETE:
                dcx = dax if dax > dbx else dbx
            else:
                dcx = (na * dax + nb * dbx) / (na + nb)
            D[sa, sx] = dcx
            D[sx, sa] = dcx
            p, q = _orient(c, x, key_cid, key_idx)
            heapq.heappush(
                heap, (dcx, key_cid[p], key_idx[p], key_cid[q], key_idx[q], p, q)
            )
    return merges


def _centroid_loop(lats, lons, cell_ids, metric_code, cutoff):
    metric = _METRIC_BY_CODE[metric_code]
    n = len(cell_ids)
    total = 2 * n - 1 if n else 0
    key_cid = [0] * total
    key_idx = [0] * total
    for i in range(n):
        key_cid[i] = int(cell_ids[i])
        key_idx[i] = i
    leaf_cluster = list(range(n))

    # Per-iteration accumulators, stamped instead of cleared.
    ref_lon = [0.0] * total
    lat_acc = [0.0] * total
    lon_acc = [0.0] * total
    count = [0] * total
    stamp = [-1] * total

    merges = []
    next_id = n
    remaining = n
    it = 0
    while remaining > 1:
        order = []  # active cluster ids in first-leaf order
        for i in range(n):
            c = leaf_cluster[i]
            if stamp[c] != it:
                stamp[c] = it
                ref_lon[c] = lons[i]
                lat_acc[c] = 0.0
                lon_acc[c] = 0.0
                count[c] = 0
                order.append(c)
            lat_acc[c] += lats[i]
            lon_acc[c] += ref_lon[c] + _wrap(lons[i] - ref_lon[c])
            count[c] += 1
        cen_lat = {}
        cen_lon = {}
        for c in order:
            k = count[c]
            cen_lat[c] = lat_acc[c] / k
            cen_lon[c] = _norm(lon_acc[c] / k)

        best = None
        for ii in range(len(order)):
            for jj in range(ii + 1, len(order)):
                a, b = _orient(order[ii], order[jj], key_cid, key_idx)
                d = distance_deg(cen_lat[a], cen_lon[a], cen_lat[b], cen_lon[b], metric)
                cand = (d, key_cid[a], key_idx[a], key_cid[b], key_idx[b], a, b)
                if best is None or cand < best:
                    best = cand
        if best is None or best[0] > cutoff:
            break
        d, _, _, _, _, a, b = best
        c = next_id
        next_id += 1
        merges.append((a, b, d))
        key_cid[c] = min(key_cid[a], key_cid[b])
        key_idx[c] = min(key_idx[a], key_idx[b])
        for i in range(n):
            if leaf_cluster[i] == a or leaf_cluster[i] == b:
                leaf_cluster[i] = c
        remaining -= 1
        it += 1
    return merges


def _wrap(delta):
    while delta >= 180.0:
        delta -= 360.0
    while delta < -180.0:
        delta += 360.0
    return delta


_norm = _wrap


def _orient(a, b, key_cid, key_idx):
    if (key_cid[a], key_idx[a]) <= (key_cid[b], key_idx[b]):
        return a, b
    return b, a
