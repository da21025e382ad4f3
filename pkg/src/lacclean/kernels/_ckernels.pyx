# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled clustering kernels.

Mirrors _pykernels operation-for-operation so both backends produce the
same merge sequences; see that module for the contract. Float expressions
match geo.py exactly (same libm calls, same order of operations).
"""

from libc.math cimport sin, cos, asin, sqrt, M_PI

import numpy as np

LINKAGE_SINGLE = 0
LINKAGE_COMPLETE = 1
LINKAGE_AVERAGE = 2
LINKAGE_CENTROID = 3

cdef int LINK_SINGLE = 0
cdef int LINK_COMPLETE = 1
cdef int LINK_CENTROID = 3

cdef double RADIUS = 6371008.8
cdef double DEG = M_PI / 180.0


cdef inline double _wrap(double delta) noexcept nogil:
    # +-360 corrections, not fmod: keeps _wrap(-d) == -_wrap(d) exactly,
    # matching geo.wrap_lon bit for bit.
    while delta >= 180.0:
        delta -= 360.0
    while delta < -180.0:
        delta += 360.0
    return delta


cdef inline double _dist(double lat1, double lon1, double lat2, double lon2,
                         int metric) noexcept nogil:
    cdef double dphi, dlam, x, a, s, phi1, phi2, sp, sl
    if metric == 0:  # equirectangular meters
        dphi = (lat2 - lat1) * DEG
        dlam = _wrap(lon2 - lon1) * DEG
        x = dlam * cos(((lat1 + lat2) / 2.0) * DEG)
        return RADIUS * sqrt(x * x + dphi * dphi)
    elif metric == 1:  # haversine meters
        phi1 = lat1 * DEG
        phi2 = lat2 * DEG
        dphi = (lat2 - lat1) * DEG
        dlam = (lon2 - lon1) * DEG
        sp = sin(dphi / 2.0)
        sl = sin(dlam / 2.0)
        a = sp * sp + cos(phi1) * cos(phi2) * sl * sl
        s = sqrt(a)
        if s > 1.0:
            s = 1.0
        return 2.0 * RADIUS * asin(s)
    else:  # raw degree-space Euclid
        dphi = lat2 - lat1
        dlam = _wrap(lon2 - lon1)
        return sqrt(dphi * dphi + dlam * dlam)


def pairwise_distances(lats_in, lons_in, int metric):
    """Symmetric n x n distance matrix with zero diagonal."""
    cdef double[::1] lats = np.ascontiguousarray(lats_in, dtype=np.float64)
    cdef double[::1] lons = np.ascontiguousarray(lons_in, dtype=np.float64)
    cdef Py_ssize_t n = lats.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    cdef Py_ssize_t i, j
    cdef double d
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                d = _dist(lats[i], lons[i], lats[j], lons[j], metric)
                D[i, j] = d
                D[j, i] = d
    return out


# ---------------------------------------------------------------------------
# lazy-deletion pairwise heap, ordered by (distance, left key, right key)
# ---------------------------------------------------------------------------

cdef inline bint _entry_less(double d1, long a1, long b1,
                             double d2, long a2, long b2,
                             long long[::1] kc, long long[::1] ki) noexcept nogil:
    if d1 != d2:
        return d1 < d2
    if kc[a1] != kc[a2]:
        return kc[a1] < kc[a2]
    if ki[a1] != ki[a2]:
        return ki[a1] < ki[a2]
    if kc[b1] != kc[b2]:
        return kc[b1] < kc[b2]
    return ki[b1] < ki[b2]


cdef inline void _heap_swap(double[::1] hd, long[::1] ha, long[::1] hb,
                            Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    cdef double td = hd[i]
    cdef long ta = ha[i]
    cdef long tb = hb[i]
    hd[i] = hd[j]
    ha[i] = ha[j]
    hb[i] = hb[j]
    hd[j] = td
    ha[j] = ta
    hb[j] = tb


cdef inline void _heap_push(double[::1] hd, long[::1] ha, long[::1] hb,
                            Py_ssize_t* hn, double d, long a, long b,
                            long long[::1] kc, long long[::1] ki) noexcept nogil:
    cdef Py_ssize_t i = hn[0]
    cdef Py_ssize_t parent
    hd[i] = d
    ha[i] = a
    hb[i] = b
    hn[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _entry_less(hd[i], ha[i], hb[i], hd[parent], ha[parent], hb[parent], kc, ki):
            _heap_swap(hd, ha, hb, i, parent)
            i = parent
        else:
            break


cdef inline void _heap_pop(double[::1] hd, long[::1] ha, long[::1] hb,
                           Py_ssize_t* hn,
                           long long[::1] kc, long long[::1] ki) noexcept nogil:
    cdef Py_ssize_t i = 0, child, last = hn[0] - 1
    hd[0] = hd[last]
    ha[0] = ha[last]
    hb[0] = hb[last]
    hn[0] = last
    while True:
        child = 2 * i + 1
        if child >= last:
            break
        if child + 1 < last and _entry_less(hd[child + 1], ha[child + 1], hb[child + 1],
                                            hd[child], ha[child], hb[child], kc, ki):
            child += 1
        if _entry_less(hd[child], ha[child], hb[child], hd[i], ha[i], hb[i], kc, ki):
            _heap_swap(hd, ha, hb, i, child)
            i = child
        else:
            break


def agglomerate_merges(dist, lats_in, lons_in, cell_ids_in, int linkage,
                       int metric, double cutoff):
    """Run the merge loop; returns (left, right, distance, new_id) arrays."""
    cdef double[::1] lats = np.ascontiguousarray(lats_in, dtype=np.float64)
    cdef double[::1] lons = np.ascontiguousarray(lons_in, dtype=np.float64)
    cdef long long[::1] cids = np.ascontiguousarray(cell_ids_in, dtype=np.int64)
    cdef Py_ssize_t n = cids.shape[0]

    left = np.empty(max(n - 1, 0), dtype=np.int64)
    right = np.empty(max(n - 1, 0), dtype=np.int64)
    dout = np.empty(max(n - 1, 0), dtype=np.float64)
    cdef long long[::1] mleft = left
    cdef long long[::1] mright = right
    cdef double[::1] mdist = dout
    cdef Py_ssize_t nmerges

    if n < 2:
        nmerges = 0
    elif linkage == LINKAGE_CENTROID:
        nmerges = _centroid_loop(lats, lons, cids, metric, cutoff,
                                 mleft, mright, mdist)
    else:
        if dist is None:
            dist = pairwise_distances(lats_in, lons_in, metric)
        D = np.array(dist, dtype=np.float64, copy=True)
        nmerges = _heap_loop(D, cids, linkage, cutoff, mleft, mright, mdist)

    m = int(nmerges)
    return (left[:m].copy(), right[:m].copy(), dout[:m].copy(),
            np.arange(n, n + m, dtype=np.int64))


cdef Py_ssize_t _heap_loop(double[:, ::1] D, long long[::1] cids, int linkage,
                           double cutoff, long long[::1] mleft,
                           long long[::1] mright, double[::1] mdist):
    cdef Py_ssize_t n = cids.shape[0]
    cdef Py_ssize_t total = 2 * n - 1

    kc_arr = np.zeros(total, dtype=np.int64)
    ki_arr = np.zeros(total, dtype=np.int64)
    size_arr = np.zeros(total, dtype=np.int64)
    active_arr = np.zeros(total, dtype=np.int8)
    slot_of_arr = np.zeros(total, dtype=np.int64)
    cluster_at_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] kc = kc_arr
    cdef long long[::1] ki = ki_arr
    cdef long long[::1] size = size_arr
    cdef signed char[::1] active = active_arr
    cdef long long[::1] slot_of = slot_of_arr
    cdef long long[::1] cluster_at = cluster_at_arr

    # Every push across the whole run fits in this bound.
    cdef Py_ssize_t cap = n * (n - 1) // 2 + (n - 1) * (n - 2) // 2 + 1
    hd_arr = np.empty(cap, dtype=np.float64)
    ha_arr = np.empty(cap, dtype=np.dtype("l"))
    hb_arr = np.empty(cap, dtype=np.dtype("l"))
    cdef double[::1] hd = hd_arr
    cdef long[::1] ha = ha_arr
    cdef long[::1] hb = hb_arr
    cdef Py_ssize_t hn = 0

    cdef Py_ssize_t i, j, sx
    cdef long a, b
    cdef long long c, x, na, nb, sa, sb
    cdef double d, dax, dbx, dcx
    cdef Py_ssize_t next_id = n, remaining = n, nmerges = 0

    with nogil:
        for i in range(n):
            kc[i] = cids[i]
            ki[i] = i
            size[i] = 1
            active[i] = 1
            slot_of[i] = i
            cluster_at[i] = i
        for i in range(n):
            for j in range(i + 1, n):
                if kc[i] < kc[j] or (kc[i] == kc[j] and ki[i] <= ki[j]):
                    a = <long> i
                    b = <long> j
                else:
                    a = <long> j
                    b = <long> i
                _heap_push(hd, ha, hb, &hn, D[i, j], a, b, kc, ki)

        while remaining > 1 and hn > 0:
            d = hd[0]
            a = ha[0]
            b = hb[0]
            _heap_pop(hd, ha, hb, &hn, kc, ki)
            if not (active[a] and active[b]):
                continue
            if d > cutoff:
                break
            c = next_id
            next_id += 1
            mleft[nmerges] = a
            mright[nmerges] = b
            mdist[nmerges] = d
            nmerges += 1
            active[a] = 0
            active[b] = 0
            active[c] = 1
            kc[c] = kc[a] if kc[a] < kc[b] else kc[b]
            ki[c] = ki[a] if ki[a] < ki[b] else ki[b]
            size[c] = size[a] + size[b]
            sa = slot_of[a]
            sb = slot_of[b]
            slot_of[c] = sa
            cluster_at[sa] = c
            cluster_at[sb] = -1
            remaining -= 1
            na = size[a]
            nb = size[b]
            for sx in range(n):
                x = cluster_at[sx]
                if x < 0 or sx == sa:
                    continue
                dax = D[sa, sx]
                dbx = D[sb, sx]
                if linkage == LINK_SINGLE:
                    dcx = dax if dax < dbx else dbx
                elif linkage == LINK_COMPLETE:
                    dcx = dax if dax > dbx else dbx
                else:
                    dcx = (na * dax + nb * dbx) / (na + nb)
                D[sa, sx] = dcx
                D[sx, sa] = dcx
                if kc[c] < kc[x] or (kc[c] == kc[x] and ki[c] <= ki[x]):
                    _heap_push(hd, ha, hb, &hn, dcx, <long> c, <long> x, kc, ki)
                else:
                    _heap_push(hd, ha, hb, &hn, dcx, <long> x, <long> c, kc, ki)
    return nmerges


cdef Py_ssize_t _centroid_loop(double[::1] lats, double[::1] lons,
                               long long[::1] cids, int metric, double cutoff,
                               long long[::1] mleft, long long[::1] mright,
                               double[::1] mdist):
    cdef Py_ssize_t n = cids.shape[0]
    cdef Py_ssize_t total = 2 * n - 1

    kc_arr = np.zeros(total, dtype=np.int64)
    ki_arr = np.zeros(total, dtype=np.int64)
    leaf_arr = np.arange(n, dtype=np.int64)
    ref_arr = np.zeros(total, dtype=np.float64)
    lat_acc_arr = np.zeros(total, dtype=np.float64)
    lon_acc_arr = np.zeros(total, dtype=np.float64)
    count_arr = np.zeros(total, dtype=np.int64)
    stamp_arr = np.full(total, -1, dtype=np.int64)
    order_arr = np.zeros(n, dtype=np.int64)
    clat_arr = np.zeros(total, dtype=np.float64)
    clon_arr = np.zeros(total, dtype=np.float64)
    cdef long long[::1] kc = kc_arr
    cdef long long[::1] ki = ki_arr
    cdef long long[::1] leaf_cluster = leaf_arr
    cdef double[::1] ref_lon = ref_arr
    cdef double[::1] lat_acc = lat_acc_arr
    cdef double[::1] lon_acc = lon_acc_arr
    cdef long long[::1] count = count_arr
    cdef long long[::1] stamp = stamp_arr
    cdef long long[::1] order = order_arr
    cdef double[::1] cen_lat = clat_arr
    cdef double[::1] cen_lon = clon_arr

    cdef Py_ssize_t i, ii, jj, norder
    cdef long long c, a, b, p, q, best_a, best_b, it = 0
    cdef double d, best_d
    cdef bint have_best
    cdef Py_ssize_t next_id = n, remaining = n, nmerges = 0

    with nogil:
        for i in range(n):
            kc[i] = cids[i]
            ki[i] = i

        while remaining > 1:
            norder = 0
            for i in range(n):
                c = leaf_cluster[i]
                if stamp[c] != it:
                    stamp[c] = it
                    ref_lon[c] = lons[i]
                    lat_acc[c] = 0.0
                    lon_acc[c] = 0.0
                    count[c] = 0
                    order[norder] = c
                    norder += 1
                lat_acc[c] += lats[i]
                lon_acc[c] += ref_lon[c] + _wrap(lons[i] - ref_lon[c])
                count[c] += 1
            for ii in range(norder):
                c = order[ii]
                cen_lat[c] = lat_acc[c] / count[c]
                cen_lon[c] = _wrap(lon_acc[c] / count[c])

            have_best = 0
            best_d = 0.0
            best_a = 0
            best_b = 0
            for ii in range(norder):
                for jj in range(ii + 1, norder):
                    p = order[ii]
                    q = order[jj]
                    if not (kc[p] < kc[q] or (kc[p] == kc[q] and ki[p] <= ki[q])):
                        p, q = q, p
                    d = _dist(cen_lat[p], cen_lon[p], cen_lat[q], cen_lon[q], metric)
                    if (not have_best) or _entry_less(d, <long> p, <long> q,
                                                      best_d, <long> best_a,
                                                      <long> best_b, kc, ki):
                        have_best = 1
                        best_d = d
                        best_a = p
                        best_b = q
            if (not have_best) or best_d > cutoff:
                break
            a = best_a
            b = best_b
            c = next_id
            next_id += 1
            mleft[nmerges] = a
            mright[nmerges] = b
            mdist[nmerges] = best_d
            nmerges += 1
            kc[c] = kc[a] if kc[a] < kc[b] else kc[b]
            ki[c] = ki[a] if ki[a] < ki[b] else ki[b]
            for i in range(n):
                if leaf_cluster[i] == a or leaf_cluster[i] == b:
                    leaf_cluster[i] = c
            remaining -= 1
            it += 1
    return nmerges
