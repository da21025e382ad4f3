"""Distance and centroid primitives.

Three metrics are supported:

* ``equirect_m`` (default) — local equirectangular projection,
  dx = R * dlon * cos(mean lat), dy = R * dlat. At LAC scale (tens of km)
  it is indistinguishable from a geodesic and returns meters, which lets
  the clustering cutoff connect to the physical LAC extent bound.
* ``haversine_m`` — great-circle meters, used as a cross-check.
* ``degrees_euclid`` — plain Euclidean distance on (lat, lon) degrees,
  the replication mode for pipelines that clustered raw coordinates.

The scalar helpers here are the reference semantics; the compiled kernels
replicate them operation-for-operation (see kernels/_ckernels.pyx). Keep
the float expressions in sync: e.g. sqrt(x*x + y*y) instead of hypot,
whose Python implementation differs from libm's by an ulp.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Iterable, Sequence

from .errors import AntimeridianSpread, EmptyInput
from .models import GeoPoint

# IUGG mean Earth radius. One fixed constant keeps results reproducible.
EARTH_RADIUS_M = 6_371_008.8

_DEG = math.pi / 180.0


class Metric(str, Enum):
    EQUIRECT_M = "equirect_m"
    HAVERSINE_M = "haversine_m"
    DEGREES_EUCLID = "degrees_euclid"


# Integer codes shared with the compiled kernels.
METRIC_CODES = {
    Metric.EQUIRECT_M: 0,
    Metric.HAVERSINE_M: 1,
    Metric.DEGREES_EUCLID: 2,
}


def wrap_lon(delta: float) -> float:
    """Minimal signed longitude difference, in [-180, 180).

    Implemented with +-360 corrections rather than %, so that
    wrap_lon(-d) == -wrap_lon(d) exactly in floating point (except at the
    +-180 seam, where both ends map to -180); distance symmetry relies
    on this.
    """
    while delta >= 180.0:
        delta -= 360.0
    while delta < -180.0:
        delta += 360.0
    return delta


def normalize_lon(lon: float) -> float:
    """Fold a longitude into [-180, 180)."""
    return wrap_lon(lon)


def distance_deg(
    lat1: float, lon1: float, lat2: float, lon2: float, metric: Metric
) -> float:
    """Distance between two (lat, lon) degree pairs under ``metric``.

    Returns meters for equirect/haversine, degree-units for degrees_euclid.
    """
    if metric is Metric.EQUIRECT_M:
        dphi = (lat2 - lat1) * _DEG
        dlam = wrap_lon(lon2 - lon1) * _DEG
        x = dlam * math.cos(((lat1 + lat2) / 2.0) * _DEG)
        return EARTH_RADIUS_M * math.sqrt(x * x + dphi * dphi)
    if metric is Metric.HAVERSINE_M:
        phi1 = lat1 * _DEG
        phi2 = lat2 * _DEG
        dphi = (lat2 - lat1) * _DEG
        dlam = (lon2 - lon1) * _DEG
        sp = math.sin(dphi / 2.0)
        sl = math.sin(dlam / 2.0)
        a = sp * sp + math.cos(phi1) * math.cos(phi2) * sl * sl
        s = math.sqrt(a)
        if s > 1.0:
            s = 1.0
        return 2.0 * EARTH_RADIUS_M * math.asin(s)
    dphi = lat2 - lat1
    dlam = wrap_lon(lon2 - lon1)
    return math.sqrt(dphi * dphi + dlam * dlam)


def distance(a: GeoPoint, b: GeoPoint, metric: Metric = Metric.EQUIRECT_M) -> float:
    """Symmetric, non-negative distance between two points."""
    return distance_deg(a.lat, a.lon, b.lat, b.lon, metric)


def centroid(points: Iterable[GeoPoint] | Sequence[GeoPoint]) -> GeoPoint:
    """Arithmetic mean of lat and of unwrapped lon.

    Longitudes are unwrapped relative to the first point, so a cluster
    straddling the antimeridian averages correctly; the result is
    re-normalized. Raises AntimeridianSpread when the unwrapped range
    exceeds 180 degrees (degenerate for LAC-scale inputs) and EmptyInput
    for an empty collection.

    Summation happens in input order with a plain running sum; callers that
    need reproducible centroids must pass points in a canonical order.
    """
    pts = list(points)
    if not pts:
        raise EmptyInput("centroid of zero points")
    ref = pts[0].lon
    lat_sum = 0.0
    lon_sum = 0.0
    lo = hi = ref
    for p in pts:
        lat_sum += p.lat
        u = ref + wrap_lon(p.lon - ref)
        lon_sum += u
        if u < lo:
            lo = u
        if u > hi:
            hi = u
    if hi - lo > 180.0:
        raise AntimeridianSpread(f"unwrapped lon range {hi - lo:.3f} deg")
    n = len(pts)
    return GeoPoint(lat_sum / n, normalize_lon(lon_sum / n))
