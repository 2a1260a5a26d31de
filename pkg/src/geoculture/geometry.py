"""Planar polygon helpers for assigning venues to administrative areas.

Rings are sequences of ``(lat, lon)`` vertices without a repeated closing
vertex. Longitude is treated as x and latitude as y.
"""

from __future__ import annotations

import math
from typing import Sequence

EARTH_RADIUS_KM = 6371.0088  # IUGG mean radius

LatLon = tuple[float, float]


class GeometryError(ValueError):
    pass


def _distinct(ring: Sequence[LatLon]) -> int:
    return len(set(ring))


def _cross(o: LatLon, a: LatLon, b: LatLon) -> float:
    return (a[1] - o[1]) * (b[0] - o[0]) - (a[0] - o[0]) * (b[1] - o[1])


def _on_segment(p: LatLon, a: LatLon, b: LatLon) -> bool:
    if _cross(a, b, p) != 0.0:
        return False
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def _segments_intersect(p1: LatLon, p2: LatLon, q1: LatLon, q2: LatLon) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 \
            and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    return (_on_segment(p1, q1, q2) or _on_segment(p2, q1, q2)
            or _on_segment(q1, p1, p2) or _on_segment(q2, p1, p2))


def validate_ring(ring: Sequence[LatLon]) -> None:
    """Raise :class:`GeometryError` unless ``ring`` is a simple polygon."""
    if _distinct(ring) < 3:
        raise GeometryError("polygon needs at least 3 distinct vertices")
    n = len(ring)
    if n != _distinct(ring):
        raise GeometryError("polygon repeats a vertex")
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent through the closing edge
            if _segments_intersect(*edges[i], *edges[j]):
                raise GeometryError(f"polygon edges {i} and {j} intersect")


def point_in_polygon(point: LatLon, polygon: Sequence[LatLon]) -> bool:
    """Even-odd ray casting; points on an edge or vertex count as inside."""
    if _distinct(polygon) < 3:
        raise GeometryError("polygon needs at least 3 distinct vertices")
    y, x = point
    n = len(polygon)
    inside = False
    j = n - 1
    for i in range(n):
        yi, xi = polygon[i]
        yj, xj = polygon[j]
        if _on_segment(point, polygon[j], polygon[i]):
            return True
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def bounding_box(polygon: Sequence[LatLon]) -> tuple[float, float, float, float]:
    """``(min_lat, min_lon, max_lat, max_lon)``."""
    lats = [p[0] for p in polygon]
    lons = [p[1] for p in polygon]
    return min(lats), min(lons), max(lats), max(lons)


def _signed_area_and_centroid(polygon: Sequence[LatLon]) -> tuple[float, float, float]:
    # coordinates relative to the first vertex to limit cancellation
    lat0, lon0 = polygon[0]
    pts = [(lon - lon0, lat - lat0) for lat, lon in polygon]
    n = len(pts)
    a_terms, cx_terms, cy_terms = [], [], []
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        c = x1 * y2 - x2 * y1
        a_terms.append(c)
        cx_terms.append((x1 + x2) * c)
        cy_terms.append((y1 + y2) * c)
    a2 = math.fsum(a_terms)
    if a2 == 0.0:
        return 0.0, lat0, lon0
    cx = math.fsum(cx_terms) / (3.0 * a2)
    cy = math.fsum(cy_terms) / (3.0 * a2)
    return a2 / 2.0, cy + lat0, cx + lon0


def centroid(polygon: Sequence[LatLon]) -> LatLon:
    """Area centroid in (lat, lon)."""
    _, lat, lon = _signed_area_and_centroid(polygon)
    return lat, lon


def polygon_area_km2(polygon: Sequence[LatLon]) -> float:
    """Surface area in km² using an equirectangular projection.

    The projection is centred on the centroid latitude, which keeps the error
    negligible for ward-sized polygons.
    """
    if _distinct(polygon) < 3:
        raise GeometryError("polygon needs at least 3 distinct vertices")
    area_deg2, lat_c, _ = _signed_area_and_centroid(polygon)
    if area_deg2 == 0.0:
        raise GeometryError("polygon has zero area")
    k = math.radians(1.0) * EARTH_RADIUS_KM
    return abs(area_deg2) * k * k * math.cos(math.radians(lat_c))
