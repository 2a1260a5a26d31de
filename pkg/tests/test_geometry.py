import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoculture.geometry import (EARTH_RADIUS_KM, GeometryError, bounding_box, centroid,
                                 point_in_polygon, polygon_area_km2, validate_ring)

from .oracles import winding_number

SQUARE = ((0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0))


def star(n, seed):
    """Polygon star-shaped about (0.5, 0.5); angular gaps stay below pi so it is simple."""
    rng = random.Random(seed)
    angles = [2 * math.pi * (i + rng.uniform(0, 0.45)) / n for i in range(n)]
    radii = [rng.uniform(0.1, 0.5) for _ in angles]
    return [(0.5 + r * math.sin(a), 0.5 + r * math.cos(a)) for r, a in zip(radii, angles)]


def test_square_interior_and_boundary():
    assert point_in_polygon((0.5, 0.5), SQUARE)
    assert point_in_polygon((0.0, 0.5), SQUARE)
    assert point_in_polygon((1.0, 1.0), SQUARE)
    assert not point_in_polygon((1.5, 0.5), SQUARE)
    assert not point_in_polygon((-1e-9, 0.5), SQUARE)


def test_concave_notch():
    u = ((0, 0), (0, 3), (3, 3), (3, 2), (1, 2), (1, 1), (3, 1), (3, 0))
    assert point_in_polygon((2.0, 0.5), u)
    assert not point_in_polygon((2.0, 1.5), u)
    assert point_in_polygon((2.0, 2.5), u)
    assert point_in_polygon((0.5, 1.5), u)


def test_agrees_with_winding_number():
    # 100 random simple polygons x 100 points = 10,000 comparisons
    rng = random.Random(11)
    disagreements = 0
    for seed in range(100):
        poly = star(rng.randint(3, 12), seed)
        validate_ring(poly)
        for _ in range(100):
            p = (rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1))
            disagreements += point_in_polygon(p, poly) != winding_number(p, poly)
    assert disagreements == 0


def test_equator_square_area():
    d = 0.01
    ring = ((0.0, 0.0), (0.0, d), (d, d), (d, 0.0))
    side = EARTH_RADIUS_KM * math.radians(d)
    expected = side * side * math.cos(math.radians(d / 2))
    assert polygon_area_km2(ring) == pytest.approx(expected, rel=1e-12)
    assert polygon_area_km2(ring) == pytest.approx(1.23644, abs=1e-5)


def test_area_shrinks_with_latitude():
    d = 0.01
    eq = polygon_area_km2(((0.0, 0.0), (0.0, d), (d, d), (d, 0.0)))
    london = polygon_area_km2(((51.5, 0.0), (51.5, d), (51.5 + d, d), (51.5 + d, 0.0)))
    assert london / eq == pytest.approx(
        math.cos(math.radians(51.505)) / math.cos(math.radians(0.005)), rel=1e-9)


def test_orientation_does_not_matter():
    assert polygon_area_km2(SQUARE) == polygon_area_km2(SQUARE[::-1])


@pytest.mark.parametrize("ring", [
    ((0, 0), (1, 1)),
    ((0, 0), (1, 1), (2, 2)),
    ((0, 0), (0, 0), (1, 1)),
])
def test_degenerate_area_raises(ring):
    with pytest.raises(GeometryError):
        polygon_area_km2(ring)


def test_bow_tie_is_not_simple():
    with pytest.raises(GeometryError):
        validate_ring(((0, 0), (1, 1), (0, 1), (1, 0)))


def test_repeated_vertex_is_rejected():
    with pytest.raises(GeometryError):
        validate_ring(((0, 0), (0, 1), (1, 1), (0, 1), (1, 0)))


def test_centroid_and_bbox():
    assert centroid(SQUARE) == pytest.approx((0.5, 0.5))
    assert bounding_box(star(8, 1)) == tuple(
        f(p[i] for p in star(8, 1)) for f, i in ((min, 0), (min, 1), (max, 0), (max, 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 15), st.integers(0, 10**6), st.floats(-60, 60), st.floats(-170, 170))
def test_translation_keeps_membership(n, seed, dlat, dlon):
    poly = star(n, seed)
    moved = [(a + dlat, b + dlon) for a, b in poly]
    c = (0.5, 0.5)
    assert point_in_polygon(c, poly)
    shifted = (c[0] + dlat, c[1] + dlon)
    assert point_in_polygon(shifted, moved)
