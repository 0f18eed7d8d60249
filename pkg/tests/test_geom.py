import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_convex_polygon, random_star_polygon
from urbanreach.errors import ParameterError, ValidationError
from urbanreach.geom import (
    MultiPolygon,
    Point,
    Polygon,
    Ring,
    affine,
    box,
    distance,
    max_distance_to_boundary,
    point_in_polygon,
    points_in_polygon,
    polygon_area,
)


def square_with_hole():
    return Polygon(Ring(((0, 0), (4000, 0), (4000, 4000), (0, 4000))), (Ring(((1000, 1000), (3000, 1000), (3000, 3000), (1000, 3000))),))


def test_unit_square_area():
    assert polygon_area(box(0, 0, 1000, 1000)) == pytest.approx(1.0)


def test_hole_is_subtracted():
    assert polygon_area(square_with_hole()) == pytest.approx(12.0)


def test_multipolygon_area_sums_parts():
    mp = MultiPolygon((box(0, 0, 1000, 1000), box(2000, 0, 3000, 2000)))
    assert polygon_area(mp) == pytest.approx(3.0)


def test_orientation_normalized():
    cw = Polygon(Ring(((0, 0), (0, 1000), (1000, 1000), (1000, 0))))
    assert cw.exterior.is_ccw
    assert not square_with_hole().holes[0].is_ccw
    assert polygon_area(cw) == pytest.approx(1.0)


@pytest.mark.parametrize("verts", [[(0, 0), (1, 1)], [(0, 0), (1, 1), (0, 0), (1, 1)], [(0, 0), (1, 1), (2, 2)]])
def test_degenerate_ring_rejected(verts):
    with pytest.raises(ValidationError):
        Ring(tuple(verts))


def test_point_in_polygon_cases():
    sq = box(0, 0, 1000, 1000)
    assert point_in_polygon(Point(500, 500), sq)
    assert point_in_polygon(Point(1000, 500), sq)  # boundary counts
    assert point_in_polygon(Point(0, 0), sq)
    assert not point_in_polygon(Point(1000.1, 500), sq)
    g = square_with_hole()
    assert not point_in_polygon(Point(2000, 2000), g)
    assert point_in_polygon(Point(1000, 2000), g)  # hole boundary is region boundary
    assert point_in_polygon(Point(500, 500), g)


def test_distance():
    assert distance(Point(0, 0), Point(3, 4)) == 5
    assert distance(Point(7.5, -2), Point(7.5, -2)) == 0


def test_distance_random_against_hypotenuse(rng):
    for a, b in rng.uniform(-1e5, 1e5, size=(100, 2, 2)):
        expected = math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
        assert distance(Point(*a), Point(*b)) == pytest.approx(expected, rel=1e-9)
        assert distance(Point(*a), Point(*b)) == distance(Point(*b), Point(*a))


def test_max_distance_center_of_square():
    assert max_distance_to_boundary(Point(1000, 1000), box(0, 0, 2000, 2000)) == pytest.approx(math.sqrt(2))


def test_max_distance_near_corner():
    assert max_distance_to_boundary(Point(1e-6, 1e-6), box(0, 0, 1000, 1000)) == pytest.approx(math.sqrt(2), rel=1e-8)


def test_max_distance_outside_raises():
    with pytest.raises(ParameterError):
        max_distance_to_boundary(Point(5000, 5000), box(0, 0, 1000, 1000))


def _boundary_samples(g: Polygon, per_edge: int) -> np.ndarray:
    t = np.linspace(0, 1, per_edge)[:, None]
    chunks = []
    for ring in g.rings():
        for a, b in ring.segments():
            chunks.append(np.asarray(a) + t * (np.asarray(b) - np.asarray(a)))
    return np.vstack(chunks)


def test_max_distance_matches_boundary_sampling(rng):
    for _ in range(5):
        g = random_convex_polygon(rng, n=10)
        site = Point(*rng.uniform(-200, 200, 2))
        samples = _boundary_samples(g, 10_000)
        oracle = np.hypot(samples[:, 0] - site.x, samples[:, 1] - site.y).max() / 1000
        assert max_distance_to_boundary(site, g) == pytest.approx(oracle, rel=1e-9)


def test_max_distance_nonconvex_matches_sampling(rng):
    g = random_star_polygon(rng, n=14)
    site = Point(0.0, 0.0)
    samples = _boundary_samples(g, 2_000)
    oracle = np.hypot(samples[:, 0], samples[:, 1]).max() / 1000
    assert max_distance_to_boundary(site, g) == pytest.approx(oracle, rel=1e-9)


def _winding_number(p, ring_pts) -> int:
    wn = 0
    n = len(ring_pts)
    for i in range(n):
        (ax, ay), (bx, by) = ring_pts[i], ring_pts[(i + 1) % n]
        cross = (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)
        if ay <= p[1] < by and cross > 0:
            wn += 1
        elif by <= p[1] < ay and cross < 0:
            wn -= 1
    return wn


def test_point_in_polygon_agrees_with_winding_number(rng):
    for _ in range(3):
        g = random_star_polygon(rng, n=12)
        ring = g.exterior.vertices
        pts = rng.uniform(-1100, 1100, size=(10_000, 2))
        ref = np.array([_winding_number(p, ring) != 0 for p in pts])
        vec = points_in_polygon(pts[:, 0], pts[:, 1], g)
        assert np.array_equal(ref, vec)
        scalar = np.array([point_in_polygon(Point(*p), g) for p in pts[:500]])
        assert np.array_equal(ref[:500], scalar)


coords = st.floats(-1e4, 1e4, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(dx=coords, dy=coords, theta=st.floats(0, 2 * math.pi), k=st.floats(0.1, 10), seed=st.integers(0, 10_000))
def test_area_invariances(dx, dy, theta, k, seed):
    g = random_star_polygon(np.random.default_rng(seed), n=9)
    base = polygon_area(g)
    c, s = math.cos(theta), math.sin(theta)
    rotated = Polygon(Ring(tuple((c * x - s * y + dx, s * x + c * y + dy) for x, y in g.exterior.vertices)))
    assert polygon_area(rotated) == pytest.approx(base, rel=1e-9)
    assert polygon_area(affine(g, k)) == pytest.approx(base * k * k, rel=1e-9)
    assert polygon_area(Polygon(g.exterior.reversed())) == pytest.approx(base, rel=1e-12)
