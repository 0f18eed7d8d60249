"""Planar geometry primitives.

Coordinates are projected meters. Areas are computed in m² and reported in
km²; distances are meters except where a function says otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import ParameterError, ValidationError

# vertex coincidence tolerance, meters
SNAP_TOLERANCE = 1e-6

M2_PER_KM2 = 1e6
M_PER_KM = 1e3


class Point(NamedTuple):
    x: float
    y: float


def _signed_area2(vertices: Sequence[Point]) -> float:
    """Twice the signed shoelace area (positive when counterclockwise)."""
    n = len(vertices)
    if n < 3:
        return 0.0
    # shift to the first vertex to keep the cross products well conditioned
    x0, y0 = vertices[0]
    total = 0.0
    for i in range(1, n - 1):
        ax, ay = vertices[i][0] - x0, vertices[i][1] - y0
        bx, by = vertices[i + 1][0] - x0, vertices[i + 1][1] - y0
        total += ax * by - ay * bx
    return total


def clean_vertices(coords: Iterable[Sequence[float]]) -> list[Point]:
    """Drop the closing vertex and consecutive duplicates within SNAP_TOLERANCE."""
    out: list[Point] = []
    for c in coords:
        p = Point(float(c[0]), float(c[1]))
        if out and abs(p.x - out[-1].x) <= SNAP_TOLERANCE and abs(p.y - out[-1].y) <= SNAP_TOLERANCE:
            continue
        out.append(p)
    while len(out) > 1 and abs(out[0].x - out[-1].x) <= SNAP_TOLERANCE and abs(out[0].y - out[-1].y) <= SNAP_TOLERANCE:
        out.pop()
    return out


@dataclass(frozen=True)
class Ring:
    """Closed ring stored without the repeated closing vertex."""

    vertices: tuple[Point, ...]

    def __post_init__(self):
        verts = tuple(Point(float(v[0]), float(v[1])) for v in self.vertices)
        if len(verts) > 1 and verts[0] == verts[-1]:
            verts = verts[:-1]
        for v in verts:
            if not (math.isfinite(v.x) and math.isfinite(v.y)):
                raise ValidationError(f"non-finite ring coordinate {v}")
        if len(set(verts)) < 3:
            raise ValidationError("ring needs at least 3 distinct vertices")
        object.__setattr__(self, "vertices", verts)
        if _signed_area2(verts) == 0.0:
            raise ValidationError("ring has zero area")

    @property
    def signed_area_m2(self) -> float:
        return 0.5 * _signed_area2(self.vertices)

    @property
    def is_ccw(self) -> bool:
        return self.signed_area_m2 > 0

    def reversed(self) -> "Ring":
        return Ring(tuple(reversed(self.vertices)))

    def oriented(self, ccw: bool) -> "Ring":
        return self if self.is_ccw == ccw else self.reversed()

    def closed_coords(self) -> list[tuple[float, float]]:
        return [tuple(v) for v in self.vertices] + [tuple(self.vertices[0])]

    def segments(self):
        v = self.vertices
        for i in range(len(v)):
            yield v[i], v[(i + 1) % len(v)]


@dataclass(frozen=True)
class Polygon:
    """Polygon with a counterclockwise exterior and clockwise holes.

    Orientation is normalized on construction; containment of holes is checked
    by :func:`validate` rather than here, since overlay outputs are trusted.
    """

    exterior: Ring
    holes: tuple[Ring, ...] = ()

    def __post_init__(self):
        ext = self.exterior if isinstance(self.exterior, Ring) else Ring(tuple(self.exterior))
        holes = tuple(h if isinstance(h, Ring) else Ring(tuple(h)) for h in self.holes)
        object.__setattr__(self, "exterior", ext.oriented(ccw=True))
        object.__setattr__(self, "holes", tuple(h.oriented(ccw=False) for h in holes))

    def rings(self) -> tuple[Ring, ...]:
        return (self.exterior,) + self.holes


@dataclass(frozen=True)
class MultiPolygon:
    parts: tuple[Polygon, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def is_empty(self) -> bool:
        return not self.parts

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)


@dataclass(frozen=True)
class PointLayer:
    """Facility points of one service."""

    points: tuple[Point, ...]
    service: str | None = None
    name: str = ""

    def __post_init__(self):
        pts = tuple(Point(float(p[0]), float(p[1])) for p in self.points)
        for p in pts:
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValidationError(f"non-finite point {p}")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(-1, 2)


Areal = Union[Polygon, MultiPolygon]

EMPTY = MultiPolygon(())


def as_multipolygon(g: Areal) -> MultiPolygon:
    if isinstance(g, MultiPolygon):
        return g
    if isinstance(g, Polygon):
        return MultiPolygon((g,))
    raise TypeError(f"expected Polygon or MultiPolygon, got {type(g).__name__}")


def box(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    return Polygon(Ring(((x0, y0), (x1, y0), (x1, y1), (x0, y1))))


def validate(g: Areal) -> MultiPolygon:
    """Full invariant check: simple rings, holes inside, disjoint parts.

    Returns the geometry as a MultiPolygon; raises ValidationError otherwise.
    """
    import shapely

    from .boolops import to_shapely

    mp = as_multipolygon(g)
    for i, poly in enumerate(mp.parts):
        for ring in poly.rings():
            if not shapely.LinearRing(ring.closed_coords()).is_simple:
                raise ValidationError(f"part {i}: self-intersecting ring")
    shp = to_shapely(mp)
    if not shp.is_valid:
        raise ValidationError(f"invalid polygon: {shapely.is_valid_reason(shp)}")
    return mp


def area_m2(g: Areal) -> float:
    total = 0.0
    for poly in as_multipolygon(g).parts:
        total += abs(poly.exterior.signed_area_m2)
        total -= sum(abs(h.signed_area_m2) for h in poly.holes)
    return max(total, 0.0)


def polygon_area(g: Areal) -> float:
    """Area of a polygon or multipolygon in km² (exterior minus holes)."""
    return area_m2(g) / M2_PER_KM2


def bounds(g: Areal) -> tuple[float, float, float, float]:
    xs = [v.x for p in as_multipolygon(g).parts for v in p.exterior.vertices]
    ys = [v.y for p in as_multipolygon(g).parts for v in p.exterior.vertices]
    if not xs:
        raise ParameterError("bounds of an empty geometry")
    return min(xs), min(ys), max(xs), max(ys)


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _segment_distance(p: Point, a: Point, b: Point) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    L2 = dx * dx + dy * dy
    if L2 == 0.0:
        return distance(p, a)
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / L2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))


def _ring_crossings(p: Point, ring: Ring) -> bool:
    """Even-odd test; result for boundary points is unspecified."""
    x, y = p
    inside = False
    for a, b in ring.segments():
        if (a.y > y) != (b.y > y):
            xint = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y)
            if x < xint:
                inside = not inside
    return inside


def on_boundary(p: Point, g: Areal, tol: float = SNAP_TOLERANCE) -> bool:
    return any(
        _segment_distance(p, a, b) <= tol
        for poly in as_multipolygon(g).parts
        for ring in poly.rings()
        for a, b in ring.segments()
    )


def point_in_polygon(p: Point, g: Areal) -> bool:
    """True iff ``p`` lies in the closed region of ``g`` (boundary counts)."""
    if on_boundary(p, g):
        return True
    for poly in as_multipolygon(g).parts:
        if _ring_crossings(p, poly.exterior) and not any(_ring_crossings(p, h) for h in poly.holes):
            return True
    return False


def _ring_arrays(ring: Ring):
    v = np.asarray(ring.vertices, dtype=float)
    return v, np.roll(v, -1, axis=0)


def points_in_polygon(xs, ys, g: Areal, tol: float = SNAP_TOLERANCE) -> np.ndarray:
    """Vectorized closed-region containment for coordinate arrays."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    shape = np.broadcast(xs, ys).shape
    xs = np.broadcast_to(xs, shape).ravel()
    ys = np.broadcast_to(ys, shape).ravel()
    result = np.zeros(xs.shape, dtype=bool)
    boundary = np.zeros(xs.shape, dtype=bool)
    for poly in as_multipolygon(g).parts:
        parity = np.zeros(xs.shape, dtype=bool)
        for ring in poly.rings():
            a, b = _ring_arrays(ring)
            for (ax, ay), (bx, by) in zip(a, b):
                straddle = (ay > ys) != (by > ys)
                if straddle.any():
                    with np.errstate(divide="ignore", invalid="ignore"):
                        xint = ax + (ys - ay) * (bx - ax) / (by - ay)
                    parity ^= straddle & (xs < xint)
                dx, dy = bx - ax, by - ay
                L2 = dx * dx + dy * dy
                t = np.clip(((xs - ax) * dx + (ys - ay) * dy) / L2, 0.0, 1.0)
                d2 = (xs - ax - t * dx) ** 2 + (ys - ay - t * dy) ** 2
                boundary |= d2 <= tol * tol
        result |= parity
    return (result | boundary).reshape(shape)


def max_distance_to_boundary(site: Point, g: Areal) -> float:
    """Farthest boundary point from ``site``, in km.

    Distance to a segment is maximized at an endpoint, so the maximum over
    vertices (exterior and holes, every part) is exact, convex or not.
    """
    if not point_in_polygon(site, g):
        raise ParameterError(f"site {tuple(site)} lies outside the polygon")
    best = 0.0
    for poly in as_multipolygon(g).parts:
        for ring in poly.rings():
            for v in ring.vertices:
                best = max(best, distance(site, v))
    return best / M_PER_KM


def affine(g, k: float = 1.0, dx: float = 0.0, dy: float = 0.0):
    """Scale about the origin by ``k`` then translate; works on any geometry type."""

    def f(p):
        return Point(p[0] * k + dx, p[1] * k + dy)

    if isinstance(g, MultiPolygon):
        return MultiPolygon(tuple(affine(p, k, dx, dy) for p in g.parts))
    if isinstance(g, Polygon):
        return Polygon(Ring(tuple(map(f, g.exterior.vertices))), tuple(Ring(tuple(map(f, h.vertices))) for h in g.holes))
    if isinstance(g, PointLayer):
        return PointLayer(tuple(map(f, g.points)), g.service, g.name)
    if isinstance(g, tuple) and len(g) == 2:
        return f(g)
    raise TypeError(f"cannot transform {type(g).__name__}")
