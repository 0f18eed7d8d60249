"""Polygon overlay and circular buffers.

Overlay is delegated to GEOS through shapely; inputs and outputs stay in the
package's own geometry types so callers never see shapely objects.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import shapely
from shapely.geometry import MultiPolygon as ShpMultiPolygon
from shapely.geometry import Polygon as ShpPolygon

from .errors import ParameterError, ValidationError
from .geom import (
    EMPTY,
    M_PER_KM,
    SNAP_TOLERANCE,
    Areal,
    MultiPolygon,
    Point,
    PointLayer,
    Polygon,
    Ring,
    as_multipolygon,
)

# overlay parts below this area (m²) are numeric noise
SLIVER_AREA_M2 = 1.0
DEFAULT_SEGMENTS = 64


def to_shapely(g: Areal):
    parts = [
        ShpPolygon(p.exterior.closed_coords(), [h.closed_coords() for h in p.holes])
        for p in as_multipolygon(g).parts
    ]
    return ShpMultiPolygon(parts)


def from_shapely(shp, min_area_m2: float = SLIVER_AREA_M2) -> MultiPolygon:
    """Convert any shapely result, keeping only polygonal parts above the sliver cutoff."""
    if shp.is_empty:
        return EMPTY
    if shp.geom_type == "Polygon":
        polys = [shp]
    elif shp.geom_type in ("MultiPolygon", "GeometryCollection"):
        polys = [g for g in shp.geoms if g.geom_type in ("Polygon", "MultiPolygon")]
        polys = [q for g in polys for q in (g.geoms if g.geom_type == "MultiPolygon" else [g])]
    else:
        return EMPTY
    parts = []
    # stable order: GEOS output order can depend on input order
    for poly in sorted(polys, key=lambda q: (q.bounds, q.area)):
        if poly.area < min_area_m2:
            continue
        holes = [Ring(tuple(h.coords)) for h in poly.interiors if ShpPolygon(h).area >= min_area_m2]
        parts.append(Polygon(Ring(tuple(poly.exterior.coords)), tuple(holes)))
    return MultiPolygon(tuple(parts))


def _checked(g: Areal):
    shp = to_shapely(g)
    if not shp.is_valid:
        raise ValidationError(f"invalid overlay input: {shapely.is_valid_reason(shp)}")
    return shp


def intersection(a: Areal, b: Areal) -> MultiPolygon:
    return from_shapely(shapely.intersection(_checked(a), _checked(b)))


def difference(a: Areal, b: Areal) -> MultiPolygon:
    return from_shapely(shapely.difference(_checked(a), _checked(b)))


def union_all(gs: Iterable[Areal]) -> MultiPolygon:
    shps = [_checked(g) for g in gs]
    if not shps:
        return EMPTY
    return from_shapely(shapely.union_all(shps))


def regular_polygon(center: Point, radius_m: float, segments: int) -> Polygon:
    """Regular n-gon inscribed in the circle, first vertex due east."""
    cx, cy = center
    step = 2.0 * math.pi / segments
    verts = tuple(
        (cx + radius_m * math.cos(k * step), cy + radius_m * math.sin(k * step)) for k in range(segments)
    )
    return Polygon(Ring(verts))


def ngon_area_km2(radius_km: float, segments: int) -> float:
    return 0.5 * segments * radius_km**2 * math.sin(2.0 * math.pi / segments)


def buffer(sites: PointLayer | Sequence[Point], radius: float, segments_per_circle: int = DEFAULT_SEGMENTS) -> MultiPolygon:
    """Union of inscribed n-gon disks of ``radius`` km around every site."""
    if not radius > 0 or radius * M_PER_KM <= SNAP_TOLERANCE:
        raise ParameterError(f"buffer radius must be positive, got {radius} km")
    if segments_per_circle < 8:
        raise ParameterError(f"segments_per_circle must be >= 8, got {segments_per_circle}")
    r = radius * M_PER_KM
    disks = [to_shapely(regular_polygon(p, r, segments_per_circle)) for p in sites]
    if not disks:
        return EMPTY
    return from_shapely(shapely.union_all(disks))

