"""Voronoi catchments of a service layer.

The Delaunay triangulation is built incrementally (Bowyer-Watson) with ghost
triangles standing in for the point at infinity, so hull edges come out right
without a super-triangle. Each Voronoi cell is then the intersection of the
bisector half-planes of its Delaunay neighbours, closed by the city border.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import boolops
from .errors import DegenerateInputError, ParameterError
from .geom import (
    SNAP_TOLERANCE,
    Areal,
    MultiPolygon,
    Point,
    PointLayer,
    Polygon,
    Ring,
    as_multipolygon,
    bounds,
    max_distance_to_boundary,
    point_in_polygon,
    polygon_area,
)

log = logging.getLogger(__name__)

GHOST = -1
_ORIENT_EPS = 1e-12
_INCIRCLE_EPS = 1e-12


@dataclass(frozen=True)
class Triangulation:
    sites: tuple[Point, ...]
    triangles: tuple[tuple[int, int, int], ...]
    # positions of ``sites`` in the caller's list (duplicates removed)
    source_index: tuple[int, ...] = ()

    def neighbors(self) -> list[set[int]]:
        nb: list[set[int]] = [set() for _ in self.sites]
        for a, b, c in self.triangles:
            nb[a].update((b, c))
            nb[b].update((a, c))
            nb[c].update((a, b))
        return nb


def dedupe_sites(sites: Sequence[Point], tol: float = SNAP_TOLERANCE) -> tuple[list[Point], list[int]]:
    """Merge sites closer than ``tol``; the first occurrence wins."""
    pts = np.asarray(sites, dtype=float).reshape(-1, 2)
    drop: set[int] = set()
    if len(pts) > 1:
        for i, j in sorted(cKDTree(pts).query_pairs(tol)):
            if i not in drop:
                drop.add(j)
    keep = [i for i in range(len(pts)) if i not in drop]
    if drop:
        log.info("merged %d duplicate site(s)", len(drop))
    return [Point(float(pts[i][0]), float(pts[i][1])) for i in keep], keep


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle(a, b, c, d) -> float:
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    return (
        adx * (bdy * cd - bd * cdy)
        - ady * (bdx * cd - bd * cdx)
        + ad * (bdx * cdy - bdy * cdx)
    )


class _Mesh:
    def __init__(self, pts: np.ndarray):
        self.p = pts
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.edge: dict[tuple[int, int], int] = {}
        self._next = 0
        self.last_real = -1

    def add(self, t: tuple[int, int, int]) -> int:
        tid = self._next
        self._next += 1
        self.tris[tid] = t
        a, b, c = t
        self.edge[(a, b)] = tid
        self.edge[(b, c)] = tid
        self.edge[(c, a)] = tid
        if GHOST not in t:
            self.last_real = tid
        return tid

    def remove(self, tid: int) -> None:
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == tid:
                del self.edge[e]

    def conflicts(self, tid: int, k: int) -> bool:
        a, b, c = self.tris[tid]
        p = self.p
        if c == GHOST:
            o = _orient(p[a], p[b], p[k])
            if o > _ORIENT_EPS:
                return True
            if abs(o) <= _ORIENT_EPS:
                # on the hull line: conflict only strictly inside the segment
                d = p[b] - p[a]
                t = float(np.dot(p[k] - p[a], d) / np.dot(d, d))
                return 0.0 < t < 1.0
            return False
        return _incircle(p[a], p[b], p[c], p[k]) > _INCIRCLE_EPS

    def locate(self, k: int) -> int:
        p = self.p
        tid = self.last_real
        for _ in range(4 * len(self.tris) + 16):
            a, b, c = self.tris[tid]
            moved = False
            for u, v in ((a, b), (b, c), (c, a)):
                if _orient(p[u], p[v], p[k]) < -_ORIENT_EPS:
                    nb = self.edge[(v, u)]
                    if self.tris[nb][2] == GHOST:
                        return nb
                    tid = nb
                    moved = True
                    break
            if not moved:
                if self.conflicts(tid, k):
                    return tid
                break
        for tid in sorted(self.tris):
            if self.conflicts(tid, k):
                return tid
        raise DegenerateInputError(f"could not place site {k} in the triangulation")

    def insert(self, k: int) -> None:
        start = self.locate(k)
        cavity = {start}
        queue = deque([start])
        while queue:
            a, b, c = self.tris[queue.popleft()]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.edge.get((v, u))
                if nb is not None and nb not in cavity and self.conflicts(nb, k):
                    cavity.add(nb)
                    queue.append(nb)
        boundary = []
        for tid in sorted(cavity):
            a, b, c = self.tris[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.edge.get((v, u)) not in cavity:
                    boundary.append((u, v))
        for tid in cavity:
            self.remove(tid)
        for u, v in boundary:
            if v == GHOST:
                self.add((k, u, GHOST))
            elif u == GHOST:
                self.add((v, k, GHOST))
            else:
                self.add((u, v, k))


def delaunay(sites: Sequence[Point]) -> Triangulation:
    """Delaunay triangulation; sites are inserted in index order.

    Cocircular ties resolve in favour of the triangles that exist first, so
    the output is a deterministic function of the input order.
    """
    uniq, source = dedupe_sites(sites)
    n = len(uniq)
    if n < 3:
        raise DegenerateInputError(f"need at least 3 distinct sites, got {n}")
    raw = np.asarray(uniq, dtype=float)
    center = raw.mean(axis=0)
    scale = float(np.abs(raw - center).max())
    pts = (raw - center) / scale

    third = next((k for k in range(2, n) if abs(_orient(pts[0], pts[1], pts[k])) > _ORIENT_EPS), None)
    if third is None:
        raise DegenerateInputError("all sites are collinear")
    mesh = _Mesh(pts)
    a, b, c = 0, 1, third
    if _orient(pts[a], pts[b], pts[c]) < 0:
        a, b = b, a
    mesh.add((a, b, c))
    for u, v in ((a, b), (b, c), (c, a)):
        mesh.add((v, u, GHOST))
    for k in range(2, n):
        if k != third:
            mesh.insert(k)

    tris = []
    for t in mesh.tris.values():
        if GHOST in t:
            continue
        # rotate so the smallest index leads; orientation is preserved
        i = t.index(min(t))
        tris.append(t[i:] + t[:i])
    return Triangulation(tuple(uniq), tuple(sorted(tris)), tuple(source))


def _clip_halfplane(poly: list[tuple[float, float]], nx: float, ny: float, c: float) -> list[tuple[float, float]]:
    """Keep the part of a convex polygon with nx*x + ny*y <= c."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp = nx * p[0] + ny * p[1] - c
        fq = nx * q[0] + ny * q[1] - c
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _convex_cell(i: int, pts: np.ndarray, first: Sequence[int], frame: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Voronoi cell of site i inside ``frame``, coordinates relative to the site.

    ``first`` are the candidate neighbours tried first (Delaunay neighbours);
    any other site closer than twice the current cell radius is then also
    applied, which makes the result exact even if ``first`` is incomplete.
    """
    rel = pts - pts[i]
    d2 = np.einsum("ij,ij->i", rel, rel)
    poly = [(x - pts[i][0], y - pts[i][1]) for x, y in frame]
    used = {i}

    def apply(j):
        # bisector of origin and rel[j]: rel[j] . x <= |rel[j]|^2 / 2
        nonlocal poly
        used.add(j)
        poly = _clip_halfplane(poly, rel[j][0], rel[j][1], 0.5 * d2[j])

    for j in first:
        apply(j)
    order = np.argsort(d2, kind="stable")
    while poly:
        radius2 = max(x * x + y * y for x, y in poly)
        pending = [int(j) for j in order if d2[j] < 4.0 * radius2 and int(j) not in used]
        if not pending:
            break
        for j in pending:
            apply(j)
    return poly


@dataclass(frozen=True)
class CatchmentCell:
    site_index: int
    site: Point
    cell: MultiPolygon
    area: float | None = None
    coverage_distance: float | None = None


def _metrics(site: Point, cell: MultiPolygon) -> tuple[float, float]:
    if cell.is_empty:
        return 0.0, 0.0
    return polygon_area(cell), max_distance_to_boundary(site, cell)


def catchment_metrics(cells: Sequence[CatchmentCell]) -> list[tuple[float, float]]:
    """(area km², coverage distance km) for each cell, recomputed from its geometry."""
    return [_metrics(c.site, c.cell) for c in cells]


def voronoi_cells(layer: PointLayer | Sequence[Point], boundary: Areal) -> list[CatchmentCell]:
    """Voronoi cells of the layer's sites clipped to ``boundary``.

    Sites outside the boundary are logged and skipped; duplicate sites keep
    their first occurrence only. Cells carry area and coverage distance.
    """
    points = list(layer)
    if not points:
        raise ParameterError("service layer has no sites")
    boundary = as_multipolygon(boundary)
    if boundary.is_empty:
        raise ParameterError("boundary is empty")

    retained = []
    for idx, p in enumerate(points):
        if point_in_polygon(p, boundary):
            retained.append(idx)
        else:
            log.warning("site %d at (%.3f, %.3f) lies outside the boundary; excluded", idx, p[0], p[1])
    if not retained:
        raise ParameterError("no site lies inside the boundary")

    uniq, keep = dedupe_sites([points[i] for i in retained])
    index = [retained[k] for k in keep]
    pts = np.asarray(uniq, dtype=float).reshape(-1, 2)
    n = len(pts)

    x0, y0, x1, y1 = bounds(boundary)
    margin = max(x1 - x0, y1 - y0)
    frame = [(x0 - margin, y0 - margin), (x1 + margin, y0 - margin), (x1 + margin, y1 + margin), (x0 - margin, y1 + margin)]

    if n >= 3:
        try:
            neighbors = [sorted(s) for s in delaunay(uniq).neighbors()]
        except DegenerateInputError:
            # collinear sites: bisectors of all other sites
            neighbors = [[j for j in range(n) if j != i] for i in range(n)]
    else:
        neighbors = [[j for j in range(n) if j != i] for i in range(n)]

    cells = []
    for i in range(n):
        site = Point(float(pts[i][0]), float(pts[i][1]))
        if n == 1:
            region = boundary
        else:
            rel = _convex_cell(i, pts, neighbors[i], frame)
            ring = Ring(tuple((x + site.x, y + site.y) for x, y in rel))
            region = boolops.intersection(MultiPolygon((Polygon(ring),)), boundary)
        area, reach = _metrics(site, region)
        cells.append(CatchmentCell(index[i], site, region, area, reach))
    return cells


def with_metrics(cell: CatchmentCell) -> CatchmentCell:
    area, reach = _metrics(cell.site, cell.cell)
    return replace(cell, area=area, coverage_distance=reach)
