"""Reading and writing layers, reports and SVG maps.

Layers are RFC 7946-structured FeatureCollections whose coordinates are
already planar meters; nothing is reprojected.
"""
from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from . import boolops
from .coverage import District
from .density import DEFAULT_BREAKS, DensityGrid, classify_density
from .errors import KindMismatchError, LayerIOError, ParameterError, ParseError, ValidationError
from .geom import (
    Areal,
    MultiPolygon,
    Point,
    PointLayer,
    Polygon,
    Ring,
    as_multipolygon,
    bounds,
    clean_vertices,
    validate,
)
from .voronoi import CatchmentCell

log = logging.getLogger(__name__)

KINDS = ("points", "polygons", "districts")
COORD_DECIMALS = 3


# -- reading ---------------------------------------------------------------


def _load_collection(path: Path) -> list[dict]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise LayerIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON: {exc.msg}", len(text[: exc.pos].encode("utf-8"))) from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        raise ValidationError(f"{path}: not a FeatureCollection")
    return doc["features"]


def _geometry(feature, i: int) -> dict:
    geom = feature.get("geometry") if isinstance(feature, dict) else None
    if not isinstance(geom, dict) or "type" not in geom:
        raise ValidationError(f"feature {i}: missing geometry")
    return geom


def _ring(coords, i: int) -> Ring:
    try:
        pts = [(float(c[0]), float(c[1])) for c in coords]
    except (TypeError, ValueError, IndexError):
        raise ValidationError(f"feature {i}: malformed ring coordinates") from None
    if len(pts) < 4 or pts[0] != pts[-1]:
        raise ValidationError(f"feature {i}: ring is not closed")
    try:
        return Ring(tuple(clean_vertices(pts)))
    except ValidationError as exc:
        raise ValidationError(f"feature {i}: {exc}") from None


def _polygons(geom: dict, i: int) -> list[Polygon]:
    coords = geom.get("coordinates")
    polys = [coords] if geom["type"] == "Polygon" else coords
    out = []
    try:
        for rings in polys:
            out.append(Polygon(_ring(rings[0], i), tuple(_ring(r, i) for r in rings[1:])))
    except (TypeError, IndexError):
        raise ValidationError(f"feature {i}: malformed polygon coordinates") from None
    try:
        validate(MultiPolygon(tuple(out)))
    except ValidationError as exc:
        raise ValidationError(f"feature {i}: {exc}") from None
    return out


def _check_kinds(features, allowed: tuple[str, ...], kind: str) -> None:
    bad = [i for i, f in enumerate(features) if _geometry(f, i)["type"] not in allowed]
    if bad:
        raise KindMismatchError(f"expected {kind} ({'/'.join(allowed)})", bad)


def _warn_geographic(xs: Sequence[float], ys: Sequence[float], path: Path) -> None:
    if xs and max(map(abs, xs)) <= 180 and max(map(abs, ys)) <= 90:
        log.warning("%s: coordinates look like longitude/latitude; planar meters are expected", path)


def read_layer(path: str | Path, expected_kind: str, service: str | None = None):
    """Read a FeatureCollection as a PointLayer, MultiPolygon or list of Districts."""
    if expected_kind not in KINDS:
        raise ParameterError(f"expected_kind must be one of {KINDS}")
    path = Path(path)
    features = _load_collection(path)

    if expected_kind == "points":
        _check_kinds(features, ("Point", "MultiPoint"), "points")
        pts = []
        for i, f in enumerate(features):
            g = _geometry(f, i)
            coords = [g["coordinates"]] if g["type"] == "Point" else g["coordinates"]
            try:
                pts.extend(Point(float(c[0]), float(c[1])) for c in coords)
            except (TypeError, ValueError, IndexError):
                raise ValidationError(f"feature {i}: malformed point coordinates") from None
        _warn_geographic([p.x for p in pts], [p.y for p in pts], path)
        return PointLayer(tuple(pts), service, path.stem)

    _check_kinds(features, ("Polygon", "MultiPolygon"), expected_kind)
    if expected_kind == "polygons":
        parts = [p for i, f in enumerate(features) for p in _polygons(_geometry(f, i), i)]
        mp = MultiPolygon(tuple(parts))
        _warn_geographic(*_xy(mp), path)
        if parts:
            try:
                validate(mp)
            except ValidationError:
                log.warning("%s: features overlap; dissolving them into one region", path)
                mp = boolops.union_all([MultiPolygon((p,)) for p in parts])
        return mp

    districts = []
    for i, f in enumerate(features):
        props = f.get("properties") or {}
        name = props.get("name")
        pop = props.get("population")
        if not isinstance(name, str) or not name:
            raise ValidationError(f"feature {i}: district needs a 'name' property")
        if isinstance(pop, bool) or not isinstance(pop, (int, float)) or not math.isfinite(pop) or pop < 0:
            raise ValidationError(f"feature {i}: district {name!r} needs a non-negative 'population' property")
        districts.append(District(name, MultiPolygon(tuple(_polygons(_geometry(f, i), i))), float(pop)))
    if districts:
        _warn_geographic(*_xy(MultiPolygon(tuple(p for d in districts for p in d.geometry.parts))), path)
    return districts


def _xy(mp: MultiPolygon):
    xs = [v.x for p in mp.parts for v in p.exterior.vertices]
    ys = [v.y for p in mp.parts for v in p.exterior.vertices]
    return xs, ys


# -- writing ---------------------------------------------------------------


def _c(v: float) -> float:
    r = round(float(v), COORD_DECIMALS)
    return 0.0 if r == 0 else r


def _ring_coords(ring: Ring) -> list[list[float]]:
    return [[_c(x), _c(y)] for x, y in ring.closed_coords()]


def _polygon_geom(p: Polygon) -> dict:
    return {"type": "Polygon", "coordinates": [_ring_coords(r) for r in p.rings()]}


def _multipolygon_geom(mp: MultiPolygon) -> dict:
    return {"type": "MultiPolygon", "coordinates": [[_ring_coords(r) for r in p.rings()] for p in mp.parts]}


def _feature(geometry: dict, properties: dict | None = None) -> dict:
    return {"type": "Feature", "properties": properties or {}, "geometry": geometry}


def layer_features(layer) -> list[dict]:
    if isinstance(layer, (Polygon, MultiPolygon)):
        return [_feature(_polygon_geom(p)) for p in as_multipolygon(layer).parts]
    if isinstance(layer, PointLayer):
        props = {"service": layer.service} if layer.service else {}
        return [_feature({"type": "Point", "coordinates": [_c(p.x), _c(p.y)]}, props) for p in layer.points]
    items = list(layer)
    if all(isinstance(d, District) for d in items):
        return [_feature(_multipolygon_geom(d.geometry), {"name": d.name, "population": int(d.population) if d.population.is_integer() else d.population}) for d in items]
    if all(isinstance(c, CatchmentCell) for c in items):
        return [
            _feature(
                _multipolygon_geom(c.cell),
                {
                    "site_index": c.site_index,
                    "area_km2": None if c.area is None else round(c.area, 6),
                    "coverage_km": None if c.coverage_distance is None else round(c.coverage_distance, 6),
                },
            )
            for c in items
            if not c.cell.is_empty
        ]
    raise TypeError(f"cannot write layer of type {type(layer).__name__}")


def write_text(path: str | Path, text: str) -> Path:
    """Atomically replace ``path`` with ``text`` (UTF-8)."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except OSError as exc:
        raise LayerIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_layer(layer, path: str | Path) -> Path:
    """Write a geometry layer as a FeatureCollection with millimetre coordinates."""
    doc = {"type": "FeatureCollection", "features": layer_features(layer)}
    return write_text(path, json.dumps(doc, separators=(",", ":")) + "\n")


# -- SVG maps --------------------------------------------------------------

VIEWPORT = 1000
MARGIN = 40
COLORS = {
    "border": "#000000",
    "built_up": "#bdbdbd",
    "served": "#4caf50",
    "unserved": "#e53935",
    "sites": "#000000",
}
DENSITY_COLORS = ("#ffffb2", "#fecc5c", "#fd8d3c", "#e31a1c", "#800026")


@dataclass(frozen=True)
class MapTransform:
    """Linear world (m) to page (px) transform with a flipped y axis."""

    x0: float
    y0: float
    scale: float
    ox: float
    oy: float

    @classmethod
    def fit(cls, extent: tuple[float, float, float, float], size: int = VIEWPORT, margin: int = MARGIN) -> "MapTransform":
        x0, y0, x1, y1 = extent
        w = max(x1 - x0, 1e-9)
        h = max(y1 - y0, 1e-9)
        avail = size - 2 * margin
        scale = min(avail / w, avail / h)
        ox = margin + (avail - w * scale) / 2
        oy = margin + (avail - h * scale) / 2
        return cls(x0, y1, scale, ox, oy)

    def page(self, x: float, y: float) -> tuple[float, float]:
        return self.ox + (x - self.x0) * self.scale, self.oy + (self.y0 - y) * self.scale


def nice_length(target_m: float) -> float:
    """Largest 1/2/5 x 10^k length not above ``target_m``."""
    exp = math.floor(math.log10(target_m))
    for m in (5, 2, 1):
        if m * 10**exp <= target_m:
            return float(m * 10**exp)
    return float(10 ** (exp - 1) * 5)


def scale_bar(t: MapTransform, extent_width_m: float) -> tuple[float, float, str]:
    """(length in m, length in px, label) for a bar about a quarter of the map wide."""
    length = nice_length(extent_width_m / 4)
    label = f"{length / 1000:g} km" if length >= 1000 else f"{length:g} m"
    return length, length * t.scale, label


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _path_d(g: Areal, t: MapTransform) -> str:
    out = []
    for poly in as_multipolygon(g).parts:
        for ring in poly.rings():
            pts = [t.page(x, y) for x, y in ring.vertices]
            out.append("M" + " L".join(f"{_f(x)},{_f(y)}" for x, y in pts) + " Z")
    return " ".join(out)


def _svg_head(title: str | None) -> list[str]:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{VIEWPORT}" height="{VIEWPORT}" '
        f'viewBox="0 0 {VIEWPORT} {VIEWPORT}" preserveAspectRatio="xMidYMid meet">',
        f'<rect x="0" y="0" width="{VIEWPORT}" height="{VIEWPORT}" fill="#ffffff"/>',
    ]
    if title:
        lines.append(f'<text x="{MARGIN}" y="{MARGIN - 14}" font-family="sans-serif" font-size="18">{escape(title)}</text>')
    return lines


def _legend(entries: list[tuple[str, str]]) -> list[str]:
    x = VIEWPORT - MARGIN - 170
    y = VIEWPORT - MARGIN - 22 * len(entries)
    out = ['<g id="legend" font-family="sans-serif" font-size="13">']
    for k, (color, label) in enumerate(entries):
        yy = y + 22 * k
        out.append(f'<rect x="{x}" y="{yy}" width="16" height="14" fill="{color}" stroke="#333333" stroke-width="0.5"/>')
        out.append(f'<text x="{x + 22}" y="{yy + 12}">{escape(label)}</text>')
    out.append("</g>")
    return out


def _scale_bar_svg(t: MapTransform, width_m: float) -> list[str]:
    _, px, label = scale_bar(t, width_m)
    x, y = MARGIN, VIEWPORT - MARGIN + 16
    return [
        '<g id="scale-bar" font-family="sans-serif" font-size="12">',
        f'<rect x="{x}" y="{y}" width="{_f(px)}" height="6" fill="#000000"/>',
        f'<text x="{x}" y="{y - 4}">{escape(label)}</text>',
        "</g>",
    ]


def _sites_svg(sites, t: MapTransform) -> list[str]:
    out = ['<g id="sites" fill="#000000">']
    for p in sites or ():
        x, y = t.page(p[0], p[1])
        out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3"/>')
    out.append("</g>")
    return out


def render_map(
    border: Areal,
    built_up: Areal,
    served: Areal,
    unserved: Areal,
    sites,
    out_path: str | Path | None = None,
    *,
    title: str | None = None,
) -> str:
    """Coverage map as deterministic SVG text, optionally written to ``out_path``."""
    border = as_multipolygon(border)
    if border.is_empty:
        raise ParameterError("cannot render a map without a border")
    extent = bounds(border)
    t = MapTransform.fit(extent)
    lines = _svg_head(title)
    lines.append(f'<path id="border" d="{_path_d(border, t)}" fill="none" stroke="{COLORS["border"]}" stroke-width="1.5"/>')
    legend = [(COLORS["built_up"], "Built-up area")]
    for key, geom, label in (("built_up", built_up, None), ("served", served, "Served"), ("unserved", unserved, "Unserved")):
        geom = as_multipolygon(geom)
        if geom.is_empty:
            continue
        lines.append(f'<path id="{key}" d="{_path_d(geom, t)}" fill="{COLORS[key]}" fill-rule="evenodd" stroke="none"/>')
        if label:
            legend.append((COLORS[key], label))
    lines += _sites_svg(sites, t)
    legend.append((COLORS["sites"], "Facility"))
    lines += _legend(legend)
    lines += _scale_bar_svg(t, extent[2] - extent[0])
    lines.append("</svg>")
    svg = "\n".join(lines) + "\n"
    if out_path is not None:
        write_text(out_path, svg)
    return svg


def render_density_map(
    grid: DensityGrid,
    border: Areal,
    sites=(),
    out_path: str | Path | None = None,
    *,
    breaks: Sequence[float] = DEFAULT_BREAKS,
    title: str | None = None,
) -> str:
    """Heat map: classed density cells under the border outline."""
    border = as_multipolygon(border)
    if border.is_empty:
        raise ParameterError("cannot render a map without a border")
    extent = bounds(border)
    t = MapTransform.fit(extent)
    classes = classify_density(grid, breaks)
    lines = _svg_head(title)
    lines.append('<g id="density" stroke="none">')
    side = grid.cell_size * t.scale
    for j in range(grid.height):
        for i in range(grid.width):
            k = int(classes[j, i])
            if k < 0:
                continue
            x, y = t.page(grid.origin[0] + i * grid.cell_size, grid.origin[1] + (j + 1) * grid.cell_size)
            color = DENSITY_COLORS[min(k, len(DENSITY_COLORS) - 1)]
            lines.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(side)}" height="{_f(side)}" fill="{color}"/>')
    lines.append("</g>")
    lines.append(f'<path id="border" d="{_path_d(border, t)}" fill="none" stroke="{COLORS["border"]}" stroke-width="1.5"/>')
    lines += _sites_svg(sites, t)
    edges = [None, *breaks, None]
    legend = []
    for k in range(len(breaks) + 1):
        lo, hi = edges[k], edges[k + 1]
        label = f"< {hi:g}" if lo is None else (f">= {lo:g}" if hi is None else f"{lo:g} - {hi:g}")
        legend.append((DENSITY_COLORS[min(k, len(DENSITY_COLORS) - 1)], f"{label} services/km²"))
    lines += _legend(legend)
    lines += _scale_bar_svg(t, extent[2] - extent[0])
    lines.append("</svg>")
    svg = "\n".join(lines) + "\n"
    if out_path is not None:
        write_text(out_path, svg)
    return svg
