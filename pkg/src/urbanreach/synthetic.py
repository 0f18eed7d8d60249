"""Deterministic synthetic city used as the end-to-end fixture.

Five districts carry the populations of Qena's administrative
divisions; everything else (shapes, parks, facility locations) is invented.

    python -m urbanreach.synthetic OUT_DIR
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from . import boolops, geoio
from .coverage import District
from .geom import MultiPolygon, PointLayer, Polygon, Ring, box, points_in_polygon

# projected origin (UTM-like meters)
X0, Y0 = 440000.0, 2890000.0

BORDER_KM = [(0.0, 0.5), (2.0, 0.0), (5.0, 0.3), (6.5, 1.5), (6.2, 4.0), (4.5, 5.2), (2.0, 5.0), (0.3, 3.8), (-0.3, 2.0)]
BUILT_UP_KM = [(0.8, 1.0), (2.5, 0.7), (4.8, 1.0), (5.6, 2.0), (5.3, 3.6), (4.0, 4.4), (2.2, 4.2), (1.0, 3.3), (0.6, 2.0)]
HOLE_KM = [(3.3, 1.9), (3.9, 1.9), (3.9, 2.4), (3.3, 2.4)]
SATELLITE_KM = [(1.2, 4.0), (1.7, 4.0), (1.7, 4.4), (1.2, 4.4)]

# west to east strips: (name, population, east edge km)
DISTRICTS = [
    ("Hajer Qena", 9345, 1.4),
    ("Qesm3rd", 111715, 2.8),
    ("Qesm1st", 36164, 3.9),
    ("Qesm2nd", 33496, 5.0),
    ("Al-Hemadeat", 47335, 7.0),
]

SERVICE_COUNTS = {
    "KG": 45, "PRI": 50, "PRE": 28, "SEC": 14, "AMB": 6,
    "HU": 12, "MOSQ": 120, "CHUR": 9, "POST": 14, "FIRE": 4,
}
MIDTOWN_KM = (3.0, 2.6)


def _m(coords_km):
    return tuple((X0 + x * 1000.0, Y0 + y * 1000.0) for x, y in coords_km)


def border() -> MultiPolygon:
    return MultiPolygon((Polygon(Ring(_m(BORDER_KM))),))


def built_up() -> MultiPolygon:
    main = Polygon(Ring(_m(BUILT_UP_KM)), (Ring(_m(HOLE_KM)),))
    return MultiPolygon((main, Polygon(Ring(_m(SATELLITE_KM)))))


def districts() -> list[District]:
    out, west = [], -1.0
    b = border()
    for name, pop, east in DISTRICTS:
        strip = box(X0 + west * 1000.0, Y0 - 1000.0, X0 + east * 1000.0, Y0 + 6000.0)
        out.append(District(name, boolops.intersection(b, strip), float(pop)))
        west = east
    return out


def _sample(rng, n: int, region: MultiPolygon, midtown_share: float = 0.7, sigma_km: float = 0.7):
    pts = []
    cx, cy = X0 + MIDTOWN_KM[0] * 1000.0, Y0 + MIDTOWN_KM[1] * 1000.0
    while len(pts) < n:
        if rng.random() < midtown_share:
            x, y = rng.normal(cx, sigma_km * 1000.0), rng.normal(cy, sigma_km * 1000.0)
        else:
            x, y = X0 + rng.uniform(-0.3, 6.5) * 1000.0, Y0 + rng.uniform(0.0, 5.2) * 1000.0
        x, y = round(x, 3), round(y, 3)
        if points_in_polygon(x, y, region):
            pts.append((x, y))
    return pts


def parks(rng) -> MultiPolygon:
    region = built_up()
    placed: list[Polygon] = []
    while len(placed) < 16:
        (x, y), = _sample(rng, 1, region, midtown_share=0.3, sigma_km=1.2)
        w, h = rng.uniform(60, 260), rng.uniform(60, 200)
        cand = box(round(x, 3), round(y, 3), round(x + w, 3), round(y + h, 3))
        if boolops.difference(MultiPolygon((cand,)), region).parts:
            continue
        if placed and boolops.intersection(MultiPolygon((cand,)), MultiPolygon(tuple(placed))).parts:
            continue
        placed.append(cand)
    return MultiPolygon(tuple(placed))


def build_city(out_dir: str | Path, seed: int = 2021) -> dict[str, Path]:
    """Write border, built-up, districts, parks and ten service layers under ``out_dir``."""
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    paths = {
        "border": geoio.write_layer(border(), out / "border.geojson"),
        "built_up": geoio.write_layer(built_up(), out / "built_up.geojson"),
        "districts": geoio.write_layer(districts(), out / "districts.geojson"),
        "parks": geoio.write_layer(parks(rng), out / "parks.geojson"),
    }
    region = built_up()
    for code, n in SERVICE_COUNTS.items():
        layer = PointLayer(tuple(_sample(rng, n, region)), code, f"{code}_synthetic")
        paths[code] = geoio.write_layer(layer, out / "services" / f"{code}_synthetic.geojson")
    return paths


def bundled_city() -> Path:
    """Folder of the pre-generated copy shipped with the package."""
    return Path(__file__).parent / "data" / "synthetic_city"


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit("usage: python -m urbanreach.synthetic OUT_DIR")
    for name, path in build_city(sys.argv[1]).items():
        print(f"{name}: {path}")
