import json
import logging
import math
import os
import re

import numpy as np
import pytest

from urbanreach.coverage import District
from urbanreach.density import kde_grid
from urbanreach.errors import KindMismatchError, LayerIOError, ParameterError, ParseError, ValidationError
from urbanreach.geoio import MapTransform, read_layer, render_density_map, render_map, scale_bar, write_layer, write_text
from urbanreach.geom import EMPTY, MultiPolygon, Point, PointLayer, Polygon, Ring, box, polygon_area
from urbanreach.voronoi import voronoi_cells

KM = 1000.0
X0, Y0 = 440000.0, 2890000.0


def fc(*geoms, props=None):
    return {"type": "FeatureCollection",
            "features": [{"type": "Feature", "properties": (props or [{}] * len(geoms))[i], "geometry": g} for i, g in enumerate(geoms)]}


def dump(tmp_path, doc, name="layer.geojson"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


def sq(x0, y0, s, cw=False):
    ring = [[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s], [x0, y0]]
    return ring[::-1] if cw else ring


def test_read_points(tmp_path):
    doc = fc(*[{"type": "Point", "coordinates": [X0 + i, Y0 + i]} for i in range(5)])
    layer = read_layer(dump(tmp_path, doc), "points", service="KG")
    assert len(layer) == 5 and layer.service == "KG"


def test_clockwise_exterior_reoriented(tmp_path):
    doc = fc({"type": "Polygon", "coordinates": [sq(X0, Y0, KM, cw=True)]})
    mp = read_layer(dump(tmp_path, doc), "polygons")
    assert mp.parts[0].exterior.is_ccw
    assert polygon_area(mp) == pytest.approx(1.0)


def test_duplicate_vertices_cleaned(tmp_path):
    ring = sq(X0, Y0, KM)
    ring.insert(1, [X0 + 1e-9, Y0])
    mp = read_layer(dump(tmp_path, fc({"type": "Polygon", "coordinates": [ring]})), "polygons")
    assert len(mp.parts[0].exterior.vertices) == 4


def test_missing_file(tmp_path):
    with pytest.raises(LayerIOError):
        read_layer(tmp_path / "nope.geojson", "points")


def test_malformed_json_offset(tmp_path):
    text = '{"type": "FeatureCollection", "features": [ nope ]}'
    with pytest.raises(ParseError) as info:
        read_layer(dump(tmp_path, text), "points")
    assert info.value.offset == text.index("nope")


def test_kind_mismatch_lists_indices(tmp_path):
    doc = fc({"type": "Point", "coordinates": [X0, Y0]}, {"type": "Polygon", "coordinates": [sq(X0, Y0, 10)]},
             {"type": "Point", "coordinates": [X0, Y0]}, {"type": "Polygon", "coordinates": [sq(X0, Y0, 10)]})
    with pytest.raises(KindMismatchError) as info:
        read_layer(dump(tmp_path, doc), "points")
    assert info.value.indices == [1, 3]


def test_unclosed_and_self_intersecting_rings(tmp_path):
    ring = sq(X0, Y0, KM)[:-1]
    with pytest.raises(ValidationError, match="feature 0"):
        read_layer(dump(tmp_path, fc({"type": "Polygon", "coordinates": [ring]})), "polygons")
    bow = [[X0, Y0], [X0 + KM, Y0 + KM], [X0 + KM, Y0], [X0, Y0 + 2 * KM], [X0, Y0]]
    doc = fc({"type": "Polygon", "coordinates": [sq(X0, Y0, 5)]}, {"type": "Polygon", "coordinates": [bow]})
    with pytest.raises(ValidationError, match="feature 1"):
        read_layer(dump(tmp_path, doc), "polygons")


def test_hole_outside_exterior_rejected(tmp_path):
    doc = fc({"type": "Polygon", "coordinates": [sq(X0, Y0, KM), sq(X0 + 2 * KM, Y0, 100)]})
    with pytest.raises(ValidationError):
        read_layer(dump(tmp_path, doc), "polygons")


def test_district_properties(tmp_path):
    geom = {"type": "Polygon", "coordinates": [sq(X0, Y0, KM)]}
    ok = read_layer(dump(tmp_path, fc(geom, props=[{"name": "A", "population": 120}])), "districts")
    assert ok[0].name == "A" and ok[0].population == 120
    with pytest.raises(ValidationError, match="population"):
        read_layer(dump(tmp_path, fc(geom, props=[{"name": "A"}])), "districts")
    with pytest.raises(ValidationError, match="name"):
        read_layer(dump(tmp_path, fc(geom, props=[{"population": 5}])), "districts")


def test_geographic_warning(tmp_path, caplog):
    doc = fc({"type": "Point", "coordinates": [32.7, 26.1]}, {"type": "Point", "coordinates": [32.8, 26.2]})
    with caplog.at_level(logging.WARNING):
        read_layer(dump(tmp_path, doc), "points")
    assert "longitude/latitude" in caplog.text


def test_overlapping_features_dissolved(tmp_path, caplog):
    doc = fc({"type": "Polygon", "coordinates": [sq(X0, Y0, KM)]}, {"type": "Polygon", "coordinates": [sq(X0 + 500, Y0, KM)]})
    with caplog.at_level(logging.WARNING):
        mp = read_layer(dump(tmp_path, doc), "polygons")
    assert polygon_area(mp) == pytest.approx(1.5)
    assert "overlap" in caplog.text


def test_empty_multipolygon_writes_zero_features(tmp_path):
    p = write_layer(EMPTY, tmp_path / "empty.geojson")
    assert json.loads(p.read_text())["features"] == []
    assert read_layer(p, "polygons").is_empty


def test_write_read_round_trip_and_stability(tmp_path):
    cells = voronoi_cells([Point(X0 + 300.123, Y0 + 400.456), Point(X0 + 800.5, Y0 + 650.25)], box(X0, Y0, X0 + KM, Y0 + KM))
    p1 = write_layer(cells, tmp_path / "a.geojson")
    back = read_layer(p1, "polygons")
    assert len(json.loads(p1.read_text())["features"]) == 2
    assert polygon_area(back) == pytest.approx(1.0, rel=1e-9)
    p2 = write_layer(back, tmp_path / "b.geojson")
    p3 = write_layer(read_layer(p2, "polygons"), tmp_path / "c.geojson")
    assert p2.read_bytes() == p3.read_bytes()


def test_big_polygon_round_trip(tmp_path):
    n = 10_000
    theta = np.linspace(0, 2 * math.pi, n, endpoint=False)
    r = 3000 + 400 * np.sin(7 * theta)
    # millimetre-quantized input so writing at 3 decimals is lossless
    ring = Ring(tuple((round(X0 + q * math.cos(a), 3), round(Y0 + q * math.sin(a), 3)) for a, q in zip(theta, r)))
    mp = MultiPolygon((Polygon(ring),))
    back = read_layer(write_layer(mp, tmp_path / "big.geojson"), "polygons")
    assert polygon_area(back) == pytest.approx(polygon_area(mp), rel=1e-9)
    assert len(back.parts[0].exterior.vertices) == n


def test_districts_and_points_round_trip(tmp_path):
    ds = [District("A", box(X0, Y0, X0 + KM, Y0 + KM), 10), District("B", box(X0 + KM, Y0, X0 + 2 * KM, Y0 + KM), 20.5)]
    back = read_layer(write_layer(ds, tmp_path / "d.geojson"), "districts")
    assert [(d.name, d.population) for d in back] == [("A", 10), ("B", 20.5)]
    layer = PointLayer((Point(X0 + 1.2345, Y0),), "FIRE")
    assert read_layer(write_layer(layer, tmp_path / "p.geojson"), "points").points == (Point(round(X0 + 1.2345, 3), Y0),)


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(LayerIOError):
        write_text(blocker / "sub" / "out.txt", "hi")
    with pytest.raises(LayerIOError):
        write_layer(EMPTY, blocker / "out.geojson")


def test_written_files_world_readable(tmp_path):
    p = write_text(tmp_path / "x.txt", "hello")
    assert os.stat(p).st_mode & 0o777 == 0o644


BORDER = box(X0, Y0, X0 + 6 * KM, Y0 + 4 * KM)
BUILT = box(X0 + KM, Y0 + KM, X0 + 5 * KM, Y0 + 3 * KM)


def test_render_map_deterministic(tmp_path):
    args = (BORDER, BUILT, box(X0 + KM, Y0 + KM, X0 + 3 * KM, Y0 + 3 * KM), box(X0 + 3 * KM, Y0 + KM, X0 + 5 * KM, Y0 + 3 * KM),
            [Point(X0 + 2 * KM, Y0 + 2 * KM)])
    a = render_map(*args, tmp_path / "a.svg", title="KG")
    b = render_map(*args, tmp_path / "b.svg", title="KG")
    assert a == b and (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    order = [a.index(f'id="{k}"') for k in ("border", "built_up", "served", "unserved", "sites")]
    assert order == sorted(order)
    assert 'width="1000"' in a and "Served" in a and "Unserved" in a


def test_render_map_without_coverage_layers():
    svg = render_map(BORDER, BUILT, EMPTY, EMPTY, [])
    assert 'id="served"' not in svg and 'id="unserved"' not in svg
    assert 'id="built_up"' in svg


def test_render_map_empty_border():
    with pytest.raises(ParameterError):
        render_map(EMPTY, BUILT, EMPTY, EMPTY, [])


def test_scale_bar_matches_transform():
    t = MapTransform.fit((X0, Y0, X0 + 6 * KM, Y0 + 4 * KM))
    length, px, label = scale_bar(t, 6 * KM)
    assert (length, label) == (1000.0, "1 km")
    (ax, _), (bx, _) = t.page(X0, Y0), t.page(X0 + KM, Y0)
    assert px == pytest.approx(bx - ax, rel=0.005)
    assert px == pytest.approx(1000 * (1000 - 2 * 40) / (6 * KM), rel=0.005)


def test_scale_bar_drawn_with_transform_length():
    svg = render_map(BORDER, BUILT, EMPTY, EMPTY, [])
    t = MapTransform.fit((X0, Y0, X0 + 6 * KM, Y0 + 4 * KM))
    widths = [float(w) for w in re.findall(r'id="scale-bar"[^>]*>\s*<rect[^>]*width="([\d.]+)"', svg)]
    assert widths and widths[0] == pytest.approx(KM * t.scale, rel=0.005)


def test_density_map(tmp_path):
    g = kde_grid([Point(X0 + 3 * KM, Y0 + 2 * KM)], BORDER, 100, 800)
    a = render_density_map(g, BORDER, [Point(X0 + 3 * KM, Y0 + 2 * KM)], tmp_path / "h.svg", title="heat")
    assert a == (tmp_path / "h.svg").read_text()
    assert a.count("<rect") >= g.width * g.height
    assert "&gt;= 45" in a and "&lt; 5" in a
