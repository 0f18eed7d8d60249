import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from urbanreach.density import DensityGrid, classify_density, kde_grid, quartic_kernel
from urbanreach.errors import ParameterError
from urbanreach.geom import MultiPolygon, Point, Polygon, Ring, box

KM = 1000.0


def test_kernel_normalized_numerically():
    from scipy.integrate import quad

    h = 700.0
    mass, _ = quad(lambda r: 2 * math.pi * r * float(quartic_kernel(np.array(r), h)), 0, h)
    assert mass == pytest.approx(1.0, rel=1e-9)
    assert float(quartic_kernel(np.array(0.0), h)) == pytest.approx(3 / (math.pi * h * h))
    assert float(quartic_kernel(np.array(h), h)) == 0.0


def test_empty_layer_zero_grid(caplog):
    with caplog.at_level(logging.WARNING):
        g = kde_grid([], box(0, 0, KM, KM))
    assert g.width == 20 and g.height == 20
    assert np.all(g.values == 0)
    assert "empty" in caplog.text


def test_peak_value():
    # the point sits on a cell centre
    g = kde_grid([Point(525.0, 525.0)], box(0, 0, 2 * KM, 2 * KM), cell_size=50, bandwidth=1000)
    assert np.nanmax(g.values) == pytest.approx(3 / math.pi, rel=1e-12)
    assert 3 / math.pi == pytest.approx(0.955, abs=5e-4)


def test_mass_conservation():
    h = 500.0
    g = kde_grid([Point(2000.0, 2000.0), Point(2300.0, 1800.0)], box(0, 0, 4 * KM, 4 * KM), cell_size=h / 20, bandwidth=h)
    assert g.total_mass() == pytest.approx(2.0, rel=0.01)


def test_masked_cells_hold_no_value():
    tri = MultiPolygon((Polygon(Ring(((0, 0), (KM, 0), (0, KM)))),))
    g = kde_grid([Point(200, 200)], tri, cell_size=50, bandwidth=500)
    assert g.values.shape == (g.height, g.width) and g.values.size == g.width * g.height
    assert np.isnan(g.values[~g.mask]).all()
    assert (g.values[g.mask] >= 0).all()
    assert 150 < g.mask.sum() < 250


def test_parameter_errors():
    for cs, bw in [(0, 500), (50, -1), (100, 50)]:
        with pytest.raises(ParameterError):
            kde_grid([Point(0, 0)], box(0, 0, KM, KM), cell_size=cs, bandwidth=bw)


def test_translation_by_one_cell():
    b = box(0, 0, 3 * KM, 3 * KM)
    pts = [Point(1210.0, 1333.0), Point(1700.0, 900.0)]
    a = kde_grid(pts, b, 50, 400)
    s = kde_grid([Point(x + 50, y) for x, y in pts], box(50, 0, 3 * KM + 50, 3 * KM), 50, 400)
    s2 = kde_grid([Point(x + 50, y) for x, y in pts], b, 50, 400)
    assert np.allclose(a.values, s.values, rtol=1e-12, atol=1e-12)
    assert np.allclose(a.values[:, :-1], s2.values[:, 1:], rtol=1e-9, atol=1e-12)


def test_classes():
    assert classify_density(np.array([4.9, 5.0, 24.99, 25.0, 44.9, 45.0, 1e6])).tolist() == [0, 1, 1, 2, 2, 3, 3]
    assert classify_density(np.array([1.0, 99.0]), []).tolist() == [0, 0]
    assert classify_density(np.array([np.nan, 1.0])).tolist() == [-1, 0]
    with pytest.raises(ParameterError):
        classify_density(np.array([1.0]), [25, 5, 45])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=2, max_size=50))
def test_class_map_monotone(values):
    v = np.sort(np.array(values))
    c = classify_density(v)
    assert np.all(np.diff(c) >= 0)


def test_ascii_grid_layout():
    g = DensityGrid(Point(100.0, 200.0), 50.0, 2, 2, np.array([[1.0, np.nan], [3.0, 4.0]]), np.array([[True, False], [True, True]]))
    lines = g.to_ascii_grid().splitlines()
    assert lines[:6] == ["ncols 2", "nrows 2", "xllcorner 100.000", "yllcorner 200.000", "cellsize 50", "NODATA_value -9999"]
    # north row first
    assert lines[6] == "3.000000 4.000000"
    assert lines[7] == "1.000000 -9999"
