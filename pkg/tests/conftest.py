import math

import numpy as np
import pytest

from urbanreach.geom import MultiPolygon, Polygon, Ring

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_convex_polygon(rng, n=12, cx=0.0, cy=0.0, r=1000.0) -> Polygon:
    """Convex hull of points on a jittered circle."""
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    radii = r * rng.uniform(0.6, 1.0, n)
    pts = np.column_stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)])
    from scipy.spatial import ConvexHull

    hull = ConvexHull(pts)
    return Polygon(Ring(tuple(map(tuple, pts[hull.vertices]))))


def random_star_polygon(rng, n=16, cx=0.0, cy=0.0, r=1000.0) -> Polygon:
    """Star-shaped (generally non-convex) simple polygon around (cx, cy)."""
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    angles = np.unique(angles)
    radii = r * rng.uniform(0.3, 1.0, len(angles))
    return Polygon(Ring(tuple((cx + q * math.cos(a), cy + q * math.sin(a)) for a, q in zip(angles, radii))))


def sample_inside(rng, g, n, bbox):
    from urbanreach.geom import points_in_polygon

    x0, y0, x1, y1 = bbox
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform((x0, y0), (x1, y1), size=(2 * n, 2))
        keep = points_in_polygon(cand[:, 0], cand[:, 1], g)
        out = np.vstack([out, cand[keep]])
    return out[:n]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_square_km() -> MultiPolygon:
    from urbanreach.geom import box

    return MultiPolygon((box(0, 0, 1000, 1000),))
