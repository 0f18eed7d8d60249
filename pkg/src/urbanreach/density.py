"""Service density heat map: quartic-kernel KDE on a regular grid."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .geom import M2_PER_KM2, Areal, Point, PointLayer, as_multipolygon, bounds, points_in_polygon

log = logging.getLogger(__name__)

DEFAULT_CELL_SIZE = 50.0
DEFAULT_BANDWIDTH = 500.0
DEFAULT_BREAKS = (5.0, 25.0, 45.0)
NODATA = -9999


@dataclass(frozen=True)
class DensityGrid:
    """Row-major grid; row 0 is the southern row, ``origin`` its lower-left corner.

    ``values`` is services/km², NaN where ``mask`` is False.
    """

    origin: Point
    cell_size: float
    width: int
    height: int
    values: np.ndarray
    mask: np.ndarray

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        return np.meshgrid(xs, ys)

    @property
    def cell_area_km2(self) -> float:
        return self.cell_size**2 / M2_PER_KM2

    def total_mass(self) -> float:
        """Integral of the surface over unmasked cells (number of services)."""
        return float(np.nansum(self.values) * self.cell_area_km2)

    def to_ascii_grid(self) -> str:
        lines = [
            f"ncols {self.width}",
            f"nrows {self.height}",
            f"xllcorner {self.origin[0]:.3f}",
            f"yllcorner {self.origin[1]:.3f}",
            f"cellsize {self.cell_size:g}",
            f"NODATA_value {NODATA}",
        ]
        for row in self.values[::-1]:
            lines.append(" ".join(str(NODATA) if np.isnan(v) else f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"


def quartic_kernel(d: np.ndarray, h: float) -> np.ndarray:
    """Biweight kernel per m², normalized to unit mass over the plane."""
    u2 = (np.asarray(d, dtype=float) / h) ** 2
    return np.where(u2 < 1.0, 3.0 / (math.pi * h * h) * (1.0 - u2) ** 2, 0.0)


def kde_grid(
    layer: PointLayer | Sequence[Point],
    border: Areal,
    cell_size: float = DEFAULT_CELL_SIZE,
    bandwidth: float = DEFAULT_BANDWIDTH,
) -> DensityGrid:
    """Density of facilities (services/km²) at cell centres over the border's extent."""
    if not cell_size > 0 or not bandwidth > 0:
        raise ParameterError("cell_size and bandwidth must be positive")
    if bandwidth < cell_size:
        raise ParameterError(f"bandwidth {bandwidth} m is smaller than cell size {cell_size} m")
    border = as_multipolygon(border)
    x0, y0, x1, y1 = bounds(border)
    width = max(1, math.ceil((x1 - x0) / cell_size))
    height = max(1, math.ceil((y1 - y0) / cell_size))
    grid = DensityGrid(Point(x0, y0), float(cell_size), width, height, np.zeros((height, width)), np.ones((height, width), bool))
    cx, cy = grid.centers()
    mask = points_in_polygon(cx, cy, border)

    pts = np.asarray(list(layer), dtype=float).reshape(-1, 2)
    values = np.zeros((height, width))
    if len(pts) == 0:
        log.warning("density grid over an empty layer is zero everywhere")
    # each point only touches cells within one bandwidth
    for px, py in pts:
        i0 = max(0, int((px - bandwidth - x0) // cell_size))
        i1 = min(width, int((px + bandwidth - x0) // cell_size) + 1)
        j0 = max(0, int((py - bandwidth - y0) // cell_size))
        j1 = min(height, int((py + bandwidth - y0) // cell_size) + 1)
        if i0 >= i1 or j0 >= j1:
            continue
        dx = cx[j0:j1, i0:i1] - px
        dy = cy[j0:j1, i0:i1] - py
        values[j0:j1, i0:i1] += quartic_kernel(np.hypot(dx, dy), bandwidth)
    values *= M2_PER_KM2
    values[~mask] = np.nan
    return DensityGrid(grid.origin, grid.cell_size, width, height, values, mask)


def classify_density(grid: DensityGrid | np.ndarray, breaks: Sequence[float] = DEFAULT_BREAKS) -> np.ndarray:
    """Class index per cell with left-closed classes; masked (NaN) cells get -1.

    Accepts a grid or a bare array of densities.
    """
    b = np.asarray(breaks, dtype=float)
    if len(b) > 1 and not np.all(np.diff(b) > 0):
        raise ParameterError(f"breaks must be strictly increasing, got {list(breaks)}")
    values = np.asarray(grid.values if isinstance(grid, DensityGrid) else grid, dtype=float)
    classes = np.searchsorted(b, np.nan_to_num(values, nan=0.0), side="right")
    classes = classes.astype(int)
    classes[np.isnan(values)] = -1
    return classes
