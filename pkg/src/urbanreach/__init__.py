"""Voronoi-derived public-service planning standards and coverage evaluation."""

from .boolops import buffer, difference, intersection, union_all
from .coverage import (
    CoverageReport,
    District,
    ParksReport,
    aggregate_coverage,
    evaluate_coverage,
    nearest_neighbor_index,
    parks_assessment,
)
from .density import DensityGrid, classify_density, kde_grid
from .geom import (
    MultiPolygon,
    Point,
    PointLayer,
    Polygon,
    Ring,
    distance,
    max_distance_to_boundary,
    point_in_polygon,
    polygon_area,
)
from .geoio import read_layer, render_map, write_layer
from .pipeline import RunConfig, RunReport, run_batch
from .standards import PlanningStandard, ServiceCode, StandardsTable, derive_standard, fixed_standards
from .voronoi import CatchmentCell, Triangulation, catchment_metrics, delaunay, voronoi_cells

__version__ = "0.1.0"

__all__ = [
    "CatchmentCell",
    "CoverageReport",
    "DensityGrid",
    "District",
    "MultiPolygon",
    "ParksReport",
    "PlanningStandard",
    "Point",
    "PointLayer",
    "Polygon",
    "Ring",
    "RunConfig",
    "RunReport",
    "ServiceCode",
    "StandardsTable",
    "Triangulation",
    "aggregate_coverage",
    "buffer",
    "catchment_metrics",
    "classify_density",
    "delaunay",
    "derive_standard",
    "difference",
    "distance",
    "evaluate_coverage",
    "fixed_standards",
    "intersection",
    "kde_grid",
    "max_distance_to_boundary",
    "nearest_neighbor_index",
    "parks_assessment",
    "point_in_polygon",
    "polygon_area",
    "read_layer",
    "render_map",
    "run_batch",
    "union_all",
    "voronoi_cells",
    "write_layer",
]
