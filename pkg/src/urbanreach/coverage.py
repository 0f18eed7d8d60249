"""Service coverage of the built-up area, city-wide and per district."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from . import boolops
from .errors import ParameterError, ValidationError, WrongKindError
from .geom import (
    EMPTY,
    M2_PER_KM2,
    M_PER_KM,
    SNAP_TOLERANCE,
    Areal,
    MultiPolygon,
    PointLayer,
    as_multipolygon,
    polygon_area,
)
from .standards import PlanningStandard, ServiceCode

log = logging.getLogger(__name__)

# built-up area allowed outside the border before it is rejected (relative)
CONTAINMENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class District:
    name: str
    geometry: MultiPolygon
    population: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "geometry", as_multipolygon(self.geometry))
        object.__setattr__(self, "population", float(self.population))
        if not self.population >= 0:
            raise ValidationError(f"district {self.name!r}: population must be >= 0")


@dataclass(frozen=True)
class DistrictCoverage:
    name: str
    built_up_km2: float
    served_km2: float
    unserved_km2: float
    served_pct: float
    unserved_pct: float


@dataclass(frozen=True)
class CoverageReport:
    service: ServiceCode
    standard_used: PlanningStandard
    built_up_km2: float
    served_km2: float
    unserved_km2: float
    served_pct: float
    unserved_pct: float
    per_district: tuple[DistrictCoverage, ...]
    served_geometry: MultiPolygon
    unserved_geometry: MultiPolygon

    def rows(self) -> list[dict]:
        head = dict(scope="city", name="", built_up_km2=self.built_up_km2, served_km2=self.served_km2,
                    served_pct=self.served_pct, unserved_km2=self.unserved_km2, unserved_pct=self.unserved_pct)
        rows = [head]
        for d in self.per_district:
            rows.append(dict(scope="district", name=d.name, built_up_km2=d.built_up_km2, served_km2=d.served_km2,
                             served_pct=d.served_pct, unserved_km2=d.unserved_km2, unserved_pct=d.unserved_pct))
        return [_rounded(dict(service=self.service.value, **r)) for r in rows]

    def to_csv(self) -> str:
        return _csv(COVERAGE_COLUMNS, self.rows())

    def to_json(self) -> str:
        doc = {"service": self.service.value, "standard": self.standard_used.to_dict(), "rows": self.rows()}
        return json.dumps(doc, indent=2) + "\n"


COVERAGE_COLUMNS = ["service", "scope", "name", "served_km2", "served_pct", "unserved_km2", "unserved_pct", "built_up_km2"]


def _rounded(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if k == "population" and float(v).is_integer():
            v = int(v)
        elif isinstance(v, float):
            v = round(v, 2) if "pct" in k else round(v, 6)
        out[k] = v
    return out


def _csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def served_percentage(served_km2: float, unserved_km2: float) -> float:
    total = served_km2 + unserved_km2
    if not total > 0:
        raise ParameterError("served + unserved area must be positive")
    return served_km2 / total * 100.0


def evaluate_coverage(
    layer: PointLayer,
    standard: PlanningStandard,
    border: Areal,
    built_up: Areal,
    districts: Sequence[District] = (),
    *,
    segments_per_circle: int = boolops.DEFAULT_SEGMENTS,
) -> CoverageReport:
    """Served/unserved built-up area at the standard's maximum service limit.

    Served = built-up ∩ border ∩ (union of facility buffers); unserved is the
    rest of the built-up area. District percentages are shares of each
    district's own built-up area.
    """
    if not standard.is_distance:
        raise WrongKindError(f"{standard.service.value} is a per-capita standard; use parks_assessment")
    if standard.max_km * M_PER_KM <= SNAP_TOLERANCE:
        raise ParameterError(f"maximum service limit {standard.max_km} km is below the snap tolerance")
    border = as_multipolygon(border)
    built_up = as_multipolygon(built_up)
    built_km2 = polygon_area(built_up)
    if not built_km2 > 0:
        raise ParameterError("built-up area is empty")
    outside = polygon_area(boolops.difference(built_up, border))
    if outside > CONTAINMENT_TOLERANCE * built_km2:
        raise ValidationError(f"built-up area extends {outside:.6f} km² beyond the city border")

    if len(layer) == 0:
        log.warning("%s: empty service layer, nothing is served", standard.service.value)
        served = EMPTY
    else:
        reach = boolops.intersection(border, boolops.buffer(layer, standard.max_km, segments_per_circle))
        served = boolops.intersection(built_up, reach)
    unserved = boolops.difference(built_up, served)

    served_km2 = min(polygon_area(served), built_km2)
    unserved_km2 = built_km2 - served_km2
    served_pct = served_km2 / built_km2 * 100.0

    per_district = []
    for d in districts:
        d_built = polygon_area(boolops.intersection(built_up, d.geometry))
        if d_built > 0:
            d_served = min(polygon_area(boolops.intersection(served, d.geometry)), d_built)
            d_pct = d_served / d_built * 100.0
            per_district.append(DistrictCoverage(d.name, d_built, d_served, d_built - d_served, d_pct, 100.0 - d_pct))
        else:
            log.warning("district %r has no built-up area; percentages reported as 0", d.name)
            per_district.append(DistrictCoverage(d.name, 0.0, 0.0, 0.0, 0.0, 0.0))

    return CoverageReport(
        service=standard.service,
        standard_used=standard,
        built_up_km2=built_km2,
        served_km2=served_km2,
        unserved_km2=unserved_km2,
        served_pct=served_pct,
        unserved_pct=100.0 - served_pct,
        per_district=tuple(per_district),
        served_geometry=served,
        unserved_geometry=unserved,
    )


@dataclass(frozen=True)
class ParksRow:
    name: str
    population: float
    share_km2: float
    parks_km2: float
    pct_of_share: float
    deficiency_km2: float
    deficiency_pct: float


@dataclass(frozen=True)
class ParksReport:
    per_capita_m2: float
    per_district: tuple[ParksRow, ...]
    totals: ParksRow

    def rows(self) -> list[dict]:
        return [_rounded(dict(vars(r))) for r in self.per_district + (self.totals,)]

    def to_csv(self) -> str:
        return _csv(PARKS_COLUMNS, self.rows())

    def to_json(self) -> str:
        return json.dumps({"service": "PARK", "per_capita_m2": self.per_capita_m2, "rows": self.rows()}, indent=2) + "\n"


PARKS_COLUMNS = ["name", "population", "share_km2", "parks_km2", "pct_of_share", "deficiency_km2", "deficiency_pct"]


def _parks_row(name: str, population: float, share: float, parks: float) -> ParksRow:
    if share > 0:
        pct = min(parks / share * 100.0, 100.0)
    else:
        pct = 100.0
    return ParksRow(name, population, share, parks, pct, max(share - parks, 0.0), 100.0 - pct)


def parks_assessment(
    districts: Sequence[District],
    parks: Sequence[Union[Areal, float]],
    per_capita_m2: float = 11.0,
) -> ParksReport:
    """Per-capita park provision against each district's population share.

    ``parks[i]`` is district i's park geometry, or its park area in km².
    Percentages are capped at 100 when parks exceed the share.
    """
    if not per_capita_m2 > 0:
        raise ParameterError("per_capita_m2 must be positive")
    if len(parks) != len(districts):
        raise ParameterError(f"got park entries for {len(parks)} of {len(districts)} districts")
    rows = []
    for d, p in zip(districts, parks):
        parks_km2 = float(p) if isinstance(p, (int, float)) else polygon_area(p)
        share = d.population * per_capita_m2 / M2_PER_KM2
        rows.append(_parks_row(d.name, d.population, share, parks_km2))
    total_share = sum(r.share_km2 for r in rows)
    total_parks = sum(r.parks_km2 for r in rows)
    totals = _parks_row("Total", sum(r.population for r in rows), total_share, total_parks)
    totals = ParksRow(totals.name, totals.population, total_share, total_parks, totals.pct_of_share,
                      sum(r.deficiency_km2 for r in rows), totals.deficiency_pct)
    return ParksReport(per_capita_m2, tuple(rows), totals)


def parks_by_district(parks: Areal, districts: Sequence[District]) -> list[MultiPolygon]:
    return [boolops.intersection(parks, d.geometry) for d in districts]


class Aggregate(NamedTuple):
    served_pct: float
    unserved_pct: float


def aggregate_coverage(rows: Sequence[Union[CoverageReport, ParksReport, float]]) -> Aggregate:
    """Unweighted mean of per-service served percentages."""
    if not rows:
        raise ParameterError("no coverage rows to aggregate")
    values = []
    for r in rows:
        if isinstance(r, CoverageReport):
            values.append(r.served_pct)
        elif isinstance(r, ParksReport):
            values.append(r.totals.pct_of_share)
        else:
            values.append(float(r))
    served = math.fsum(values) / len(values)
    return Aggregate(served, 100.0 - served)


class NNIResult(NamedTuple):
    r: float
    pattern: str


# |R - 1| within this band is called random
RANDOM_BAND = 0.15


def nearest_neighbor_index(layer: PointLayer | np.ndarray, study_area_km2: float) -> NNIResult:
    """Clark-Evans ratio of observed to expected mean nearest-neighbour distance."""
    pts = layer.as_array() if isinstance(layer, PointLayer) else np.asarray(layer, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 2:
        raise ParameterError(f"nearest-neighbour index needs at least 2 points, got {n}")
    if not study_area_km2 > 0:
        raise ParameterError("study area must be positive")
    dist, _ = cKDTree(pts).query(pts, k=2)
    observed = float(dist[:, 1].mean())
    expected = 0.5 * math.sqrt(study_area_km2 * M2_PER_KM2 / n)
    r = observed / expected
    if r < 1.0 - RANDOM_BAND:
        pattern = "clustered"
    elif r > 1.0 + RANDOM_BAND:
        pattern = "dispersed"
    else:
        pattern = "random"
    return NNIResult(r, pattern)
