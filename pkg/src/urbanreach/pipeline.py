"""Batch analysis over a folder of service layers.

For every layer the service code is read from the filename prefix
(``<CODE>_anything.geojson``); the matching standard is derived or looked up,
coverage is evaluated and every artifact is written under the workspace as
``<city>_<CODE>_<artifact>.<ext>``. A failing layer is reported and skipped;
the remaining layers still complete.
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import geoio
from .coverage import (
    CoverageReport,
    District,
    ParksReport,
    aggregate_coverage,
    evaluate_coverage,
    nearest_neighbor_index,
    parks_assessment,
    parks_by_district,
)
from .density import DEFAULT_BANDWIDTH, DEFAULT_CELL_SIZE, kde_grid
from .errors import ConfigError, UrbanReachError
from .geom import MultiPolygon, Point, polygon_area
from .standards import PlanningStandard, ServiceCode, StandardsTable, derive_standard, fixed_standards
from .voronoi import voronoi_cells

log = logging.getLogger(__name__)

MODES = ("derive-standards", "evaluate", "full")
LAYER_PATTERN = "<CODE>_<name>.geojson"


@dataclass
class RunConfig:
    workspace: Path
    border: Path | None = None
    built_up: Path | None = None
    mode: str = "full"
    city_name: str | None = None
    services_dir: Path | None = None
    points: Path | None = None
    service_code: ServiceCode | None = None
    districts: Path | None = None
    parks: Path | None = None
    city_area_km2: float | None = None
    standards_path: Path | None = None
    cell_size: float = DEFAULT_CELL_SIZE
    bandwidth: float = DEFAULT_BANDWIDTH
    buffer_segments: int = 64
    jobs: int | None = None
    use_median: bool = False

    @property
    def prefix(self) -> str:
        return f"{self.city_name}_" if self.city_name else ""


@dataclass
class RunReport:
    city_name: str | None
    mode: str
    steps: list[tuple[str, float]] = field(default_factory=list)
    manifest: dict[str, list[str]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    standards: StandardsTable | None = None
    coverage: dict[str, float] = field(default_factory=dict)
    aggregate: tuple[float, float] | None = None
    elapsed: float = 0.0

    def files(self) -> list[str]:
        return [f for files in self.manifest.values() for f in files]

    def lines(self) -> list[str]:
        out = [f"{label}: {secs:.3f} s" for label, secs in self.steps]
        for name, msg in self.errors.items():
            out.append(f"ERROR {name}: {msg}")
        out.append(f"{len(self.files())} files written in {self.elapsed:.3f} s")
        return out

    def to_json(self) -> str:
        doc = {
            "city_name": self.city_name,
            "mode": self.mode,
            "steps": [{"step": s, "seconds": round(t, 4)} for s, t in self.steps],
            "manifest": self.manifest,
            "errors": self.errors,
            "coverage_pct": {k: round(v, 2) for k, v in self.coverage.items()},
            "aggregate": None if self.aggregate is None else {
                "served_pct": round(self.aggregate[0], 2), "unserved_pct": round(self.aggregate[1], 2)},
            "total_seconds": round(self.elapsed, 4),
        }
        return json.dumps(doc, indent=2) + "\n"


@dataclass
class _Inputs:
    border: MultiPolygon
    built_up: MultiPolygon | None
    districts: list[District]
    parks: MultiPolygon | None
    table: StandardsTable | None
    study_area_km2: float


@dataclass
class _LayerResult:
    code: ServiceCode
    source: str
    outputs: dict[str, str] = field(default_factory=dict)
    steps: list[tuple[str, float]] = field(default_factory=list)
    standard: PlanningStandard | None = None
    provenance: str = ""
    coverage: CoverageReport | None = None
    parks: ParksReport | None = None
    points: tuple[Point, ...] = ()


class _Timer:
    def __init__(self, steps: list, label: str):
        self.steps, self.label = steps, label

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.steps.append((self.label, time.perf_counter() - self.t0))


def service_code_from_filename(path: Path) -> ServiceCode:
    return ServiceCode.parse(path.stem.split("_", 1)[0])


def discover_layers(config: RunConfig) -> tuple[list[tuple[Path, ServiceCode]], dict[str, str]]:
    """Service layers to run plus per-file errors for names that don't parse."""
    if config.points is not None:
        code = config.service_code or service_code_from_filename(config.points)
        return [(config.points, ServiceCode.parse(code))], {}
    folder = config.services_dir
    if folder is None or not folder.is_dir():
        raise ConfigError(f"service folder {folder} does not exist")
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() == ".geojson")
    if not files:
        raise ConfigError(f"no service layers in {folder}; expected files named {LAYER_PATTERN}")
    layers, errors, seen = [], {}, {}
    for p in files:
        try:
            code = service_code_from_filename(p)
        except UrbanReachError as exc:
            errors[p.name] = str(exc)
            continue
        if code in seen:
            errors[p.name] = f"second layer for {code.value} (already {seen[code]})"
            continue
        seen[code] = p.name
        layers.append((p, code))
    return layers, errors


def _load_inputs(config: RunConfig, steps: list) -> _Inputs:
    needs_built = config.mode != "derive-standards"
    if config.border is None:
        raise ConfigError("a city border layer is required")
    if needs_built and config.built_up is None:
        raise ConfigError("a built-up area layer is required")
    with _Timer(steps, "load inputs"):
        border = geoio.read_layer(config.border, "polygons")
        if border.is_empty:
            raise ConfigError(f"border layer {config.border} has no polygons")
        built = geoio.read_layer(config.built_up, "polygons") if config.built_up else None
        if built is not None and built.is_empty:
            raise ConfigError(f"built-up layer {config.built_up} has no polygons")
        districts = geoio.read_layer(config.districts, "districts") if config.districts else []
        parks = geoio.read_layer(config.parks, "polygons") if config.parks else None
        table = StandardsTable.read(config.standards_path) if config.standards_path else None
    if config.mode == "evaluate" and table is None:
        raise ConfigError("evaluate mode needs a standards table (--standards)")
    area = polygon_area(border)
    if config.city_area_km2 is not None:
        log.info("using city area override %.3f km² (computed %.3f km²) for point-pattern statistics", config.city_area_km2, area)
        area = config.city_area_km2
    return _Inputs(border, built, districts, parks, table, area)


def _standard_for(code: ServiceCode, config: RunConfig, inputs: _Inputs, cells) -> tuple[PlanningStandard, str]:
    if config.mode == "evaluate":
        std = inputs.table.get(code)
        if std is not None:
            return std, inputs.table.provenance.get(code, "supplied")
        if code.is_derived:
            raise ConfigError(f"standards table has no entry for {code.value}")
    if code.is_derived:
        return derive_standard(cells, code, use_median=config.use_median), f"derived from {len(cells)} facilities"
    fixed = fixed_standards()
    return fixed.entries[code], fixed.provenance[code]


def _process_parks(path: Path | None, config: RunConfig, inputs: _Inputs) -> _LayerResult:
    res = _LayerResult(ServiceCode.PARK, path.name if path else str(config.parks))
    parks = geoio.read_layer(path, "polygons") if path else inputs.parks
    if not inputs.districts:
        raise ConfigError("parks assessment needs a districts layer with populations")
    std = (inputs.table.get(ServiceCode.PARK) if inputs.table else None) or fixed_standards().entries[ServiceCode.PARK]
    with _Timer(res.steps, "PARK: parks assessment"):
        report = parks_assessment(inputs.districts, parks_by_district(parks, inputs.districts), std.per_capita_m2)
    res.standard, res.parks = std, report
    stem = f"{config.prefix}PARK"
    res.outputs[f"{stem}_parks.csv"] = report.to_csv()
    res.outputs[f"{stem}_parks.json"] = report.to_json()
    return res


def _process_layer(path: Path, code: ServiceCode, config: RunConfig, inputs: _Inputs) -> _LayerResult:
    if code is ServiceCode.PARK:
        return _process_parks(path, config, inputs)
    res = _LayerResult(code, path.name)
    stem = f"{config.prefix}{code.value}"
    with _Timer(res.steps, f"{code.value}: read layer"):
        layer = geoio.read_layer(path, "points", code.value)
    res.points = layer.points

    cells = None
    if code.is_derived and config.mode != "evaluate":
        with _Timer(res.steps, f"{code.value}: voronoi catchments"):
            cells = voronoi_cells(layer, inputs.border)
        res.outputs[f"{stem}_catchments.geojson"] = _layer_text(cells)
    if code.is_derived or config.mode != "derive-standards":
        res.standard, res.provenance = _standard_for(code, config, inputs, cells)
    if config.mode == "derive-standards":
        return res

    with _Timer(res.steps, f"{code.value}: coverage"):
        report = evaluate_coverage(layer, res.standard, inputs.border, inputs.built_up, inputs.districts,
                                   segments_per_circle=config.buffer_segments)
    res.coverage = report
    with _Timer(res.steps, f"{code.value}: point pattern"):
        nni = nearest_neighbor_index(layer, inputs.study_area_km2) if len(layer) >= 2 else None
    doc = json.loads(report.to_json())
    doc["nearest_neighbor_index"] = None if nni is None else {"r": round(nni.r, 4), "pattern": nni.pattern}
    res.outputs[f"{stem}_served.geojson"] = _layer_text(report.served_geometry)
    res.outputs[f"{stem}_unserved.geojson"] = _layer_text(report.unserved_geometry)
    res.outputs[f"{stem}_coverage.csv"] = report.to_csv()
    res.outputs[f"{stem}_coverage.json"] = json.dumps(doc, indent=2) + "\n"
    with _Timer(res.steps, f"{code.value}: map"):
        res.outputs[f"{stem}_map.svg"] = geoio.render_map(
            inputs.border, inputs.built_up, report.served_geometry, report.unserved_geometry, layer.points,
            title=f"{config.city_name or 'City'}: {code.label} coverage at {report.standard_used.max_km:.3f} km",
        )
    return res


def _layer_text(layer) -> str:
    return json.dumps({"type": "FeatureCollection", "features": geoio.layer_features(layer)}, separators=(",", ":")) + "\n"


def _aggregate_texts(results: list[_LayerResult]) -> tuple[str, str, tuple[float, float]]:
    rows, values = [], []
    for r in results:
        if r.coverage is not None:
            rows.append(r.coverage)
            values.append((r.code.value, r.coverage.served_pct))
        elif r.parks is not None:
            rows.append(r.parks)
            values.append((r.code.value, r.parks.totals.pct_of_share))
    agg = aggregate_coverage(rows)
    lines = ["service,served_pct,unserved_pct"]
    lines += [f"{code},{pct:.2f},{100 - pct:.2f}" for code, pct in values]
    lines.append(f"Average,{agg.served_pct:.2f},{agg.unserved_pct:.2f}")
    doc = {
        "services": [{"service": c, "served_pct": round(p, 2), "unserved_pct": round(100 - p, 2)} for c, p in values],
        "average": {"served_pct": round(agg.served_pct, 2), "unserved_pct": round(agg.unserved_pct, 2)},
    }
    return "\n".join(lines) + "\n", json.dumps(doc, indent=2) + "\n", tuple(agg)


def run_batch(config: RunConfig) -> RunReport:
    """Run the whole analysis; fatal configuration problems raise, per-layer ones are reported."""
    t0 = time.perf_counter()
    if config.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    report = RunReport(config.city_name, config.mode)
    workspace = Path(config.workspace)
    try:
        workspace.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"workspace {workspace} is not writable: {exc}") from exc

    inputs = _load_inputs(config, report.steps)
    layers, report.errors = discover_layers(config)
    if config.parks is not None and config.mode != "derive-standards" and not any(c is ServiceCode.PARK for _, c in layers):
        layers.append((None, ServiceCode.PARK))
    if config.mode == "derive-standards":
        layers = [(p, c) for p, c in layers if c.is_derived]

    def work(item):
        path, code = item
        try:
            return _process_layer(path, code, config, inputs) if path else _process_parks(None, config, inputs)
        except UrbanReachError as exc:
            return exc
        except Exception as exc:  # crash isolation: one bad layer must not stop the batch
            log.exception("unexpected failure on %s", path)
            return exc

    jobs = config.jobs or min(len(layers), os.cpu_count() or 1) or 1
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, layers))
    else:
        outcomes = [work(item) for item in layers]

    results: list[_LayerResult] = []
    for (path, code), out in zip(layers, outcomes):
        name = path.name if path else str(config.parks)
        if isinstance(out, Exception):
            report.errors[name] = f"{type(out).__name__}: {out}"
            log.error("%s failed: %s", name, out)
            continue
        results.append(out)
        report.steps.extend(out.steps)
        files = []
        for fname, text in out.outputs.items():
            geoio.write_text(workspace / fname, text)
            files.append(fname)
        report.manifest[code.value] = files
        if out.coverage is not None:
            report.coverage[code.value] = out.coverage.served_pct
        elif out.parks is not None:
            report.coverage[code.value] = out.parks.totals.pct_of_share

    general = []
    if config.mode != "evaluate":
        table = StandardsTable()
        for r in results:
            if r.standard is not None and r.code.is_derived:
                table.add(r.standard, r.provenance)
        table.merge(fixed_standards())
        report.standards = table
        general += [(f"{config.prefix}standards.json", table.to_json()), (f"{config.prefix}standards.csv", table.to_csv())]

    if config.mode != "derive-standards":
        if report.coverage:
            csv_text, json_text, report.aggregate = _aggregate_texts(results)
            general += [(f"{config.prefix}aggregate.csv", csv_text), (f"{config.prefix}aggregate.json", json_text)]
        pooled = [p for r in results for p in r.points]
        if pooled:
            with _Timer(report.steps, "density grid"):
                grid = kde_grid(pooled, inputs.border, config.cell_size, config.bandwidth)
                general.append((f"{config.prefix}density.asc", grid.to_ascii_grid()))
                general.append((f"{config.prefix}density.svg", geoio.render_density_map(
                    grid, inputs.border, pooled, title=f"{config.city_name or 'City'}: services per km²")))

    files = []
    for fname, text in general:
        geoio.write_text(workspace / fname, text)
        files.append(fname)
    run_report_name = f"{config.prefix}run_report.json"
    files.append(run_report_name)
    report.manifest["general"] = files
    report.elapsed = time.perf_counter() - t0
    geoio.write_text(workspace / run_report_name, report.to_json())
    return report
