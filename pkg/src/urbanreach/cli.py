"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .density import DEFAULT_BANDWIDTH, DEFAULT_CELL_SIZE
from .errors import UrbanReachError, UsageError, ValidationError
from .pipeline import MODES, RunConfig, run_batch
from .standards import ServiceCode

WORKSPACE_ENV = "URBANREACH_WORKSPACE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    codes = ", ".join(c.value for c in ServiceCode)
    p = _Parser(
        prog="urbanreach",
        description="Derive service planning standards from Voronoi catchments and evaluate service coverage "
        "of a city's built-up area. Layers are GeoJSON FeatureCollections in planar meters.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--city-name", help="optional prefix for every output file")
    p.add_argument("--mode", choices=MODES, default="full", help="what to run")
    src = p.add_argument_group("service layers (exactly one of --points / --services-dir)")
    src.add_argument("--points", type=Path, help="a single point layer of one service")
    src.add_argument("--service-code", help=f"service of --points; one of {codes}")
    src.add_argument("--services-dir", type=Path, help="folder of <CODE>_<name>.geojson point layers")
    p.add_argument("--border", type=Path, help="city border polygons (required)")
    p.add_argument("--built-up", type=Path, help="built-up area polygons (required unless --mode derive-standards)")
    p.add_argument("--districts", type=Path, help="district polygons with 'name' and 'population' properties")
    p.add_argument("--parks", type=Path, help="parks and open-space polygons")
    p.add_argument("--city-area-km2", type=float, help="city area override used as the point-pattern study area")
    p.add_argument("--workspace", type=Path, help=f"output folder (default: ${WORKSPACE_ENV})")
    p.add_argument("--standards", type=Path, help="precomputed standards table (JSON); required for --mode evaluate")
    p.add_argument("--cell-size", type=float, default=DEFAULT_CELL_SIZE, help="density grid cell size, m")
    p.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH, help="density kernel bandwidth, m")
    p.add_argument("--buffer-segments", type=int, default=64, help="vertices per buffer circle")
    p.add_argument("--jobs", type=int, default=None, help="worker threads; 1 forces the serial path (default: cores)")
    p.add_argument("--median", action="store_true", help="derive standards from the median coverage distance")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def cli_parse(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    if (args.points is None) == (args.services_dir is None):
        raise UsageError("give exactly one of --points or --services-dir")
    code = None
    if args.service_code is not None:
        code = ServiceCode.parse(args.service_code)
    if args.points is not None and code is None:
        raise UsageError("--points needs --service-code")
    if args.services_dir is not None and code is not None:
        raise UsageError("--service-code only applies to --points")
    if args.border is None:
        raise UsageError("--border is required")
    if args.mode != "derive-standards" and args.built_up is None:
        raise UsageError(f"--built-up is required in {args.mode} mode")
    if args.mode == "evaluate" and args.standards is None:
        raise UsageError("--mode evaluate needs --standards")
    workspace = args.workspace
    if workspace is None and os.environ.get(WORKSPACE_ENV):
        workspace = Path(os.environ[WORKSPACE_ENV])
    if workspace is None:
        raise UsageError(f"--workspace is required (or set {WORKSPACE_ENV})")
    if args.city_area_km2 is not None and not args.city_area_km2 > 0:
        raise ValidationError("--city-area-km2 must be positive")
    if not args.cell_size > 0 or not args.bandwidth > 0:
        raise ValidationError("--cell-size and --bandwidth must be positive")
    if args.bandwidth < args.cell_size:
        raise ValidationError("--bandwidth must be at least --cell-size")
    if args.buffer_segments < 8:
        raise ValidationError("--buffer-segments must be at least 8")
    if args.jobs is not None and args.jobs < 1:
        raise ValidationError("--jobs must be at least 1")
    return RunConfig(
        workspace=workspace,
        border=args.border,
        built_up=args.built_up,
        mode=args.mode,
        city_name=args.city_name,
        services_dir=args.services_dir,
        points=args.points,
        service_code=code,
        districts=args.districts,
        parks=args.parks,
        city_area_km2=args.city_area_km2,
        standards_path=args.standards,
        cell_size=args.cell_size,
        bandwidth=args.bandwidth,
        buffer_segments=args.buffer_segments,
        jobs=args.jobs,
        use_median=args.median,
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    verbose = "-v" in argv or "--verbose" in argv
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = cli_parse(argv)
        report = run_batch(config)
    except UrbanReachError as exc:
        print(f"urbanreach: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for line in report.lines():
        print(line)
    if report.errors and not any(k != "general" for k in report.manifest):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
