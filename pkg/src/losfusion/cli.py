"""Command-line entry point: ``losfusion {fuse,synth,validate,geom,resample}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bay_area
from .errors import ConfigError, FusionError
from .geometry import SensorGeometry
from .io import (
    load_config,
    read_gnss,
    read_los,
    read_velocity,
    run_pipeline,
    write_grid,
    write_resampled,
    write_scene,
    write_validation,
)
from .pipeline import stack_inputs, union_grid_from_series
from .synth import Scenario, compare_runs, invert_2d_batch, simulate_scene
from .timegrid import VARIANCE_MODES, resample_dataset
from .validation import validate_velocities

log = logging.getLogger("losfusion")


def _abs(p: str | None) -> str | None:
    return None if p is None else str(Path(p).resolve())


def cmd_fuse(args: argparse.Namespace) -> int:
    overrides = {
        "output_dir": _abs(args.output_dir),
        "q_z": args.q_z,
        "scale_km": args.scale_km,
        "variance_mode": args.variance_mode,
        "reference_station": args.reference_station,
        "radius_m": args.radius_m,
        "seed": args.seed,
        "workers": args.workers,
        "trajectory_format": args.trajectory_format,
    }
    config = load_config(args.config, overrides)
    result = run_pipeline(config)
    print(f"fused {len(result.pixel_ids)} pixels over {len(result.grid)} epochs -> {config.path(config.output_dir)}")
    if result.validation is not None:
        print(result.validation.summary(), end="")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        data = json.loads(Path(args.scenario).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {args.scenario}: {exc}") from exc
    if args.seed is not None:
        data["seed"] = args.seed
    if args.n_pixels is not None:
        data["n_pixels"] = args.n_pixels
    scenario = Scenario.from_dict(data)
    scene = simulate_scene(scenario)
    out = Path(args.out)
    config = write_scene(scene, scenario, out)
    print(f"wrote synthetic dataset ({scenario.n_pixels} pixels, {len(scene.grid)} epochs) to {out}")
    if args.no_fuse:
        return 0

    result = run_pipeline(config)
    dl, var, avail = stack_inputs(result.resampled, result.sensors, result.pixel_ids, len(result.grid))
    C = np.vstack([scene.geometries[s].c for s in result.sensors])
    baseline = invert_2d_batch(C, dl, var, avail)
    report = compare_runs(scene.truth, result.X, baseline)
    table = report.to_table()
    (out / "comparison.csv").write_text(table)
    print(table, end="")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    _, lon, lat, v = read_velocity(args.velocity)
    stations = read_gnss(args.gnss)
    checks = [s for s in stations if s.role == "check"] if not args.all_stations else stations
    report = validate_velocities(lon, lat, v, checks, args.radius_m)
    out = Path(args.out) if args.out else Path(args.velocity).parent
    out.mkdir(parents=True, exist_ok=True)
    write_validation(out, report)
    print(report.summary(), end="")
    return 0


def cmd_geom(args: argparse.Namespace) -> int:
    if args.incidence is not None or args.heading is not None:
        if args.incidence is None or args.heading is None:
            raise ConfigError("--incidence and --heading must be given together")
        geoms = [SensorGeometry(args.sensor_id, args.incidence, args.heading, args.look_side)]
    elif args.config:
        geoms = [s.geometry for s in load_config(args.config).sensors]
    else:
        geoms = list(bay_area.GEOMETRIES.values())
    print("sensor_id,incidence_deg,heading_deg,look_side,c_east,c_north,c_up")
    for g in geoms:
        cx, cy, cz = g.unit_vector
        print(f"{g.sensor_id},{g.incidence_deg:g},{g.heading_deg:g},{g.look_side},{cx:.6f},{cy:.6f},{cz:.6f}")
    return 0


def cmd_resample(args: argparse.Namespace) -> int:
    los = {}
    for item in args.los:
        sensor, _, path = item.rpartition("=")
        series, _ = read_los(path, sensor or None)
        los[sensor or Path(path).stem] = series
    grid = union_grid_from_series(los)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_grid(out / "grid.csv", grid)
    failed = 0
    for sensor, series in sorted(los.items()):
        res = resample_dataset(series, grid, args.variance_mode)
        write_resampled(out / f"resampled_{sensor}.csv", grid, res.series)
        for pid, msg in sorted(res.errors.items()):
            print(f"{sensor}: skipped pixel {pid}: {msg}", file=sys.stderr)
        failed += len(res.errors)
    print(f"resampled {len(los)} sensor(s) onto {len(grid)} epochs -> {out}")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="losfusion", description="Fuse multi-geometry InSAR LOS time series with GNSS horizontal velocities.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="run the fusion pipeline from a JSON config")
    p.add_argument("config", help="run configuration (JSON)")
    p.add_argument("--output-dir")
    p.add_argument("--q-z", type=float, help="vertical random-walk density, mm^2/yr")
    p.add_argument("--scale-km", type=float, help="variance inflation distance S, km")
    p.add_argument("--variance-mode", choices=VARIANCE_MODES)
    p.add_argument("--reference-station")
    p.add_argument("--radius-m", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default: $LOSFUSION_WORKERS or 1)")
    p.add_argument("--trajectory-format", choices=("long-table", "per-epoch-raster"))
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("synth", help="simulate a scene, fuse it and compare with the east/up baseline")
    p.add_argument("scenario", help="scenario description (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-pixels", type=int)
    p.add_argument("--no-fuse", action="store_true", help="only write the synthetic inputs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="compare a velocity map with GNSS check stations")
    p.add_argument("velocity", help="velocity.csv written by 'fuse'")
    p.add_argument("gnss", help="GNSS table")
    p.add_argument("--radius-m", type=float, default=200.0)
    p.add_argument("--all-stations", action="store_true", help="use tie stations as well as check stations")
    p.add_argument("--out", help="report directory (default: next to the velocity file)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("geom", help="print LOS unit vectors")
    p.add_argument("--incidence", type=float)
    p.add_argument("--heading", type=float)
    p.add_argument("--look-side", choices=("right", "left"), default="right")
    p.add_argument("--sensor-id", default="sensor")
    p.add_argument("--config", help="print the geometries of a run configuration")
    p.set_defaults(func=cmd_geom)

    p = sub.add_parser("resample", help="resample LOS files onto their union time grid")
    p.add_argument("los", nargs="+", help="LOS file, optionally prefixed 'sensor_id='")
    p.add_argument("--out", required=True)
    p.add_argument("--variance-mode", choices=VARIANCE_MODES, default="paper")
    p.set_defaults(func=cmd_resample)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FusionError as exc:
        print(f"losfusion {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
