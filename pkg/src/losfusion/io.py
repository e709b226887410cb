"""Delimited-text readers and writers, run configuration and the on-disk pipeline.

LOS files (one per sensor)::

    pixel_id,lon,lat,date,los_mm,var_mm2

GNSS files::

    station_id,lon,lat,vx_mmyr,vy_mmyr,varx,vary,role

Derived products are written with 6 significant digits; LOS and GNSS writers
use full ``repr`` precision so that a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .geometry import SensorGeometry
from .gnss_field import ROLES, GnssStation, Variogram
from .pipeline import FuseOptions, FusionResult, fuse, stage
from .timegrid import VARIANCE_MODES, LosSeries, TimeGrid, date_from_decimal_year, decimal_year

log = logging.getLogger(__name__)

LOS_COLUMNS = ("pixel_id", "lon", "lat", "date", "los_mm", "var_mm2")
GNSS_COLUMNS = ("station_id", "lon", "lat", "vx_mmyr", "vy_mmyr", "varx", "vary", "role")
COV_ENTRIES = ("pxx", "pxy", "pxz", "pyy", "pyz", "pzz")
_COV_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _rows(path: Path, required: Sequence[str]) -> Iterable[tuple[int, dict]]:
    """Yield ``(line_number, row)`` after checking the header.

    Blank lines and lines starting with ``#`` are skipped; line numbers refer
    to the physical file.
    """
    try:
        with open(path, newline="") as fh:
            lines = [(i, text) for i, text in enumerate(fh, 1) if text.strip() and not text.startswith("#")]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    if not lines:
        raise DataError(f"{path}: empty file")
    parsed = csv.reader(text for _, text in lines)
    header = [h.strip() for h in next(parsed)]
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
    for (line, _), values in zip(lines[1:], parsed):
        if len(values) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(values)}")
        yield line, {k: v.strip() for k, v in zip(header, values)}


def _float(value, path: Path, line: int, column: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"{path}:{line}: column {column!r} is not a number: {value!r}") from None
    if not np.isfinite(out):
        raise DataError(f"{path}:{line}: column {column!r} is not finite")
    return out


def read_los(path: str | Path, sensor_id: str | None = None) -> tuple[dict[str, LosSeries], dict[str, tuple[float, float]]]:
    """Parse a LOS file into ``({pixel_id: LosSeries}, {pixel_id: (lon, lat)})``.

    Rows of one pixel must appear in strictly increasing date order.
    """
    path = Path(path)
    sensor_id = sensor_id or path.stem
    raw: dict[str, list[tuple[float, float, float]]] = {}
    locations: dict[str, tuple[float, float]] = {}
    last_line: dict[str, int] = {}
    for line, row in _rows(path, LOS_COLUMNS):
        pid = row["pixel_id"]
        if not pid:
            raise DataError(f"{path}:{line}: empty pixel_id")
        lon = _float(row["lon"], path, line, "lon")
        lat = _float(row["lat"], path, line, "lat")
        try:
            epoch = decimal_year(row["date"])
        except DataError as exc:
            raise DataError(f"{path}:{line}: {exc}") from None
        dl = _float(row["los_mm"], path, line, "los_mm")
        var = _float(row["var_mm2"], path, line, "var_mm2")
        if var < 0:
            raise DataError(f"{path}:{line}: negative variance {var}")
        samples = raw.setdefault(pid, [])
        if samples and epoch <= samples[-1][0]:
            raise DataError(f"{path}:{line}: pixel {pid} dates not strictly increasing (previous row at line {last_line[pid]})")
        if pid in locations and locations[pid] != (lon, lat):
            raise DataError(f"{path}:{line}: pixel {pid} changes location")
        locations[pid] = (lon, lat)
        samples.append((epoch, dl, var))
        last_line[pid] = line
    if not raw:
        raise DataError(f"{path}: no data rows")
    series = {}
    for pid, samples in raw.items():
        arr = np.array(samples)
        series[pid] = LosSeries(sensor_id, pid, arr[:, 0], arr[:, 1], arr[:, 2])
    return series, locations


def write_los(path: str | Path, series: Mapping[str, LosSeries], locations: Mapping[str, tuple[float, float]]) -> None:
    """Write LOS series at full precision (exact round trip through :func:`read_los`)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOS_COLUMNS)
        for pid in sorted(series):
            s = series[pid]
            lon, lat = locations[pid]
            for t, dl, var in zip(s.epochs, s.dl, s.var):
                w.writerow((pid, repr(float(lon)), repr(float(lat)), date_from_decimal_year(t).strftime("%Y%m%d"), repr(float(dl)), repr(float(var))))


def read_gnss(path: str | Path) -> list[GnssStation]:
    """Parse a GNSS velocity table; roles must be ``tie`` or ``check``."""
    path = Path(path)
    stations: list[GnssStation] = []
    seen: dict[str, int] = {}
    for line, row in _rows(path, GNSS_COLUMNS):
        sid = row["station_id"]
        if not sid:
            raise DataError(f"{path}:{line}: empty station_id")
        if sid in seen:
            raise DataError(f"{path}:{line}: duplicate station id {sid!r} (first at line {seen[sid]})")
        role = row["role"].lower()
        if role not in ROLES:
            raise DataError(f"{path}:{line}: unknown role {row['role']!r}, expected 'tie' or 'check'")
        vals = [_float(row[c], path, line, c) for c in GNSS_COLUMNS[1:7]]
        if vals[4] < 0 or vals[5] < 0:
            raise DataError(f"{path}:{line}: negative velocity variance")
        seen[sid] = line
        stations.append(GnssStation(sid, *vals, role=role))
    if not stations:
        raise DataError(f"{path}: no data rows")
    return stations


def write_gnss(path: str | Path, stations: Sequence[GnssStation]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GNSS_COLUMNS)
        for s in stations:
            w.writerow((s.station_id, repr(s.lon), repr(s.lat), repr(s.vx), repr(s.vy), repr(s.var_x), repr(s.var_y), s.role))


# -- run configuration ------------------------------------------------------


@dataclass
class SensorConfig:
    id: str
    incidence_deg: float
    heading_deg: float
    los_file: Path
    look_side: str = "right"

    @property
    def geometry(self) -> SensorGeometry:
        return SensorGeometry(self.id, self.incidence_deg, self.heading_deg, self.look_side)


@dataclass
class RunConfig:
    """Settings for one ``fuse`` run. Relative paths resolve against ``base_dir``."""

    sensors: list[SensorConfig]
    gnss_file: Path
    output_dir: Path = Path("fusion_out")
    variogram: Variogram = Variogram()
    scale_km: float = 10.0
    q_z: float = 1.0
    variance_mode: str = "paper"
    reference_station: str | None = None
    radius_m: float = 200.0
    seed: int = 0
    tie_stations: list[str] | None = None
    check_stations: list[str] | None = None
    tie_fraction: float | None = None
    workers: int | None = None
    trajectory_format: str = "long-table"
    base_dir: Path = field(default_factory=Path.cwd)

    def path(self, p: Path) -> Path:
        return p if p.is_absolute() else self.base_dir / p

    def validate(self, check_files: bool = True) -> None:
        if not self.sensors:
            raise ConfigError("configuration defines no sensors")
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate sensor ids in {ids}")
        for s in self.sensors:
            try:
                s.geometry
            except DataError as exc:
                raise ConfigError(f"sensor {s.id}: {exc}") from None
        if self.variance_mode not in VARIANCE_MODES:
            raise ConfigError(f"variance_mode must be one of {VARIANCE_MODES}")
        if self.scale_km <= 0 or self.q_z < 0 or self.radius_m <= 0:
            raise ConfigError("scale_km and radius_m must be positive, q_z non-negative")
        if self.tie_fraction is not None and not 0 < self.tie_fraction <= 1:
            raise ConfigError("tie_fraction must lie in (0, 1]")
        if self.trajectory_format not in ("long-table", "per-epoch-raster"):
            raise ConfigError("trajectory_format must be 'long-table' or 'per-epoch-raster'")
        if check_files:
            for p in [s.los_file for s in self.sensors] + [self.gnss_file]:
                if not self.path(p).is_file():
                    raise ConfigError(f"input file not found: {self.path(p)}")

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "RunConfig":
        try:
            sensors = [
                SensorConfig(str(s["id"]), float(s["incidence_deg"]), float(s["heading_deg"]), Path(s["los_file"]), s.get("look_side", "right"))
                for s in data.get("sensors", [])
            ]
            vg = data.get("variogram", {})
            return cls(
                sensors=sensors,
                gnss_file=Path(data["gnss_file"]),
                output_dir=Path(data.get("output_dir", "fusion_out")),
                variogram=Variogram(**vg),
                scale_km=float(data.get("scale_km", 10.0)),
                q_z=float(data.get("q_z", 1.0)),
                variance_mode=data.get("variance_mode", "paper"),
                reference_station=data.get("reference_station"),
                radius_m=float(data.get("radius_m", 200.0)),
                seed=int(data.get("seed", 0)),
                tie_stations=data.get("tie_stations"),
                check_stations=data.get("check_stations"),
                tie_fraction=data.get("tie_fraction"),
                workers=data.get("workers"),
                trajectory_format=data.get("trajectory_format", "long-table"),
                base_dir=base_dir or Path.cwd(),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc!r}") from exc

    def to_dict(self) -> dict:
        vg = self.variogram
        return {
            "sensors": [
                {"id": s.id, "incidence_deg": s.incidence_deg, "heading_deg": s.heading_deg, "look_side": s.look_side, "los_file": str(s.los_file)}
                for s in self.sensors
            ],
            "gnss_file": str(self.gnss_file),
            "output_dir": str(self.output_dir),
            "variogram": {"model": vg.model, "range_km": vg.range_km, "sill": vg.sill, "nugget": vg.nugget},
            "scale_km": self.scale_km,
            "q_z": self.q_z,
            "variance_mode": self.variance_mode,
            "reference_station": self.reference_station,
            "radius_m": self.radius_m,
            "seed": self.seed,
            "trajectory_format": self.trajectory_format,
        }


def load_config(path: str | Path, overrides: Mapping | None = None) -> RunConfig:
    """Read a JSON run configuration; non-None ``overrides`` replace top-level keys."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return RunConfig.from_dict(data, base_dir=path.parent)


def assign_roles(stations: Sequence[GnssStation], config: RunConfig) -> list[GnssStation]:
    """Apply explicit tie/check lists or a seeded random split, if configured."""
    if config.tie_stations is not None or config.check_stations is not None:
        ties = set(config.tie_stations or ())
        checks = set(config.check_stations or ())
        if ties & checks:
            raise ConfigError(f"stations listed as both tie and check: {sorted(ties & checks)}")
        known = {s.station_id for s in stations}
        unknown = (ties | checks) - known
        if unknown:
            raise ConfigError(f"unknown station ids in tie/check lists: {sorted(unknown)}")
        out = []
        for s in stations:
            if s.station_id in ties:
                out.append(replace(s, role="tie"))
            elif s.station_id in checks:
                out.append(replace(s, role="check"))
            else:
                out.append(s)
        return out
    if config.tie_fraction is not None:
        ordered = sorted(stations, key=lambda s: s.station_id)
        n_tie = max(1, round(config.tie_fraction * len(ordered)))
        perm = np.random.default_rng(config.seed).permutation(len(ordered))
        tie_idx = set(perm[:n_tie].tolist())
        return [replace(s, role="tie" if i in tie_idx else "check") for i, s in enumerate(ordered)]
    return list(stations)


# -- exports ----------------------------------------------------------------


def _writer(path: Path):
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from exc
    return fh, csv.writer(fh, lineterminator="\n")


def _date_str(grid: TimeGrid, k: int) -> str:
    d = grid.dates[k] if grid.dates else date_from_decimal_year(grid.epochs[k])
    return d.strftime("%Y%m%d")


def export_trajectories(
    path: str | Path,
    pixel_ids: Sequence[str],
    grid: TimeGrid,
    X: np.ndarray,
    P: np.ndarray,
    format: str = "long-table",
    lon: Sequence[float] | None = None,
    lat: Sequence[float] | None = None,
) -> list[Path]:
    """Write trajectories; returns the written files.

    ``long-table``: ``path`` is a file with one row per (pixel, epoch) holding
    dx, dy, dz and the six unique covariance entries. ``per-epoch-raster``:
    ``path`` is a directory receiving ``{dx,dy,dz}_YYYYMMDD.csv`` per epoch.
    """
    path = Path(path)
    if format == "long-table":
        fh, w = _writer(path)
        with fh:
            w.writerow(("pixel_id", "date", "epoch", "dx_mm", "dy_mm", "dz_mm") + COV_ENTRIES)
            for i, pid in enumerate(pixel_ids):
                for k in range(len(grid)):
                    x = X[i, k]
                    p = P[i, k]
                    w.writerow((pid, _date_str(grid, k), f"{grid.epochs[k]:.6f}", *map(_fmt, x), *(_fmt(p[a, b]) for a, b in _COV_INDEX)))
        return [path]
    if format != "per-epoch-raster":
        raise ValueError(f"unknown trajectory format {format!r}")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {path}: {exc.strerror}") from exc
    written = []
    for k in range(len(grid)):
        for c, comp in enumerate(("dx", "dy", "dz")):
            out = path / f"{comp}_{_date_str(grid, k)}.csv"
            fh, w = _writer(out)
            with fh:
                w.writerow(("pixel_id", "lon", "lat", f"{comp}_mm"))
                for i, pid in enumerate(pixel_ids):
                    w.writerow((pid, _fmt(lon[i]) if lon is not None else "", _fmt(lat[i]) if lat is not None else "", _fmt(X[i, k, c])))
            written.append(out)
    return written


def write_velocity(path: Path, result: FusionResult) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("pixel_id", "lon", "lat", "vx_mmyr", "vy_mmyr", "vz_mmyr", "std_vx", "std_vy", "std_vz"))
        for i, pid in enumerate(result.pixel_ids):
            w.writerow((pid, repr(float(result.lon[i])), repr(float(result.lat[i])), *map(_fmt, result.velocity[i]), *map(_fmt, result.velocity_std[i])))


def read_velocity(path: str | Path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Read a velocity map written by :func:`write_velocity`: ids, lon, lat, (n, 3) velocities."""
    path = Path(path)
    ids, lon, lat, v = [], [], [], []
    cols = ("pixel_id", "lon", "lat", "vx_mmyr", "vy_mmyr", "vz_mmyr")
    for line, row in _rows(path, cols):
        ids.append(row["pixel_id"])
        lon.append(_float(row["lon"], path, line, "lon"))
        lat.append(_float(row["lat"], path, line, "lat"))
        v.append([_float(row[c], path, line, c) for c in cols[3:]])
    if not ids:
        raise DataError(f"{path}: no data rows")
    return ids, np.array(lon), np.array(lat), np.array(v)


def write_priors(path: Path, result: FusionResult) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(("pixel_id", "lon", "lat", "vx_mmyr", "vy_mmyr", "varx", "vary", "nearest_station", "distance_km"))
        for p in result.priors:
            w.writerow((p.pixel_id, repr(p.lon), repr(p.lat), _fmt(p.vx), _fmt(p.vy), _fmt(p.var_x), _fmt(p.var_y), p.nearest_station_id, _fmt(p.distance_km)))


def write_resampled(path: Path, grid: TimeGrid, series) -> None:
    """One row per available (pixel, epoch) of one sensor."""
    fh, w = _writer(path)
    with fh:
        w.writerow(("pixel_id", "date", "epoch", "los_mm", "var_mm2"))
        for pid in sorted(series):
            r = series[pid]
            for k in np.flatnonzero(r.available):
                w.writerow((pid, _date_str(grid, k), f"{grid.epochs[k]:.6f}", _fmt(r.dl[k]), _fmt(r.var[k])))


def write_grid(path: Path, grid: TimeGrid) -> None:
    fh, w = _writer(path)
    with fh:
        sensors = grid.sensors
        w.writerow(("k", "date", "epoch", *(f"avail_{s}" for s in sensors)))
        for k in range(len(grid)):
            w.writerow((k, _date_str(grid, k), f"{grid.epochs[k]:.6f}", *(int(grid.availability[s][k]) for s in sensors)))


def write_validation(out_dir: Path, report, stem: str = "validation") -> None:
    (out_dir / f"{stem}.csv").write_text(report.to_table())
    (out_dir / f"{stem}_histogram.csv").write_text(report.histogram_table())
    (out_dir / f"{stem}_summary.txt").write_text(report.summary())


def write_outputs(result: FusionResult, out_dir: Path, trajectory_format: str = "long-table") -> list[Path]:
    """Write every pipeline artifact into ``out_dir``."""
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc.strerror}") from exc
    write_grid(out_dir / "grid.csv", result.grid)
    for sensor in result.sensors:
        write_resampled(out_dir / f"resampled_{sensor}.csv", result.grid, result.resampled[sensor])
    write_priors(out_dir / "priors.csv", result)
    if trajectory_format == "long-table":
        export_trajectories(out_dir / "trajectories.csv", result.pixel_ids, result.grid, result.X, result.P)
    else:
        export_trajectories(out_dir / "trajectories", result.pixel_ids, result.grid, result.X, result.P,
                            format=trajectory_format, lon=result.lon, lat=result.lat)
    write_velocity(out_dir / "velocity.csv", result)
    if result.validation is not None:
        write_validation(out_dir, result.validation)
    return sorted(p for p in out_dir.rglob("*") if p.is_file())


def run_pipeline(config: RunConfig) -> FusionResult:
    """Read inputs named by ``config``, fuse, and write all artifacts."""
    with stage("config"):
        config.validate()
    los, locations = {}, {}
    with stage("ingest"):
        for s in config.sensors:
            series, locs = read_los(config.path(s.los_file), s.id)
            los[s.id] = series
            for pid, loc in locs.items():
                if pid in locations and locations[pid] != loc:
                    raise DataError(f"pixel {pid} has different coordinates in {s.los_file}")
                locations[pid] = loc
        stations = assign_roles(read_gnss(config.path(config.gnss_file)), config)
    options = FuseOptions(
        variogram=config.variogram,
        scale_km=config.scale_km,
        q_z=config.q_z,
        variance_mode=config.variance_mode,
        reference_station=config.reference_station,
        radius_m=config.radius_m,
        workers=config.workers,
    )
    result = fuse(los, locations, stations, {s.id: s.geometry for s in config.sensors}, options)
    with stage("export"):
        write_outputs(result, config.path(config.output_dir), config.trajectory_format)
    log.info("wrote %d pixels x %d epochs to %s", len(result.pixel_ids), len(result.grid), config.path(config.output_dir))
    return result


def write_scene(scene, scenario, out_dir: str | Path) -> RunConfig:
    """Write a synthetic scene as LOS/GNSS files plus ``truth.csv`` and ``config.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    locations = {p: (float(a), float(b)) for p, a, b in zip(scene.pixel_ids, scene.lon, scene.lat)}
    sensors = []
    for sid in sorted(scene.geometries):
        g = scene.geometries[sid]
        fname = f"los_{sid}.csv"
        write_los(out_dir / fname, scene.los[sid], locations)
        sensors.append(SensorConfig(sid, g.incidence_deg, g.heading_deg, Path(fname), g.look_side))
    write_gnss(out_dir / "gnss.csv", scene.stations)
    fh, w = _writer(out_dir / "truth.csv")
    with fh:
        w.writerow(("date", "epoch", "dx_mm", "dy_mm", "dz_mm"))
        for k in range(len(scene.grid)):
            w.writerow((_date_str(scene.grid, k), f"{scene.grid.epochs[k]:.6f}", *(repr(float(v)) for v in scene.truth[k])))
    config = RunConfig(
        sensors=sensors,
        gnss_file=Path("gnss.csv"),
        output_dir=Path("fusion_out"),
        variogram=Variogram(**scenario.variogram) if scenario.variogram else Variogram(),
        scale_km=scenario.scale_km,
        q_z=scenario.q_z,
        variance_mode=scenario.variance_mode,
        seed=scenario.seed,
        base_dir=out_dir,
    )
    (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    return config
