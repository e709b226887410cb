"""In-memory fusion pipeline: resample -> krige priors -> filter -> velocities -> validate."""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, FusionError
from .geometry import SensorGeometry, design_matrix
from .gnss_field import GnssStation, PixelVelocityPrior, Variogram, pixel_priors
from .kalman import FilterConfig, fit_trend, run_filter_batch
from .timegrid import LosSeries, ResampledSeries, TimeGrid, build_union_grid, date_from_decimal_year, resample_dataset
from .validation import DEFAULT_RADIUS_M, ValidationReport, reference_to_station, validate_velocities

log = logging.getLogger(__name__)

WORKERS_ENV = "LOSFUSION_WORKERS"
# Fixed chunking keeps results independent of the worker count.
CHUNK_SIZE = 256


@dataclass(frozen=True)
class FuseOptions:
    variogram: Variogram = Variogram()
    scale_km: float = 10.0
    q_z: float = 1.0
    variance_mode: str = "paper"
    reference_station: str | None = None
    radius_m: float = DEFAULT_RADIUS_M
    workers: int | None = None
    initial_cov: float = 0.0


@dataclass
class FusionResult:
    grid: TimeGrid
    sensors: list[str]
    pixel_ids: list[str]
    lon: np.ndarray
    lat: np.ndarray
    resampled: dict[str, dict[str, ResampledSeries]]
    priors: list[PixelVelocityPrior]
    X: np.ndarray  # (n, m, 3)
    P: np.ndarray  # (n, m, 3, 3)
    velocity: np.ndarray  # (n, 3)
    velocity_std: np.ndarray  # (n, 3)
    validation: ValidationReport | None = None
    skipped: dict[str, dict[str, str]] = field(default_factory=dict)


@contextmanager
def stage(name: str):
    """Prefix any :class:`FusionError` raised inside with the pipeline stage name."""
    try:
        yield
    except FusionError as exc:
        if getattr(exc, "stage", None) is None:
            exc.stage = name
            exc.args = (f"[{name}] {exc}",)
        raise


def union_grid_from_series(los: Mapping[str, Mapping[str, LosSeries]]) -> TimeGrid:
    """Union grid over every epoch that appears in any pixel of any sensor."""
    dates = {}
    for sensor, pixels in los.items():
        epochs = set()
        for s in pixels.values():
            epochs.update(s.epochs.tolist())
        dates[sensor] = [date_from_decimal_year(e) for e in epochs]
    return build_union_grid(dates)


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def _filter_chunk(args):
    return run_filter_batch(*args)


def stack_inputs(
    resampled: Mapping[str, Mapping[str, ResampledSeries]], sensors: Sequence[str], pixel_ids: Sequence[str], m: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense ``(n, s, m)`` value/variance/availability arrays; missing series are unavailable."""
    n, s = len(pixel_ids), len(sensors)
    dl = np.full((n, s, m), np.nan)
    var = np.full((n, s, m), np.nan)
    avail = np.zeros((n, s, m), dtype=bool)
    for j, sensor in enumerate(sensors):
        by_pixel = resampled.get(sensor, {})
        for i, pid in enumerate(pixel_ids):
            r = by_pixel.get(pid)
            if r is not None:
                dl[i, j], var[i, j], avail[i, j] = r.dl, r.var, r.available
    return dl, var, avail


def fuse(
    los: Mapping[str, Mapping[str, LosSeries]],
    locations: Mapping[str, tuple[float, float]],
    stations: Sequence[GnssStation],
    geometries: Mapping[str, SensorGeometry],
    options: FuseOptions = FuseOptions(),
) -> FusionResult:
    """Run the full fusion on in-memory inputs.

    ``los`` maps sensor id to ``{pixel_id: LosSeries}``; ``locations`` maps
    pixel id to ``(lon, lat)``. A pixel is kept when at least one of its
    sensor series can be resampled.
    """
    sensors = sorted(los)
    missing = [s for s in sensors if s not in geometries]
    if missing:
        raise DataError(f"no geometry for sensor(s) {missing}")

    with stage("resample"):
        grid = union_grid_from_series(los)
        m = len(grid)
        resampled: dict[str, dict[str, ResampledSeries]] = {}
        skipped: dict[str, dict[str, str]] = {}
        for sensor in sensors:
            res = resample_dataset(los[sensor], grid, options.variance_mode)
            resampled[sensor] = res.series
            if res.errors:
                skipped[sensor] = res.errors
                log.warning("%s: %d pixel series could not be resampled", sensor, len(res.errors))

        pixel_ids = sorted(set().union(*(r.keys() for r in resampled.values())))
        if not pixel_ids:
            raise DataError("no pixel has a usable LOS series")
        unknown = [p for p in pixel_ids if p not in locations]
        if unknown:
            raise DataError(f"pixels without coordinates: {unknown[:5]}")
    lon = np.array([locations[p][0] for p in pixel_ids], dtype=np.float64)
    lat = np.array([locations[p][1] for p in pixel_ids], dtype=np.float64)

    with stage("gnss"):
        priors = pixel_priors(stations, pixel_ids, lon, lat, options.variogram, options.scale_km)
    velocity = np.array([[p.vx, p.vy] for p in priors])
    velocity_var = np.array([[p.var_x, p.var_y] for p in priors])

    with stage("filter"):
        dl, var, avail = stack_inputs(resampled, sensors, pixel_ids, m)
        C = design_matrix([geometries[s] for s in sensors])
        cfg = FilterConfig(q_z=options.q_z, initial_cov=options.initial_cov)
        chunks = [slice(i, i + CHUNK_SIZE) for i in range(0, len(pixel_ids), CHUNK_SIZE)]
        jobs = [(grid.epochs, C, dl[c], var[c], avail[c], velocity[c], velocity_var[c], cfg) for c in chunks]
        workers = resolve_workers(options.workers)
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_filter_chunk, jobs))
        else:
            parts = [_filter_chunk(j) for j in jobs]
        X = np.concatenate([p[0] for p in parts])
        P = np.concatenate([p[1] for p in parts])

    with stage("validation"):
        by_id = {s.station_id: s for s in stations}
        if options.reference_station is not None:
            if options.reference_station not in by_id:
                raise DataError(f"reference station {options.reference_station!r} not in GNSS table")
            X = reference_to_station(X, lon, lat, by_id[options.reference_station], options.radius_m)

        if m >= 2:
            v, v_std = fit_trend(grid.epochs, X.transpose(1, 0, 2))
        else:
            v, v_std = np.full((len(pixel_ids), 3), np.nan), np.full((len(pixel_ids), 3), np.nan)

        checks = [s for s in stations if s.role == "check"]
        report = validate_velocities(lon, lat, v, checks, options.radius_m) if checks else None
    return FusionResult(grid, sensors, pixel_ids, lon, lat, resampled, priors, X, P, v, v_std, report, skipped)
