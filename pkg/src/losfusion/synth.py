"""Synthetic deformation scenes and the east/up-only inversion baseline.

A scene has one truth model (trend + annual term + step per ENU component)
shared by all pixels, forward-projected onto each sensor's acquisition dates
with independent Gaussian noise per pixel. GNSS stations carry the exact
horizontal trend, so kriged priors reproduce it everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .geometry import SensorGeometry, project_to_los
from .gnss_field import GnssStation
from .timegrid import LosSeries, ResampledSeries, TimeGrid, build_union_grid, decimal_year

COMPONENTS = ("dx", "dy", "dz")


def _triple(value, name: str) -> np.ndarray:
    arr = np.asarray(value if value is not None else (0.0, 0.0, 0.0), dtype=np.float64)
    if arr.shape != (3,):
        raise ConfigError(f"{name} must have three (east, north, up) entries")
    return arr


@dataclass
class TruthModel:
    """Per-component trend (mm/yr), annual amplitude (mm) and phase (rad), step (mm).

    ``step_epoch`` is a decimal year; ``None`` places the step mid-span.
    ``noise_std`` maps sensor id to the LOS noise standard deviation in mm.
    """

    trend: np.ndarray = field(default_factory=lambda: np.zeros(3))
    annual_amp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    annual_phase: np.ndarray = field(default_factory=lambda: np.zeros(3))
    step_amp: np.ndarray = field(default_factory=lambda: np.zeros(3))
    step_epoch: float | None = None
    noise_std: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        self.trend = _triple(self.trend, "trend")
        self.annual_amp = _triple(self.annual_amp, "annual_amp")
        self.annual_phase = _triple(self.annual_phase, "annual_phase")
        self.step_amp = _triple(self.step_amp, "step_amp")
        if any(v < 0 for v in self.noise_std.values()):
            raise ConfigError("noise_std must be non-negative")


def generate_truth_series(model: TruthModel, epochs: Sequence[float] | TimeGrid, t_ref: float | None = None) -> np.ndarray:
    """Evaluate ``trend*(t-t1) + amp*sin(2 pi (t-t1) + phase) + step*H(t-t_step)``.

    Returns an ``(m, 3)`` array. ``t_ref`` (``t1``) defaults to the first
    epoch and the step defaults to the midpoint of the epochs; ``H(0) = 1``.
    """
    t = epochs.epochs if isinstance(epochs, TimeGrid) else np.asarray(epochs, dtype=np.float64)
    t1 = t[0] if t_ref is None else t_ref
    t_step = model.step_epoch if model.step_epoch is not None else 0.5 * (t[0] + t[-1])
    tau = (t - t1)[:, None]
    d = model.trend * tau + model.annual_amp * np.sin(2.0 * np.pi * tau + model.annual_phase)
    return d + model.step_amp * (t[:, None] >= t_step)


def forward_project(
    model: TruthModel,
    geometries: Mapping[str, SensorGeometry],
    sensor_epochs: Mapping[str, Sequence[float]],
    t_ref: float,
    step_epoch: float | None = None,
    noise_std: Mapping[str, float] | None = None,
    seed: int | np.random.Generator | None = None,
    pixel_id: str = "0",
    variance: Mapping[str, float] | None = None,
) -> dict[str, LosSeries]:
    """Sample the truth on each sensor's epochs, project to LOS and add noise.

    The variance column is ``noise_std**2`` unless ``variance`` overrides it
    for a sensor (useful to run the filter on noise-free data). Sensors draw
    noise in sorted-id order, so a fixed seed gives identical output.
    """
    noise_std = dict(model.noise_std if noise_std is None else noise_std)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(model.seed if seed is None else seed)
    if step_epoch is not None:
        model = replace(model, step_epoch=step_epoch)
    out = {}
    for sensor in sorted(sensor_epochs):
        t = np.asarray(sensor_epochs[sensor], dtype=np.float64)
        d = generate_truth_series(model, t, t_ref=t_ref)
        sigma = noise_std.get(sensor, 0.0)
        dl = project_to_los(geometries[sensor], d) + sigma * rng.standard_normal(t.size)
        var = np.full(t.size, sigma**2 if variance is None or sensor not in variance else variance[sensor])
        out[sensor] = LosSeries(sensor, pixel_id, t, np.atleast_1d(dl), var)
    return out


def invert_2d_batch(C: np.ndarray, dl: np.ndarray, var: np.ndarray, available: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Epoch-wise weighted least squares for (dx, dz) with dy forced to zero.

    ``C`` is ``(s, 3)``; ``dl``, ``var`` and ``available`` are ``(n, s, m)``.
    Returns ``(n, m, 2)``; epochs with fewer than two usable rows or a
    near-singular 2x2 normal matrix are NaN.
    """
    avail = np.asarray(available, dtype=bool)
    cx, cz = C[:, 0], C[:, 2]
    w = np.where(avail, 1.0 / np.where(avail, var, 1.0), 0.0)
    y = np.where(avail, dl, 0.0)
    wx, wz = w * cx[None, :, None], w * cz[None, :, None]
    n11 = np.einsum("nsm,s->nm", wx, cx)
    n12 = np.einsum("nsm,s->nm", wx, cz)
    n22 = np.einsum("nsm,s->nm", wz, cz)
    b1 = np.sum(wx * y, axis=1)
    b2 = np.sum(wz * y, axis=1)
    det = n11 * n22 - n12**2
    scale = (n11 + n22) ** 2
    ok = (avail.sum(axis=1) >= 2) & (det > rcond * scale)
    safe = np.where(ok, det, 1.0)
    dx = np.where(ok, (n22 * b1 - n12 * b2) / safe, np.nan)
    dz = np.where(ok, (n11 * b2 - n12 * b1) / safe, np.nan)
    return np.stack([dx, dz], axis=-1)


def invert_2d_epochwise(series: Mapping[str, ResampledSeries], geometries: Mapping[str, SensorGeometry]) -> np.ndarray:
    """East/up inversion of one pixel's resampled series; returns ``(m, 2)``."""
    sensors = sorted(series)
    C = np.vstack([geometries[s].c for s in sensors])
    dl = np.stack([series[s].dl for s in sensors])[None]
    var = np.stack([series[s].var for s in sensors])[None]
    avail = np.stack([series[s].available for s in sensors])[None]
    return invert_2d_batch(C, dl, var, avail)[0]


@dataclass
class ComparisonReport:
    """RMSE and max absolute error per method and component."""

    rows: list[dict]

    def get(self, method: str, component: str) -> dict:
        for row in self.rows:
            if row["method"] == method and row["component"] == component:
                return row
        raise KeyError((method, component))

    def rmse(self, method: str, component: str) -> float:
        return self.get(method, component)["rmse"]

    def to_table(self, sep: str = ",") -> str:
        lines = [sep.join(("method", "component", "rmse_mm", "max_abs_mm", "n_epochs"))]
        for r in self.rows:
            lines.append(sep.join((r["method"], r["component"], f"{r['rmse']:.6g}", f"{r['max_abs']:.6g}", str(r["n"]))))
        return "\n".join(lines) + "\n"


def _error_stats(err: np.ndarray) -> tuple[float, float, int]:
    e = err[np.isfinite(err)]
    if e.size == 0:
        return math.nan, math.nan, 0
    return float(np.sqrt(np.mean(e**2))), float(np.max(np.abs(e))), int(e.size)


def compare_runs(truth: np.ndarray, traj_3d: np.ndarray, traj_2d: np.ndarray | None = None) -> ComparisonReport:
    """Compare estimates against truth.

    ``truth`` is ``(m, 3)`` or broadcastable to ``traj_3d`` (``(..., m, 3)``);
    ``traj_2d`` holds (dx, dz) as ``(..., m, 2)``. NaN epochs of the baseline
    are excluded from its statistics.
    """
    truth = np.asarray(truth, dtype=np.float64)
    est = np.asarray(getattr(traj_3d, "X", traj_3d), dtype=np.float64)
    if truth.shape[-2:] != est.shape[-2:]:
        raise DataError(f"grid mismatch: truth {truth.shape} vs 3D estimate {est.shape}")
    rows = []
    for i, comp in enumerate(COMPONENTS):
        rmse, mx, n = _error_stats(est[..., i] - truth[..., i])
        rows.append(dict(method="kalman_3d", component=comp, rmse=rmse, max_abs=mx, n=n))
    if traj_2d is not None:
        est2 = np.asarray(traj_2d, dtype=np.float64)
        if est2.shape[-2] != truth.shape[-2]:
            raise DataError(f"grid mismatch: truth has {truth.shape[-2]} epochs, 2D estimate {est2.shape[-2]}")
        for j, i in ((0, 0), (1, 2)):
            rmse, mx, n = _error_stats(est2[..., j] - truth[..., i])
            rows.append(dict(method="ew_up_2d", component=COMPONENTS[i], rmse=rmse, max_abs=mx, n=n))
    return ComparisonReport(rows)


# -- scenario files ---------------------------------------------------------


@dataclass
class SensorSpec:
    geometry: SensorGeometry
    dates: tuple[str, ...]
    noise_std: float = 0.0
    variance: float | None = None


@dataclass
class Scenario:
    """Everything needed to simulate a scene; loaded from a JSON mapping."""

    sensors: list[SensorSpec]
    truth: TruthModel
    n_pixels: int = 100
    seed: int = 0
    center: tuple[float, float] = (-122.25, 37.6)
    size_km: float = 2.0
    n_tie: int = 26
    n_check: int = 28
    station_var: float = 0.01
    q_z: float = 1.0
    variance_mode: str = "paper"
    scale_km: float = 10.0
    variogram: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scenario":
        from . import bay_area

        try:
            sensors = []
            for spec in data["sensors"]:
                dates = spec.get("dates", "bay_area")
                if dates == "bay_area":
                    dates = bay_area.ACQUISITIONS[spec["id"]]
                geom = SensorGeometry(spec["id"], float(spec["incidence_deg"]), float(spec["heading_deg"]), spec.get("look_side", "right"))
                sensors.append(SensorSpec(geom, tuple(str(d) for d in dates), float(spec.get("noise_std", 0.0)), spec.get("variance")))
            t = data.get("truth", {})
            truth = TruthModel(
                trend=t.get("trend"),
                annual_amp=t.get("annual_amp"),
                annual_phase=t.get("annual_phase"),
                step_amp=t.get("step_amp"),
                step_epoch=t.get("step_epoch"),
                noise_std={s.geometry.sensor_id: s.noise_std for s in sensors},
                seed=int(data.get("seed", 0)),
            )
            gnss = data.get("gnss", {})
            flt = data.get("filter", {})
            scen = cls(
                sensors=sensors,
                truth=truth,
                n_pixels=int(data.get("n_pixels", 100)),
                seed=int(data.get("seed", 0)),
                center=tuple(data.get("center", (-122.25, 37.6))),
                size_km=float(data.get("size_km", 2.0)),
                n_tie=int(gnss.get("n_tie", 26)),
                n_check=int(gnss.get("n_check", 28)),
                station_var=float(gnss.get("var", 0.01)),
                q_z=float(flt.get("q_z", 1.0)),
                variance_mode=flt.get("variance_mode", "paper"),
                scale_km=float(data.get("scale_km", 10.0)),
                variogram=dict(data.get("variogram", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario: {exc}") from exc
        if not scen.sensors:
            raise ConfigError("scenario defines no sensors")
        if scen.n_pixels < 1 or scen.n_tie < 1:
            raise ConfigError("scenario needs at least one pixel and one tie station")
        return scen


@dataclass
class SyntheticScene:
    geometries: dict[str, SensorGeometry]
    grid: TimeGrid
    pixel_ids: list[str]
    lon: np.ndarray
    lat: np.ndarray
    los: dict[str, dict[str, LosSeries]]
    stations: list[GnssStation]
    truth: np.ndarray  # (m, 3) on the grid, shared by all pixels


def _scatter(rng: np.random.Generator, n: int, center: tuple[float, float], size_km: float) -> tuple[np.ndarray, np.ndarray]:
    half_lat = 0.5 * size_km / 111.195
    half_lon = half_lat / math.cos(math.radians(center[1]))
    lon = center[0] + rng.uniform(-half_lon, half_lon, n)
    lat = center[1] + rng.uniform(-half_lat, half_lat, n)
    return lon, lat


def simulate_scene(scenario: Scenario) -> SyntheticScene:
    """Generate pixels, LOS series and GNSS stations for a scenario.

    Per-pixel noise uses generators spawned from the scenario seed, so pixel
    ``i`` receives the same noise however many pixels are simulated.
    """
    geometries = {s.geometry.sensor_id: s.geometry for s in scenario.sensors}
    grid = build_union_grid({s.geometry.sensor_id: s.dates for s in scenario.sensors})
    sensor_epochs = {s.geometry.sensor_id: np.array([decimal_year(d) for d in sorted(s.dates)]) for s in scenario.sensors}
    t_ref = grid.epochs[0]
    t_step = scenario.truth.step_epoch if scenario.truth.step_epoch is not None else 0.5 * (grid.epochs[0] + grid.epochs[-1])
    variance = {s.geometry.sensor_id: s.variance for s in scenario.sensors if s.variance is not None}

    layout_rng, *pixel_seeds = np.random.SeedSequence(scenario.seed).spawn(scenario.n_pixels + 1)
    layout = np.random.default_rng(layout_rng)
    lon, lat = _scatter(layout, scenario.n_pixels, scenario.center, scenario.size_km)
    width = len(str(scenario.n_pixels - 1))
    pixel_ids = [f"p{i:0{width}d}" for i in range(scenario.n_pixels)]

    los: dict[str, dict[str, LosSeries]] = {sid: {} for sid in geometries}
    for pid, ss in zip(pixel_ids, pixel_seeds):
        series = forward_project(
            scenario.truth, geometries, sensor_epochs, t_ref, step_epoch=t_step,
            seed=np.random.default_rng(ss), pixel_id=pid, variance=variance,
        )
        for sid, s in series.items():
            los[sid][pid] = s

    n_st = scenario.n_tie + scenario.n_check
    slon, slat = _scatter(layout, n_st, scenario.center, scenario.size_km)
    vx, vy = scenario.truth.trend[:2]
    stations = [
        GnssStation(f"S{i:03d}", float(slon[i]), float(slat[i]), float(vx), float(vy),
                    scenario.station_var, scenario.station_var, "tie" if i < scenario.n_tie else "check")
        for i in range(n_st)
    ]
    truth = generate_truth_series(replace(scenario.truth, step_epoch=t_step), grid, t_ref=t_ref)
    return SyntheticScene(geometries, grid, pixel_ids, lon, lat, los, stations, truth)
