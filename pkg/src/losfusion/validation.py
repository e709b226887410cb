"""Comparison of fused results against held-out GNSS stations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .gnss_field import GnssStation, haversine_km

DEFAULT_RADIUS_M = 200.0


def pixels_near(pixel_lon, pixel_lat, lon: float, lat: float, radius_m: float = DEFAULT_RADIUS_M) -> np.ndarray:
    """Boolean mask of pixels within ``radius_m`` (haversine) of a point."""
    if not radius_m > 0:
        raise ValueError(f"radius must be positive, got {radius_m}")
    d_m = 1000.0 * haversine_km(pixel_lon, pixel_lat, lon, lat)
    return np.atleast_1d(d_m <= radius_m)


def average_pixels_near_station(
    pixel_lon, pixel_lat, values: np.ndarray, station: GnssStation, radius_m: float = DEFAULT_RADIUS_M
) -> tuple[np.ndarray | None, int]:
    """Unweighted mean of per-pixel ``values`` (leading axis = pixel) inside the disc.

    Returns ``(None, 0)`` when no pixel falls inside; the caller treats the
    station as excluded.
    """
    mask = pixels_near(pixel_lon, pixel_lat, station.lon, station.lat, radius_m)
    n = int(mask.sum())
    if n == 0:
        return None, 0
    return np.asarray(values)[mask].mean(axis=0), n


def reference_to_station(
    trajectories: np.ndarray, pixel_lon, pixel_lat, station: GnssStation, radius_m: float = DEFAULT_RADIUS_M
) -> np.ndarray:
    """Subtract the mean trajectory of pixels near ``station`` from every pixel.

    ``trajectories`` is ``(n_pixels, m, 3)``. Covariances are not touched.
    """
    mask = pixels_near(pixel_lon, pixel_lat, station.lon, station.lat, radius_m)
    if not mask.any():
        raise DataError(f"no pixels within {radius_m:g} m of reference station {station.station_id}")
    traj = np.asarray(trajectories, dtype=np.float64)
    return traj - traj[mask].mean(axis=0)


@dataclass
class StationComparison:
    station_id: str
    estimate: np.ndarray
    reference: np.ndarray
    n_pixels: int

    @property
    def difference(self) -> np.ndarray:
        return self.estimate - self.reference


@dataclass
class ValidationReport:
    """Per-station differences (estimate minus reference) with summary statistics.

    ``mean``/``std`` are NaN (undefined) when fewer than two stations matched. ``std``
    is the sample standard deviation (``n - 1`` denominator).
    """

    components: tuple[str, ...]
    stations: list[StationComparison]
    mean: np.ndarray
    std: np.ndarray
    radius_m: float = DEFAULT_RADIUS_M
    excluded: list[str] = field(default_factory=list)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    def to_table(self, sep: str = ",") -> str:
        head = ["station_id", "n_pixels"]
        for c in self.components:
            head += [f"est_{c}", f"ref_{c}", f"diff_{c}"]
        lines = [sep.join(head)]
        for s in self.stations:
            row = [s.station_id, str(s.n_pixels)]
            for e, r, d in zip(s.estimate, s.reference, s.difference):
                row += [f"{e:.6g}", f"{r:.6g}", f"{d:.6g}"]
            lines.append(sep.join(row))
        return "\n".join(lines) + "\n"

    def histogram_table(self, bins: int | Sequence[float] = 10, sep: str = ",") -> str:
        lines = [sep.join(("component", "bin_lo", "bin_hi", "count"))]
        if not self.stations:
            return lines[0] + "\n"
        diffs = np.array([s.difference for s in self.stations])
        for i, c in enumerate(self.components):
            counts, edges = np.histogram(diffs[:, i], bins=bins)
            for k, n in enumerate(counts):
                lines.append(sep.join((c, f"{edges[k]:.6g}", f"{edges[k + 1]:.6g}", str(int(n)))))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [
            f"matched stations: {self.n_stations} (radius {self.radius_m:g} m)",
            f"excluded stations: {len(self.excluded)}" + (f" ({', '.join(self.excluded)})" if self.excluded else ""),
        ]
        for i, c in enumerate(self.components):
            if math.isnan(self.std[i]):
                lines.append(f"{c}: mean and std undefined (fewer than 2 stations)")
            else:
                lines.append(f"{c}: mean difference {self.mean[i]:.6g}, std {self.std[i]:.6g}")
        return "\n".join(lines) + "\n"


def difference_stats(
    estimates: Mapping[str, Sequence[float]],
    references: Mapping[str, Sequence[float]],
    components: tuple[str, ...] = ("vx", "vy"),
    n_pixels: Mapping[str, int] | None = None,
    radius_m: float = DEFAULT_RADIUS_M,
    excluded: Sequence[str] = (),
) -> ValidationReport:
    """Differences between estimated and reference values at matched stations.

    Stations are matched by id and reported in sorted order, so the summary
    does not depend on input ordering.
    """
    ids = sorted(set(estimates) & set(references))
    k = len(components)
    rows = [
        StationComparison(
            sid,
            np.asarray(estimates[sid], dtype=np.float64)[:k],
            np.asarray(references[sid], dtype=np.float64)[:k],
            (n_pixels or {}).get(sid, 0),
        )
        for sid in ids
    ]
    if len(rows) >= 2:
        diffs = np.array([r.difference for r in rows])
        mean, std = diffs.mean(axis=0), diffs.std(axis=0, ddof=1)
    else:
        mean, std = np.full(k, np.nan), np.full(k, np.nan)
    return ValidationReport(components, rows, mean, std, radius_m, sorted(excluded))


def validate_velocities(
    pixel_lon, pixel_lat, velocities: np.ndarray, check_stations: Sequence[GnssStation], radius_m: float = DEFAULT_RADIUS_M
) -> ValidationReport:
    """Compare pixel-averaged horizontal velocities with check-station velocities."""
    estimates, refs, counts, excluded = {}, {}, {}, []
    for st in check_stations:
        mean, n = average_pixels_near_station(pixel_lon, pixel_lat, velocities, st, radius_m)
        if mean is None:
            excluded.append(st.station_id)
            continue
        estimates[st.station_id] = mean[:2]
        refs[st.station_id] = (st.vx, st.vy)
        counts[st.station_id] = n
    return difference_stats(estimates, refs, ("vx", "vy"), counts, radius_m, excluded)
