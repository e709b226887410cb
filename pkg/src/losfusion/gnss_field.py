"""GNSS horizontal velocities interpolated to pixel locations.

Velocities are kriged (ordinary kriging, one system shared by all pixels)
and each pixel receives the variance of its nearest tie station, inflated by
``(1 + D / S)^2`` where ``D`` is the distance to that station in km.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError

EARTH_RADIUS_KM = 6371.0
ROLES = ("tie", "check")
# Kriging systems worse conditioned than this fall back to nearest neighbour.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class GnssStation:
    station_id: str
    lon: float
    lat: float
    vx: float
    vy: float
    var_x: float
    var_y: float
    role: str = "tie"

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise DataError(f"station {self.station_id}: role must be 'tie' or 'check', got {self.role!r}")
        if self.var_x < 0 or self.var_y < 0:
            raise DataError(f"station {self.station_id}: negative velocity variance")


@dataclass(frozen=True)
class PixelVelocityPrior:
    """Kriged horizontal velocity (mm/yr) and inflated variance at one pixel."""

    pixel_id: str
    lon: float
    lat: float
    vx: float
    vy: float
    var_x: float
    var_y: float
    nearest_station_id: str
    distance_km: float


@dataclass(frozen=True)
class Variogram:
    """Isotropic variogram model; distances in km.

    ``gamma(0) = 0`` for every model, so the nugget only acts at ``d > 0``.
    """

    model: str = "exponential"
    range_km: float = 30.0
    sill: float = 1.0
    nugget: float = 0.0

    def __post_init__(self) -> None:
        if self.model not in _MODELS:
            raise ValueError(f"unknown variogram model {self.model!r}; choose from {sorted(_MODELS)}")
        if self.range_km <= 0 or self.sill <= 0 or self.nugget < 0:
            raise ValueError("variogram needs range_km > 0, sill > 0, nugget >= 0")

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        g = self.nugget + self.sill * _MODELS[self.model](d / self.range_km)
        return np.where(d == 0.0, 0.0, g)


def _spherical(h: np.ndarray) -> np.ndarray:
    return np.where(h < 1.0, 1.5 * h - 0.5 * h**3, 1.0)


_MODELS = {
    "exponential": lambda h: 1.0 - np.exp(-h),
    "gaussian": lambda h: 1.0 - np.exp(-(h**2)),
    "spherical": _spherical,
}


def haversine_km(lon1, lat1, lon2, lat2) -> np.ndarray:
    """Great-circle distance in km on a sphere of radius 6371 km (broadcasts)."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(a, dtype=np.float64)) for a in (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _sorted_stations(stations: Sequence[GnssStation]) -> list[GnssStation]:
    if len(stations) == 0:
        raise DataError("no GNSS stations supplied")
    return sorted(stations, key=lambda s: s.station_id)


def nearest_stations(lon, lat, stations: Sequence[GnssStation]) -> tuple[np.ndarray, np.ndarray]:
    """Index into the id-sorted station list and distance (km) of the closest station.

    Equidistant stations resolve to the lexicographically smallest id.
    """
    ordered = _sorted_stations(stations)
    slon = np.array([s.lon for s in ordered])
    slat = np.array([s.lat for s in ordered])
    d = haversine_km(np.atleast_1d(lon)[:, None], np.atleast_1d(lat)[:, None], slon[None, :], slat[None, :])
    idx = np.argmin(d, axis=1)  # first occurrence wins ties
    return idx, d[np.arange(d.shape[0]), idx]


def nearest_station_distance(lon: float, lat: float, stations: Sequence[GnssStation]) -> tuple[str, float]:
    """Return ``(station_id, distance_km)`` of the station closest to one pixel."""
    ordered = _sorted_stations(stations)
    idx, dist = nearest_stations(lon, lat, ordered)
    return ordered[int(idx[0])].station_id, float(dist[0])


def inflate_variance(station_var, distance_km, scale_km: float = 10.0):
    """Station variance inflated with distance: ``var * (1 + D / S)^2``."""
    if scale_km <= 0:
        raise ValueError(f"scaling distance must be positive, got {scale_km}")
    d = np.asarray(distance_km, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("distance must be non-negative")
    out = np.asarray(station_var, dtype=np.float64) * (1.0 + d / scale_km) ** 2
    return float(out) if out.ndim == 0 else out


def kriging_weights(
    station_lon, station_lat, pixel_lon, pixel_lat, variogram: Variogram = Variogram()
) -> np.ndarray:
    """Ordinary-kriging weights, shape ``(n_pixels, n_stations)``; rows sum to 1.

    Raises :class:`NumericalError` when the kriging matrix is singular or too
    badly conditioned to trust.
    """
    slon = np.asarray(station_lon, dtype=np.float64)
    slat = np.asarray(station_lat, dtype=np.float64)
    q = slon.size
    if q == 0:
        raise DataError("kriging needs at least one station")

    a = np.zeros((q + 1, q + 1))
    a[:q, :q] = variogram(haversine_km(slon[:, None], slat[:, None], slon[None, :], slat[None, :]))
    a[:q, q] = 1.0
    a[q, :q] = 1.0
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(f"kriging system is singular (condition number {cond:.3g})")

    plon = np.atleast_1d(np.asarray(pixel_lon, dtype=np.float64))
    plat = np.atleast_1d(np.asarray(pixel_lat, dtype=np.float64))
    b = np.ones((q + 1, plon.size))
    b[:q] = variogram(haversine_km(slon[:, None], slat[:, None], plon[None, :], plat[None, :]))
    sol = scipy.linalg.lu_solve(scipy.linalg.lu_factor(a), b)
    return sol[:q].T


def krige_velocities(
    tie_stations: Sequence[GnssStation], pixel_lon, pixel_lat, variogram: Variogram = Variogram()
) -> tuple[np.ndarray, np.ndarray]:
    """Krige east and north velocities (mm/yr) from tie stations onto pixels.

    A singular kriging system (e.g. duplicated station coordinates) falls back
    to the nearest station's velocity and emits a ``RuntimeWarning``.
    """
    ordered = _sorted_stations(tie_stations)
    vx = np.array([s.vx for s in ordered])
    vy = np.array([s.vy for s in ordered])
    try:
        w = kriging_weights([s.lon for s in ordered], [s.lat for s in ordered], pixel_lon, pixel_lat, variogram)
    except NumericalError as exc:
        warnings.warn(f"{exc}; using nearest-station velocities", RuntimeWarning, stacklevel=2)
        idx, _ = nearest_stations(pixel_lon, pixel_lat, ordered)
        return vx[idx], vy[idx]
    return w @ vx, w @ vy


def pixel_priors(
    stations: Sequence[GnssStation],
    pixel_ids: Sequence[str],
    pixel_lon,
    pixel_lat,
    variogram: Variogram = Variogram(),
    scale_km: float = 10.0,
) -> list[PixelVelocityPrior]:
    """Velocity priors for every pixel, using tie stations only."""
    ties = [s for s in stations if s.role == "tie"]
    if not ties:
        raise DataError("no tie stations available for kriging")
    ordered = _sorted_stations(ties)
    plon = np.atleast_1d(np.asarray(pixel_lon, dtype=np.float64))
    plat = np.atleast_1d(np.asarray(pixel_lat, dtype=np.float64))
    if not (len(pixel_ids) == plon.size == plat.size):
        raise DataError("pixel ids and coordinates differ in length")

    vx, vy = krige_velocities(ordered, plon, plat, variogram)
    idx, dist = nearest_stations(plon, plat, ordered)
    var_x = inflate_variance(np.array([ordered[i].var_x for i in idx]), dist, scale_km)
    var_y = inflate_variance(np.array([ordered[i].var_y for i in idx]), dist, scale_km)
    return [
        PixelVelocityPrior(
            pixel_id=pid,
            lon=float(plon[j]),
            lat=float(plat[j]),
            vx=float(vx[j]),
            vy=float(vy[j]),
            var_x=float(var_x[j]),
            var_y=float(var_y[j]),
            nearest_station_id=ordered[idx[j]].station_id,
            distance_km=float(dist[j]),
        )
        for j, pid in enumerate(pixel_ids)
    ]
