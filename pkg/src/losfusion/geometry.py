"""SAR line-of-sight unit vectors and projection of ENU displacements.

Convention: the unit vector points from the ground target to the satellite,
components are ordered (east, north, up), and a positive LOS value means
motion toward the satellite. The look azimuth is the flight heading rotated
by +90 deg for right-looking and -90 deg for left-looking sensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError

LOOK_SIDES = ("right", "left")


def los_unit_vector(
    incidence_deg: float, heading_deg: float, look_side: str = "right"
) -> tuple[float, float, float]:
    """Return the target-to-satellite unit vector ``(C_x, C_y, C_z)``.

    Parameters
    ----------
    incidence_deg : float
        Incidence angle at the target, in degrees, strictly inside (0, 90).
    heading_deg : float
        Azimuth of the flight direction, degrees clockwise from north, in [0, 360).
    look_side : {"right", "left"}
        Side the antenna looks toward, relative to the flight direction.
    """
    if not (0.0 < incidence_deg < 90.0) or not math.isfinite(incidence_deg):
        raise GeometryError(f"incidence angle {incidence_deg!r} deg outside (0, 90)")
    if not (0.0 <= heading_deg < 360.0):
        raise GeometryError(f"heading angle {heading_deg!r} deg outside [0, 360)")
    if look_side not in LOOK_SIDES:
        raise GeometryError(f"look side must be one of {LOOK_SIDES}, got {look_side!r}")

    theta = math.radians(incidence_deg)
    offset = 90.0 if look_side == "right" else -90.0
    alpha = math.radians(heading_deg + offset)
    sin_t = math.sin(theta)
    return (-sin_t * math.sin(alpha), -sin_t * math.cos(alpha), math.cos(theta))


@dataclass(frozen=True)
class SensorGeometry:
    """One SAR viewing geometry and its derived LOS unit vector."""

    sensor_id: str
    incidence_deg: float
    heading_deg: float
    look_side: str = "right"
    unit_vector: tuple[float, float, float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        vec = los_unit_vector(self.incidence_deg, self.heading_deg, self.look_side)
        object.__setattr__(self, "unit_vector", vec)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.unit_vector, dtype=np.float64)


def project_to_los(geom: SensorGeometry | Sequence[float], d: Iterable[float] | np.ndarray) -> float | np.ndarray:
    """Project ENU displacement(s) onto the LOS direction.

    ``d`` may be a single ``(dx, dy, dz)`` triple or an array whose last axis
    has length 3; the result has the leading shape of ``d``.
    """
    c = geom.c if isinstance(geom, SensorGeometry) else np.asarray(geom, dtype=np.float64)
    arr = np.asarray(d, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError(f"displacement must have a trailing axis of length 3, got {arr.shape}")
    out = arr @ c
    return float(out) if out.ndim == 0 else out


def design_matrix(geometries: Sequence[SensorGeometry]) -> np.ndarray:
    """Stack unit vectors into an ``(n_sensors, 3)`` matrix, in the given order."""
    if not geometries:
        return np.zeros((0, 3))
    return np.vstack([g.c for g in geometries])
