"""Per-pixel Kalman filter fusing resampled LOS series with GNSS velocity priors.

State: ENU displacement ``X = (dx, dy, dz)`` in mm with covariance ``P``.
Dynamics: ``X_k = X_{k-1} + dt * (vx, vy, 0) + w`` with
``Q = diag(var_vx dt^2, var_vy dt^2, q_z dt)``.
Measurements: one row per available sensor, ``y = C . X + e`` with
``R = diag(resampled LOS variance)``.

Two execution paths share these equations: :func:`run_pixel_filter` runs one
pixel through :func:`predict` / :func:`update` and is the reference;
:func:`run_filter_batch` advances many pixels at once with stacked arrays and
is what the pipeline uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError
from .geometry import SensorGeometry
from .gnss_field import PixelVelocityPrior
from .timegrid import ResampledSeries, TimeGrid

# Innovation covariances above this condition number are rejected.
MAX_CONDITION = 1e12


@dataclass
class FilterState:
    X: np.ndarray
    P: np.ndarray

    @classmethod
    def zero(cls) -> "FilterState":
        return cls(np.zeros(3), np.zeros((3, 3)))

    def copy(self) -> "FilterState":
        return FilterState(self.X.copy(), self.P.copy())


@dataclass(frozen=True)
class EpochSystem:
    """Measurement system ``Y = A X + e`` at one epoch; ``R`` holds the diagonal."""

    k: int
    Y: np.ndarray
    A: np.ndarray
    R: np.ndarray
    sensor_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return self.Y.size


@dataclass(frozen=True)
class ProcessModel:
    """Control input ``u`` (mm/yr, vertical entry 0) and step covariance ``Q`` (mm^2)."""

    u: np.ndarray
    Q: np.ndarray

    @classmethod
    def from_prior(cls, prior: PixelVelocityPrior, dt: float, q_z: float) -> "ProcessModel":
        u = np.array([prior.vx, prior.vy, 0.0])
        Q = np.diag([prior.var_x * dt**2, prior.var_y * dt**2, q_z * dt])
        return cls(u, Q)


@dataclass(frozen=True)
class FilterConfig:
    """Filter settings.

    ``q_z`` is the vertical random-walk density in mm^2/yr. ``initial_cov`` is
    the variance placed on every axis of ``P`` at the first epoch; the default
    0 pins the first epoch to zero displacement.
    """

    q_z: float = 1.0
    initial_cov: float = 0.0

    def __post_init__(self) -> None:
        if self.q_z < 0 or self.initial_cov < 0:
            raise ValueError("q_z and initial_cov must be non-negative")


@dataclass
class PixelTrajectory:
    pixel_id: str
    epochs: np.ndarray
    X: np.ndarray  # (m, 3)
    P: np.ndarray  # (m, 3, 3)

    def __len__(self) -> int:
        return self.epochs.size


@dataclass(frozen=True)
class VelocityEstimate:
    v: np.ndarray
    std: np.ndarray


def predict(state: FilterState, dt: float, model: ProcessModel) -> FilterState:
    """Time update: shift by ``dt * u`` horizontally and add ``Q``."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    gain = np.array([dt, dt, 0.0])
    return FilterState(state.X + gain * model.u, state.P + model.Q)


def update(pred: FilterState, sys: EpochSystem) -> FilterState:
    """Measurement update; an empty system returns the prediction unchanged."""
    if len(sys) == 0:
        return pred.copy()
    A, P = sys.A, pred.P
    S = A @ P @ A.T + np.diag(sys.R)
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise NumericalError(f"epoch {sys.k}: innovation covariance is singular (condition number {cond:.3g})")
    AP = A @ P
    # K^T = S^{-1} A P, solved through a Cholesky factorization
    Kt = scipy.linalg.cho_solve(scipy.linalg.cho_factor(S), AP)
    X = pred.X + Kt.T @ (sys.Y - A @ pred.X)
    Pn = P - Kt.T @ AP
    return FilterState(X, 0.5 * (Pn + Pn.T))


def assemble_epoch_system(
    series: Mapping[str, ResampledSeries],
    geometries: Mapping[str, SensorGeometry],
    k: int,
) -> EpochSystem:
    """Collect the sensors available at epoch ``k`` into one system (sorted sensor id)."""
    rows, ys, rs, ids = [], [], [], []
    for sensor in sorted(series):
        s = series[sensor]
        if not s.available[k]:
            continue
        if sensor not in geometries:
            raise DataError(f"no geometry defined for sensor {sensor!r}")
        if not s.var[k] > 0:
            raise DataError(f"pixel {s.pixel_id}, sensor {sensor}, epoch {k}: non-positive variance {s.var[k]!r}")
        rows.append(geometries[sensor].c)
        ys.append(s.dl[k])
        rs.append(s.var[k])
        ids.append(sensor)
    A = np.vstack(rows) if rows else np.zeros((0, 3))
    return EpochSystem(k, np.asarray(ys, dtype=np.float64), A, np.asarray(rs, dtype=np.float64), tuple(ids))


def run_pixel_filter(
    series: Mapping[str, ResampledSeries],
    prior: PixelVelocityPrior,
    geometries: Mapping[str, SensorGeometry],
    grid: TimeGrid,
    config: FilterConfig = FilterConfig(),
) -> PixelTrajectory:
    """Forward pass over every grid epoch for one pixel."""
    epochs = grid.epochs
    m = epochs.size
    for s in series.values():
        if s.dl.size != m:
            raise DataError(f"pixel {prior.pixel_id}: series for {s.sensor_id} has {s.dl.size} epochs, grid has {m}")

    X = np.zeros((m, 3))
    P = np.zeros((m, 3, 3))
    state = FilterState(np.zeros(3), config.initial_cov * np.eye(3))
    for k in range(m):
        if k > 0:
            dt = epochs[k] - epochs[k - 1]
            state = predict(state, dt, ProcessModel.from_prior(prior, dt, config.q_z))
        state = update(state, assemble_epoch_system(series, geometries, k))
        X[k], P[k] = state.X, state.P
    return PixelTrajectory(prior.pixel_id, epochs.copy(), X, P)


def run_filter_batch(
    epochs: np.ndarray,
    C: np.ndarray,
    dl: np.ndarray,
    var: np.ndarray,
    available: np.ndarray,
    velocity: np.ndarray,
    velocity_var: np.ndarray,
    config: FilterConfig = FilterConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Filter ``n`` pixels at once.

    Parameters
    ----------
    epochs : (m,) decimal years
    C : (s, 3) sensor unit vectors, rows in the sensor order used by ``dl``
    dl, var, available : (n, s, m) resampled LOS values, variances, flags
    velocity, velocity_var : (n, 2) horizontal priors and their variances

    Returns
    -------
    X : (n, m, 3) and P : (n, m, 3, 3)

    An unavailable sensor is encoded as a zero design row with unit variance,
    which leaves its Kalman gain column identically zero; the result equals
    dropping that row.
    """
    epochs = np.asarray(epochs, dtype=np.float64)
    avail = np.asarray(available, dtype=bool)
    n, s, m = avail.shape
    if np.any(avail & ~(var > 0)):
        bad = np.argwhere(avail & ~(var > 0))[0]
        raise DataError(f"pixel index {bad[0]}, sensor index {bad[1]}, epoch {bad[2]}: non-positive variance")

    A_all = np.where(avail.transpose(0, 2, 1)[..., None], C[None, None, :, :], 0.0)  # (n, m, s, 3)
    Y_all = np.where(avail, dl, 0.0).transpose(0, 2, 1)  # (n, m, s)
    R_all = np.where(avail, var, 1.0).transpose(0, 2, 1)

    u = np.zeros((n, 3))
    u[:, :2] = velocity
    X = np.zeros((n, 3))
    P = np.broadcast_to(config.initial_cov * np.eye(3), (n, 3, 3)).copy()
    X_out = np.empty((n, m, 3))
    P_out = np.empty((n, m, 3, 3))
    eye_s = np.eye(s)
    for k in range(m):
        if k > 0:
            dt = epochs[k] - epochs[k - 1]
            X = X + dt * u
            P = P.copy()
            P[:, 0, 0] += velocity_var[:, 0] * dt**2
            P[:, 1, 1] += velocity_var[:, 1] * dt**2
            P[:, 2, 2] += config.q_z * dt
        if s and avail[:, :, k].any():
            A = A_all[:, k]
            AP = A @ P
            S = AP @ A.transpose(0, 2, 1) + R_all[:, k, :, None] * eye_s
            w = np.linalg.eigvalsh(S)
            cond = w[:, -1] / w[:, 0]
            if np.any(~np.isfinite(cond) | (w[:, 0] <= 0) | (cond > MAX_CONDITION)):
                j = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
                raise NumericalError(f"epoch {k}, pixel index {j}: innovation covariance is singular (condition number {cond[j]:.3g})")
            Kt = np.linalg.solve(S, AP)  # (n, s, 3)
            innov = Y_all[:, k] - np.einsum("nsi,ni->ns", A, X)
            X = X + np.einsum("nsi,ns->ni", Kt, innov)
            P = P - np.einsum("nsi,nsj->nij", Kt, AP)
            P = 0.5 * (P + P.transpose(0, 2, 1))
        X_out[:, k] = X
        P_out[:, k] = P
    return X_out, P_out


def fit_trend(epochs: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OLS slope along axis 0 of ``values`` and its standard error.

    The standard error uses ``RSS / (m - 2)``; it is NaN when ``m == 2``.
    """
    t = np.asarray(epochs, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    m = t.size
    if m < 2:
        raise ValueError(f"need at least 2 epochs for a trend, got {m}")
    tc = t - t.mean()
    sxx = tc @ tc
    yc = y - y.mean(axis=0)
    slope = np.tensordot(tc, yc, axes=(0, 0)) / sxx
    resid = yc - np.multiply.outer(tc, slope)
    if m == 2:
        return slope, np.full(np.shape(slope), np.nan)
    rss = np.sum(resid**2, axis=0)
    return slope, np.sqrt(rss / (m - 2) / sxx)


def estimate_velocity(traj: PixelTrajectory) -> VelocityEstimate:
    """Linear-trend velocity (mm/yr) per ENU component, with standard errors."""
    if len(traj) < 2:
        raise ValueError(f"pixel {traj.pixel_id}: need at least 2 epochs, got {len(traj)}")
    v, std = fit_trend(traj.epochs, traj.X)
    return VelocityEstimate(v, std)
