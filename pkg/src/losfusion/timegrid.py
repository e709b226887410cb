"""Union acquisition grid and linear resampling of LOS series onto it."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

VARIANCE_MODES = ("paper", "standard")


def parse_date(value) -> dt.date:
    """Accept a ``datetime.date``, or a YYYYMMDD string/integer."""
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    text = str(value).strip()
    try:
        return dt.datetime.strptime(text, "%Y%m%d").date()
    except ValueError:
        raise DataError(f"invalid date {value!r}, expected YYYYMMDD") from None


def decimal_year(value) -> float:
    """Decimal year at 00:00 UTC of the given date: ``year + (doy - 1) / 365.25``."""
    d = parse_date(value)
    return d.year + (d.timetuple().tm_yday - 1) / 365.25


def date_from_decimal_year(value: float) -> dt.date:
    """Inverse of :func:`decimal_year` for epochs produced by it."""
    year = int(np.floor(value + 1e-9))
    doy = int(round((value - year) * 365.25)) + 1
    return dt.date(year, 1, 1) + dt.timedelta(days=doy - 1)


@dataclass(frozen=True)
class TimeGrid:
    """Sorted union of acquisition epochs across sensors.

    ``availability[s][k]`` is True when epoch ``k`` lies inside the acquisition
    span of sensor ``s`` (interpolation is possible there).
    """

    epochs: np.ndarray
    dates: tuple[dt.date, ...] = ()
    availability: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        epochs = np.asarray(self.epochs, dtype=np.float64)
        if epochs.ndim != 1 or epochs.size == 0:
            raise DataError("time grid needs a non-empty 1-D epoch vector")
        if np.any(np.diff(epochs) <= 0):
            raise DataError("time grid epochs must be strictly increasing")
        object.__setattr__(self, "epochs", epochs)

    def __len__(self) -> int:
        return self.epochs.size

    @property
    def sensors(self) -> list[str]:
        return sorted(self.availability)


def build_union_grid(date_lists: Mapping[str, Iterable]) -> TimeGrid:
    """Build the union grid from per-sensor acquisition date lists."""
    if not date_lists:
        raise DataError("no acquisition date lists supplied")
    per_sensor: dict[str, list[dt.date]] = {}
    for sensor, dates in date_lists.items():
        parsed = sorted({parse_date(d) for d in dates})
        if not parsed:
            raise DataError(f"sensor {sensor!r} has an empty acquisition list")
        per_sensor[sensor] = parsed

    union = sorted(set().union(*per_sensor.values()))
    epochs = np.array([decimal_year(d) for d in union])
    availability = {}
    for sensor, dates in per_sensor.items():
        lo, hi = decimal_year(dates[0]), decimal_year(dates[-1])
        availability[sensor] = (epochs >= lo) & (epochs <= hi)
    return TimeGrid(epochs=epochs, dates=tuple(union), availability=availability)


def grid_from_epochs(epochs: Sequence[float]) -> TimeGrid:
    """Grid from raw decimal-year epochs, without sensor bookkeeping."""
    return TimeGrid(epochs=np.asarray(epochs, dtype=np.float64))


@dataclass(frozen=True)
class LosSeries:
    """LOS displacement (mm) and variance (mm^2) samples of one pixel and sensor."""

    sensor_id: str
    pixel_id: str
    epochs: np.ndarray
    dl: np.ndarray
    var: np.ndarray

    def __post_init__(self) -> None:
        epochs = np.asarray(self.epochs, dtype=np.float64)
        dl = np.asarray(self.dl, dtype=np.float64)
        var = np.asarray(self.var, dtype=np.float64)
        if not (epochs.shape == dl.shape == var.shape) or epochs.ndim != 1:
            raise DataError(f"pixel {self.pixel_id}: epoch, value and variance lengths differ")
        if np.any(np.diff(epochs) <= 0):
            raise DataError(f"pixel {self.pixel_id}: epochs are not strictly increasing")
        if np.any(var < 0) or not np.all(np.isfinite(var)):
            raise DataError(f"pixel {self.pixel_id}: negative or non-finite variance")
        if not np.all(np.isfinite(dl)):
            raise DataError(f"pixel {self.pixel_id}: non-finite LOS value")
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "dl", dl)
        object.__setattr__(self, "var", var)

    def __len__(self) -> int:
        return self.epochs.size


@dataclass(frozen=True)
class ResampledSeries:
    """A LOS series resampled onto a :class:`TimeGrid`.

    Values and variances are NaN wherever ``available`` is False.
    """

    sensor_id: str
    pixel_id: str
    dl: np.ndarray
    var: np.ndarray
    available: np.ndarray


def interpolate_series(series: LosSeries, grid: TimeGrid | Sequence[float], mode: str = "paper") -> ResampledSeries:
    """Linearly interpolate one LOS series onto the grid epochs.

    With ``f = (t_c - t_a) / (t_b - t_a)`` for the bracketing samples ``a`` and
    ``b``, the value is ``f (dl_b - dl_a) + dl_a``. The variance is

    * ``mode="paper"``: ``(f s_b)^2 + (f s_a)^2 + s_a^2``
    * ``mode="standard"``: ``f^2 s_b^2 + (1 - f)^2 s_a^2``

    Grid epochs outside the series span are flagged unavailable; nothing is
    extrapolated. A grid epoch that coincides with an acquisition returns the
    acquired value exactly.
    """
    if mode not in VARIANCE_MODES:
        raise ValueError(f"variance mode must be one of {VARIANCE_MODES}, got {mode!r}")
    if len(series) < 2:
        raise DataError(f"pixel {series.pixel_id} ({series.sensor_id}): need at least 2 samples, got {len(series)}")

    t = series.epochs
    tc = grid.epochs if isinstance(grid, TimeGrid) else np.asarray(grid, dtype=np.float64)
    available = (tc >= t[0]) & (tc <= t[-1])

    # left bracket index with t_a <= t_c; the final sample uses the last interval
    ia = np.clip(np.searchsorted(t, tc, side="right") - 1, 0, t.size - 2)
    ib = ia + 1
    f = (tc - t[ia]) / (t[ib] - t[ia])

    dl_a, dl_b = series.dl[ia], series.dl[ib]
    value = f * (dl_b - dl_a) + dl_a
    value = np.where(f == 1.0, dl_b, value)

    var_a, var_b = series.var[ia], series.var[ib]
    if mode == "paper":
        var = f**2 * var_b + f**2 * var_a + var_a
    else:
        var = f**2 * var_b + (1.0 - f) ** 2 * var_a

    value = np.where(available, value, np.nan)
    var = np.where(available, var, np.nan)
    return ResampledSeries(series.sensor_id, series.pixel_id, value, var, available)


@dataclass
class ResampleResult:
    """Outcome of resampling one sensor's pixel set; failures keyed by pixel id."""

    series: dict[str, ResampledSeries]
    errors: dict[str, str]


def resample_dataset(
    series: Mapping[str, LosSeries] | Iterable[LosSeries], grid: TimeGrid, mode: str = "paper"
) -> ResampleResult:
    """Apply :func:`interpolate_series` to every pixel, collecting per-pixel failures."""
    items = series.values() if isinstance(series, Mapping) else series
    out: dict[str, ResampledSeries] = {}
    errors: dict[str, str] = {}
    for s in items:
        try:
            out[s.pixel_id] = interpolate_series(s, grid, mode)
        except DataError as exc:
            errors[s.pixel_id] = str(exc)
    return ResampleResult(out, errors)
