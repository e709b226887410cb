"""Fuse multi-geometry InSAR LOS time series with GNSS horizontal velocities."""

__version__ = "0.1.0"
