"""Input checks shared by the estimator classes and the command line."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError, UsageError
from .simulate import SiteSet, SpatialSample

__all__ = ["check_observations", "check_coords", "as_sample", "check_lags"]


def check_observations(X, min_rows=2, positive=False):
    """``(N, D)`` finite float array with at least ``min_rows`` rows and two columns."""
    try:
        X = np.asarray(X, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"observations are not numeric: {exc}") from None
    if X.ndim != 2:
        raise DataError(f"observations must be 2-D, got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise DataError(f"need at least {min_rows} replicates, got {X.shape[0]}")
    if X.shape[1] < 2:
        raise DataError("need at least two sites")
    if not np.all(np.isfinite(X)):
        raise DataError("observations contain NaN or infinite values")
    if positive and np.any(X <= 0):
        raise DataError("observations must be strictly positive")
    return X


def check_coords(coords, n_sites=None):
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise DataError(f"coordinates must have shape (D, 2), got {coords.shape}")
    if n_sites is not None and coords.shape[0] != n_sites:
        raise DataError(f"{coords.shape[0]} coordinates for {n_sites} sites")
    if not np.all(np.isfinite(coords)):
        raise DataError("coordinates must be finite")
    return coords


def as_sample(X, coords=None, margin="raw") -> SpatialSample:
    """Accept a :class:`SpatialSample` or an array plus coordinates."""
    if isinstance(X, SpatialSample):
        if coords is not None:
            raise UsageError("coordinates are already part of the SpatialSample")
        return X
    if coords is None:
        raise UsageError("site coordinates are required with array input")
    X = check_observations(X)
    return SpatialSample(SiteSet.from_coords(check_coords(coords, X.shape[1])), X, margin)


def check_lags(h):
    h = np.asarray(h, dtype=float)
    if np.any(~np.isfinite(h)) or np.any(h < 0):
        raise DataError("lags must be finite and nonnegative")
    return h
