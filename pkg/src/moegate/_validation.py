"""Input validation helpers shared by the estimators and the functional API."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

SIMPLEX_ATOL = 1e-9
CLAMP_ATOL = 1e-12


class SimplexError(ValueError):
    """Raised when an array is not a probability vector / stochastic table."""


class DomainError(ValueError):
    """Raised when a scalar argument lies outside the function's domain."""


def _clamp_nonneg(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise SimplexError(f"{what} has non-finite entries")
    if np.any(arr < -CLAMP_ATOL):
        raise SimplexError(f"{what} has negative entries (min {arr.min():.3g})")
    return np.where(arr < 0.0, 0.0, arr)


def as_prob_vector(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise SimplexError(f"probability vector must be 1-D and non-empty, got shape {arr.shape}")
    arr = _clamp_nonneg(arr, "probability vector")
    total = arr.sum()
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise SimplexError(f"probability vector sums to {total!r}, not 1")
    return arr


def as_joint(table) -> np.ndarray:
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise SimplexError(f"joint table must be 2-D and non-empty, got shape {arr.shape}")
    arr = _clamp_nonneg(arr, "joint table")
    total = arr.sum()
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise SimplexError(f"joint table sums to {total!r}, not 1")
    return arr


def as_channel(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise SimplexError(f"channel must be a non-empty matrix, got shape {arr.shape}")
    arr = _clamp_nonneg(arr, "channel")
    bad = np.abs(arr.sum(axis=1) - 1.0) > SIMPLEX_ATOL
    if np.any(bad):
        raise SimplexError(f"channel rows {np.flatnonzero(bad).tolist()} do not sum to 1")
    return arr


def as_distortion(d, n_inputs: int | None = None) -> np.ndarray:
    arr = check_array(d, dtype=float, ensure_2d=True)
    if np.any(arr < 0):
        raise ValueError("distortion entries must be non-negative")
    if n_inputs is not None and arr.shape[0] != n_inputs:
        raise ValueError(
            f"distortion has {arr.shape[0]} rows but the source has {n_inputs} symbols"
        )
    return arr


def check_features(X, d: int | None = None) -> np.ndarray:
    """2-D float feature matrix; a single vector is promoted to one row."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr = check_array(arr, dtype=float, ensure_2d=True, ensure_min_samples=0)
    if d is not None and arr.shape[1] != d:
        raise ValueError(f"expected inputs of dimension {d}, got {arr.shape[1]}")
    return arr


def check_unit_interval(value, name: str, *, open_left=False, open_right=False) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DomainError(f"{name} must be a finite real, got {value!r}")
    lo_ok = value > 0 if open_left else value >= 0
    hi_ok = value < 1 if open_right else value <= 1
    if not (lo_ok and hi_ok):
        raise DomainError(f"{name}={value!r} outside its allowed interval")
    return float(value)
