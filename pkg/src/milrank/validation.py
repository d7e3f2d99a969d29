"""Input validation helpers used by the estimators and core operations."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError


def check_feature_array(X, *, dim: int | None = None, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a finite 2-D float64 array, optionally checking width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must have at least one row")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(
            f"{name} has {arr.shape[1]} columns, expected {dim}"
        )
    return arr


def check_score_vector(scores, *, length: int | None = None, name: str = "scores") -> np.ndarray:
    """Coerce to a 1-D float64 vector of values in [0, 1]."""
    vec = np.asarray(scores, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {vec.shape}")
    if length is not None and vec.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {vec.shape[0]}")
    if not np.isfinite(vec).all():
        raise ValueError(f"{name} contains non-finite values")
    if vec.size and (vec.min() < 0.0 or vec.max() > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return vec


def check_binary_labels(y, *, n: int | None = None, name: str = "y") -> np.ndarray:
    """Coerce to a 1-D int array of 0/1 labels."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    as_int = arr.astype(np.int64)
    if not np.array_equal(as_int, arr) or not np.isin(as_int, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 labels")
    return as_int
