"""Input-validation helpers shared by the functional ops and estimator API."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def check_points_array(X, dim: int, min_points: int = 1, name: str = "X") -> np.ndarray:
    """Coerce to a finite float64 (n, dim) array or raise ParameterError."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == dim:
        X = X.reshape(1, dim)
    if X.ndim != 2 or X.shape[1] != dim:
        raise ParameterError(f"{name} must have shape (n, {dim}), got {X.shape}")
    if X.shape[0] < min_points:
        raise ParameterError(f"{name} needs at least {min_points} points, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise ParameterError(f"{name} contains non-finite values")
    return X


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ParameterError(f"{name} must be > 0, got {value}")
    return value


def check_fraction(value, name: str) -> float:
    """Validate a value in (0, 1]."""
    value = float(value)
    if not 0 < value <= 1:
        raise ParameterError(f"{name} must be in (0, 1], got {value}")
    return value


def check_index_set(indices, n: int, name: str = "indices") -> np.ndarray:
    """Coerce to a sorted, unique int index array bounded by n."""
    idx = np.unique(np.asarray(indices, dtype=np.int64)).reshape(-1)
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ParameterError(f"{name} out of range for a cloud of {n} points")
    return idx
