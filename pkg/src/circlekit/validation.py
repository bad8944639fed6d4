"""Input validation helpers used across the package.

All helpers coerce to ``float64`` ndarrays and raise
:class:`~circlekit.exceptions.InvalidArgumentError` on violated preconditions,
so the numerical code can assume clean inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import InvalidArgumentError


def check_points(points, dim: int, name: str = "points", min_points: int = 0) -> np.ndarray:
    """Coerce to a float64 ``(n, dim)`` array of finite coordinates."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidArgumentError(f"{name} must have shape (n, {dim}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if len(arr) < min_points:
        raise InvalidArgumentError(f"{name} needs at least {min_points} rows, got {len(arr)}")
    return arr


def check_vector(v, dim: int, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 ``(dim,)`` vector."""
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (dim,):
        raise InvalidArgumentError(f"{name} must have {dim} components, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_unit_vector(v, dim: int = 3, name: str = "vector", tol: float = 1e-6) -> np.ndarray:
    """Coerce to a unit vector, renormalizing within ``tol`` of unit length."""
    arr = check_vector(v, dim, name)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or abs(norm - 1.0) > tol:
        raise InvalidArgumentError(f"{name} must be a unit vector (norm {norm:.3g})")
    return arr / norm


def check_scalar(
    x,
    name: str = "value",
    *,
    positive: bool = False,
    nonnegative: bool = False,
) -> float:
    """Coerce to a finite float, optionally requiring a sign."""
    try:
        val = float(x)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} must be a real number, got {x!r}") from exc
    if not math.isfinite(val):
        raise InvalidArgumentError(f"{name} must be finite, got {val!r}")
    if positive and not val > 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {val!r}")
    if nonnegative and val < 0:
        raise InvalidArgumentError(f"{name} must be >= 0, got {val!r}")
    return val


def check_weights(
    weights,
    n: int,
    name: str = "weights",
    require_positive_sum: bool = True,
) -> np.ndarray:
    """Coerce to a finite, nonnegative ``(n,)`` weight vector."""
    arr = np.asarray(weights, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise InvalidArgumentError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if (arr < 0).any():
        raise InvalidArgumentError(f"{name} must be nonnegative")
    if require_positive_sum and not arr.sum() > 0:
        raise InvalidArgumentError(f"{name} must not be all zero")
    return arr


def check_indices(indices, n: int, name: str = "indices") -> np.ndarray:
    """Coerce to an int64 index array valid for a collection of size ``n``."""
    arr = np.asarray(indices)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.issubdtype(arr.dtype, np.floating) or not np.all(arr == arr.astype(np.int64)):
            raise InvalidArgumentError(f"{name} must be integers")
    arr = arr.astype(np.int64).reshape(-1)
    if arr.min() < 0 or arr.max() >= n:
        raise InvalidArgumentError(f"{name} out of range for collection of size {n}")
    return arr
