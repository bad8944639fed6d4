"""Point-cloud container with optional per-point weight and label channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .validation import check_indices, check_points

CIRCLE_BOUNDARY = 1
NON_CIRCLE = 0


@dataclass
class PointCloud:
    """Ordered 3D points with optional weights (``>= 0``) and 0/1 labels.

    The optional channels, when present, have the same length as ``points``.
    Label encoding: 1 = circle-boundary point, 0 = non-circle point.
    """

    points: np.ndarray
    weights: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.points = check_points(self.points, 3)
        n = len(self.points)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if len(w) != n:
                raise InvalidArgumentError(f"weights length {len(w)} != {n} points")
            if not np.isfinite(w).all() or (w < 0).any():
                raise InvalidArgumentError("weights must be finite and >= 0")
            self.weights = w
        if self.labels is not None:
            lab = np.asarray(self.labels).reshape(-1)
            if len(lab) != n:
                raise InvalidArgumentError(f"labels length {len(lab)} != {n} points")
            if not np.isin(lab, (NON_CIRCLE, CIRCLE_BOUNDARY)).all():
                raise InvalidArgumentError("labels must be 0 or 1")
            self.labels = lab.astype(np.int8)

    def __len__(self) -> int:
        return len(self.points)

    def select(self, indices) -> "PointCloud":
        """New cloud restricted to ``indices`` (channels sliced alongside)."""
        idx = check_indices(indices, len(self))
        return PointCloud(
            points=self.points[idx],
            weights=None if self.weights is None else self.weights[idx],
            labels=None if self.labels is None else self.labels[idx],
        )

    def bounding_box_diagonal(self) -> float:
        """Diagonal length of the axis-aligned bounding box (0 for < 2 points)."""
        if len(self) < 2:
            return 0.0
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.linalg.norm(span))
