"""scikit-learn style estimators wrapping the functional core.

These expose the fitting, detection, and extraction pipelines through the
familiar ``fit`` / ``predict`` / ``get_params`` protocol so they compose with
pipelines, grid search, and cloning. ``X`` is always a point array:
``(n, 2)`` in-plane points or ``(n, 3)`` world points.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .boundary import (
    DEFAULT_ANGLE_GAP,
    BoundaryParams,
    Detection,
    boundary_probabilities,
)
from .cloud import PointCloud
from .exceptions import InvalidArgumentError
from .extract import RansacParams, cluster_and_fit, refine_instance
from .fitting import CONSTRAINTS, fit_circle_2d, fit_circle_3d, geometric_refine
from .geometry import (
    Circle2D,
    Circle3D,
    average_nn_distance,
    distances_to_circle3d,
    project_to_plane,
)
from .validation import check_points, check_weights


def _check_xy(X):
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise InvalidArgumentError(f"X must have shape (n, 2) or (n, 3), got {arr.shape}")
    return check_points(arr, arr.shape[1], "X")


class CircleFitter(BaseEstimator):
    """Weighted algebraic circle fit as an estimator.

    Fits one circle to ``X``; 3D inputs are first projected onto their
    weighted-PCA plane. ``predict`` returns each point's distance to the
    fitted circle curve, which doubles as an outlier score.

    Parameters
    ----------
    constraint : {'hyper', 'pratt', 'taubin', 'kasa'}
    refine : bool
        Polish the algebraic fit with the geometric (orthogonal-distance)
        objective.
    normalize_weights : bool
        Rescale weights to sum to 1 before assembling the fit matrices.

    Attributes
    ----------
    center_ : (2,) or (3,) array
    radius_ : float
    normal_ : (3,) array, only for 3D input
    eta_ : float or None
    objective_ : float
    condition_ : str
    """

    def __init__(self, constraint: str = "hyper", refine: bool = False,
                 normalize_weights: bool = True):
        self.constraint = constraint
        self.refine = refine
        self.normalize_weights = normalize_weights

    def fit(self, X, y=None, sample_weight=None):
        X = _check_xy(X)
        if self.constraint not in CONSTRAINTS:
            raise InvalidArgumentError(f"constraint must be one of {CONSTRAINTS}")
        w = None if sample_weight is None else check_weights(sample_weight, len(X))
        if X.shape[1] == 2:
            circle, diag = fit_circle_2d(X, w, self.constraint,
                                         normalize_weights=self.normalize_weights)
            if self.refine:
                circle, diag = geometric_refine(X, w, init=circle)
            self.circle_ = circle
            self.center_ = circle.center
            self.normal_ = None
        else:
            circle3, diag = fit_circle_3d(X, None, self.constraint, weights=w,
                                          normalize_weights=self.normalize_weights)
            if self.refine:
                uv = project_to_plane(X, circle3.frame)
                circle2, diag = geometric_refine(uv, w, init=circle3.circle)
                circle3 = Circle3D(frame=circle3.frame, circle=circle2)
            self.circle_ = circle3
            self.center_ = circle3.center
            self.normal_ = circle3.normal
        self.radius_ = float(self.circle_.radius)
        self.eta_ = diag.eta
        self.objective_ = diag.objective
        self.condition_ = diag.condition
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        """Distance from each point to the fitted circle curve."""
        X = _check_xy(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"X has {X.shape[1]} features, fit saw {self.n_features_in_}"
            )
        if isinstance(self.circle_, Circle2D):
            return np.abs(np.linalg.norm(X - self.circle_.center, axis=1) - self.circle_.radius)
        return distances_to_circle3d(X, self.circle_)

    def score(self, X, y=None) -> float:
        """Negative mean squared distance to the fitted circle (higher is better)."""
        d = self.predict(X)
        return -float((d**2).mean())


class BoundaryPointDetector(BaseEstimator):
    """Angle-gap circle-boundary point detector as an estimator.

    ``fit`` computes per-point boundary probabilities over the cloud;
    ``fit_predict`` returns the 0/1 flags. ``query_radius=None`` picks
    four times the cloud's average nearest-neighbor distance.
    """

    def __init__(self, query_radius: float | None = None,
                 angle_gap_threshold: float = DEFAULT_ANGLE_GAP,
                 min_neighbors: int = 4):
        self.query_radius = query_radius
        self.angle_gap_threshold = angle_gap_threshold
        self.min_neighbors = min_neighbors

    def _params_for(self, X) -> BoundaryParams:
        radius = self.query_radius
        if radius is None:
            radius = 4.0 * average_nn_distance(X)
        return BoundaryParams(
            query_radius=radius,
            angle_gap_threshold=self.angle_gap_threshold,
            min_neighbors=self.min_neighbors,
        )

    def fit(self, X, y=None):
        X = check_points(X, 3, "X", min_points=1)
        params = self._params_for(X)
        self.probabilities_ = boundary_probabilities(X, params)
        self.labels_ = (
            self.probabilities_ > params.angle_gap_threshold / (2.0 * np.pi)
        ).astype(np.int8)
        self.indices_ = np.flatnonzero(self.labels_)
        self.n_features_in_ = 3
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).labels_


class CircleExtractor(BaseEstimator):
    """Detect-then-cluster multi-circle extraction as an estimator.

    ``fit`` detects boundary candidates (or takes external per-point
    probabilities via ``sample_weight``), clusters them into circle instances
    with sequential RANSAC, and fits each instance. ``fit_predict`` labels
    every point with its instance id (``-1`` = unassigned).

    Attributes
    ----------
    instances_ : list of CircleInstance
    labels_ : (n,) int array of instance ids
    """

    def __init__(self, constraint: str = "hyper", query_radius: float | None = None,
                 angle_gap_threshold: float = DEFAULT_ANGLE_GAP, min_neighbors: int = 4,
                 iterations: int = 200, inlier_tol: float | None = None,
                 min_inliers: int = 6, max_circles: int = 32,
                 max_radius: float | None = None, sample_radius: float | None = None,
                 min_arc_coverage: float = 0.0, max_rms_ratio: float | None = None,
                 detection_threshold: float = 0.5, refine: bool = False, seed: int = 0):
        self.constraint = constraint
        self.query_radius = query_radius
        self.angle_gap_threshold = angle_gap_threshold
        self.min_neighbors = min_neighbors
        self.iterations = iterations
        self.inlier_tol = inlier_tol
        self.min_inliers = min_inliers
        self.max_circles = max_circles
        self.max_radius = max_radius
        self.sample_radius = sample_radius
        self.min_arc_coverage = min_arc_coverage
        self.max_rms_ratio = max_rms_ratio
        self.detection_threshold = detection_threshold
        self.refine = refine
        self.seed = seed

    def fit(self, X, y=None, sample_weight=None):
        X = check_points(X, 3, "X")
        cloud = PointCloud(points=X)
        if sample_weight is not None:
            probs = check_weights(sample_weight, len(X), require_positive_sum=False)
            idx = np.flatnonzero(probs >= self.detection_threshold)
            detection = Detection(indices=idx, probabilities=np.clip(probs[idx], 0.0, 1.0))
            cloud.weights = np.where(probs == 0.0, 1e-4, probs)
        elif len(X) == 0:
            detection = Detection(indices=np.zeros(0, dtype=np.int64),
                                  probabilities=np.zeros(0))
        else:
            detector = BoundaryPointDetector(
                query_radius=self.query_radius,
                angle_gap_threshold=self.angle_gap_threshold,
                min_neighbors=self.min_neighbors,
            ).fit(X)
            detection = Detection(
                indices=detector.indices_,
                probabilities=detector.probabilities_[detector.indices_],
            )
        params = RansacParams(
            iterations=self.iterations,
            inlier_tol=self.inlier_tol,
            min_inliers=self.min_inliers,
            max_circles=self.max_circles,
            seed=self.seed,
            max_radius=self.max_radius,
            sample_radius=self.sample_radius,
            min_arc_coverage=self.min_arc_coverage,
            max_rms_ratio=self.max_rms_ratio,
        )
        instances = cluster_and_fit(cloud, detection, params, self.constraint)
        if self.refine:
            instances = [refine_instance(cloud, inst) for inst in instances]
        self.instances_ = instances
        self.labels_ = np.full(len(X), -1, dtype=np.int64)
        for i, inst in enumerate(instances):
            self.labels_[inst.inlier_indices] = i
        self.n_features_in_ = 3
        return self

    def fit_predict(self, X, y=None, sample_weight=None) -> np.ndarray:
        return self.fit(X, sample_weight=sample_weight).labels_
