"""Multi-circle extraction: sequential RANSAC over detected boundary points.

Each round samples point triples from the remaining detected pool, keeps the
candidate circle with the most inliers, refits it on all of its inliers with
the detection probabilities as fitting weights, and removes those inliers
from the pool. Circles rarely overlap on engineering parts, so this greedy
scheme segments instances without knowing their count in advance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .boundary import Detection
from .exceptions import DegenerateGeometryError, InvalidArgumentError
from .fitting import FitDiagnostics, fit_circle_3d, geometric_refine
from .geometry import (
    Circle3D,
    SpatialHashGrid,
    average_nn_distance,
    distances_to_circle3d,
    project_to_plane,
)
from .validation import check_scalar


@dataclass(frozen=True)
class RansacParams:
    """Sequential-RANSAC knobs.

    ``inlier_tol`` defaults (when ``None``) to twice the cloud's average
    nearest-neighbor distance, which tracks the sampling density the way the
    labeling threshold does. ``max_radius`` rejects candidate circles larger
    than a cap (use ~5x the circle-radius hyper-parameter); ``sample_radius``
    draws the second and third sample points near the first, which makes
    triples from a single circle far more likely in multi-circle scenes.
    ``None`` for either disables the behavior. Two quality gates reject
    candidates that merely stitch together unrelated boundary points (plate
    edges, corners): ``min_arc_coverage`` (fraction of 32 angular bins the
    inliers must occupy) discards support hugging a short arc, and
    ``max_rms_ratio`` (RMS inlier distance as a fraction of ``inlier_tol``)
    discards loose fits whose residuals fill the whole tolerance band.
    0 / ``None`` disable the gates.
    """

    iterations: int = 200
    inlier_tol: float | None = None
    min_inliers: int = 6
    max_circles: int = 32
    seed: int = 0
    max_radius: float | None = None
    sample_radius: float | None = None
    min_arc_coverage: float = 0.0
    max_rms_ratio: float | None = None

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise InvalidArgumentError("iterations must be >= 1")
        if self.inlier_tol is not None:
            check_scalar(self.inlier_tol, "inlier_tol", positive=True)
        if int(self.min_inliers) < 3:
            raise InvalidArgumentError("min_inliers must be >= 3")
        if self.max_radius is not None:
            check_scalar(self.max_radius, "max_radius", positive=True)
        if self.sample_radius is not None:
            check_scalar(self.sample_radius, "sample_radius", positive=True)
        cov = check_scalar(self.min_arc_coverage, "min_arc_coverage", nonnegative=True)
        if cov > 1.0:
            raise InvalidArgumentError("min_arc_coverage must be within [0, 1]")
        if self.max_rms_ratio is not None:
            check_scalar(self.max_rms_ratio, "max_rms_ratio", positive=True)


@dataclass(frozen=True)
class CircleInstance:
    """One extracted circle with the cloud indices that voted for it."""

    circle: Circle3D
    inlier_indices: np.ndarray
    diagnostics: FitDiagnostics

    def __post_init__(self):
        object.__setattr__(
            self, "inlier_indices", np.asarray(self.inlier_indices, dtype=np.int64).reshape(-1)
        )


def _collinear(p0, p1, p2, tol: float = 1e-10) -> bool:
    a = p1 - p0
    b = p2 - p0
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return True
    return np.linalg.norm(np.cross(a, b)) <= tol * na * nb


def _arc_coverage(points, circle: Circle3D, bins: int = 32) -> float:
    """Fraction of angular bins around the circle occupied by the points."""
    uv = project_to_plane(points, circle.frame) - circle.circle.center
    angles = np.arctan2(uv[:, 1], uv[:, 0])
    occupied = np.unique(((angles + np.pi) / (2.0 * np.pi) * bins).astype(int) % bins)
    return len(occupied) / bins


def _sample_triple(rng, pool_points, local_index):
    """Three distinct positions into the active pool, optionally locally."""
    m = len(pool_points)
    if local_index is None:
        return rng.choice(m, size=3, replace=False)
    first = int(rng.integers(m))
    near = local_index.query_ball(pool_points[first], local_index.cell_size)
    near = near[near != first]
    if len(near) < 2:
        return None
    rest = rng.choice(len(near), size=2, replace=False)
    return np.array([first, near[rest[0]], near[rest[1]]])


def cluster_and_fit(cloud, detection: Detection, params: RansacParams | None = None,
                    kind: str = "hyper") -> list[CircleInstance]:
    """Segment detected boundary points into circle instances and fit each.

    Runs sequential RANSAC over the detected indices: the best triple-seeded
    candidate per round claims every detected point within ``inlier_tol`` of
    its curve, gets refit on those points with the detection probabilities as
    weights, and its inliers leave the pool. Instances come back sorted by
    descending inlier count; the whole procedure is a pure function of
    ``(cloud, detection, params, kind)`` including the seed.

    Fewer than 3 detected points yield an empty list (not an error).
    """
    params = params or RansacParams()
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=float)
    if len(detection) < 3:
        return []
    tol = params.inlier_tol
    if tol is None:
        tol = 2.0 * average_nn_distance(points)
    rng = np.random.default_rng(params.seed)
    prob_of = dict(zip(detection.indices.tolist(), detection.probabilities.tolist()))
    pool = detection.indices.copy()
    instances: list[CircleInstance] = []

    while len(instances) < params.max_circles and len(pool) >= max(3, params.min_inliers):
        pool_pts = points[pool]
        local_index = None
        if params.sample_radius is not None:
            local_index = SpatialHashGrid(pool_pts, cell_size=params.sample_radius)
        best_count = 0
        best_mask = None
        best_circle = None
        for _ in range(params.iterations):
            triple = _sample_triple(rng, pool_pts, local_index)
            if triple is None:
                continue
            p0, p1, p2 = pool_pts[triple]
            if _collinear(p0, p1, p2):
                continue
            try:
                candidate, _ = fit_circle_3d(points, pool[triple], kind)
            except DegenerateGeometryError:
                continue
            if params.max_radius is not None and candidate.radius > params.max_radius:
                continue
            dist = distances_to_circle3d(pool_pts, candidate)
            mask = dist <= tol
            count = int(mask.sum())
            if count > best_count:
                if (params.max_rms_ratio is not None and count
                        and math.sqrt(float((dist[mask] ** 2).mean()))
                        > params.max_rms_ratio * tol):
                    continue
                if (params.min_arc_coverage > 0.0
                        and _arc_coverage(pool_pts[mask], candidate) < params.min_arc_coverage):
                    continue
                best_count, best_mask, best_circle = count, mask, candidate
        if best_circle is None or best_count < params.min_inliers:
            break
        inliers = pool[best_mask]
        weights = np.array([prob_of[int(i)] for i in inliers])
        if not weights.sum() > 0:
            weights = None
        try:
            refit, diag = fit_circle_3d(cloud, inliers, kind, weights=weights)
        except DegenerateGeometryError:
            refit, diag = best_circle, FitDiagnostics(eta=None, objective=float("inf"),
                                                      condition="near_degenerate")
        instances.append(CircleInstance(circle=refit, inlier_indices=inliers, diagnostics=diag))
        pool = pool[~best_mask]

    instances.sort(key=lambda inst: -len(inst.inlier_indices))
    return instances


def refine_instance(cloud, instance: CircleInstance, weights=None) -> CircleInstance:
    """Geometric (orthogonal-distance) polish of one instance, in its own plane.

    ``weights`` defaults to the cloud's weight channel over the inliers, else
    uniform. The plane frame is kept; only the in-plane circle moves.
    """
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=float)
    idx = instance.inlier_indices
    if weights is None:
        channel = getattr(cloud, "weights", None)
        weights = channel[idx] if channel is not None else None
    uv = project_to_plane(points[idx], instance.circle.frame)
    circle2, diag = geometric_refine(uv, weights, init=instance.circle.circle)
    refined = Circle3D(frame=instance.circle.frame, circle=circle2)
    return replace(instance, circle=refined, diagnostics=diag)


def match_instances(found, truth, center_tol: float) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of found to truth circles by center distance.

    Pairs are claimed in ascending center-distance order; candidates farther
    apart than ``center_tol`` stay unmatched. Accepts ``Circle3D`` lists or
    ``CircleInstance`` lists on the ``found`` side.

    Returns
    -------
    list of (found_index, truth_index)
    """
    check_scalar(center_tol, "center_tol", positive=True)
    found_circles = [f.circle if isinstance(f, CircleInstance) else f for f in found]
    candidates = []
    for i, fc in enumerate(found_circles):
        for j, tc in enumerate(truth):
            d = float(np.linalg.norm(fc.center - tc.center))
            if d <= center_tol:
                candidates.append((d, i, j))
    candidates.sort()
    used_found: set[int] = set()
    used_truth: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_found or j in used_truth:
            continue
        used_found.add(i)
        used_truth.add(j)
        pairs.append((i, j))
    return pairs
