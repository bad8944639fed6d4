"""Circle-boundary candidate detection and external weight ingestion.

The built-in detector is a classical angle-gap criterion: a point whose
in-plane neighbors leave a large angular gap around it sits on a boundary.
It stands in for learned classifiers, whose per-point probabilities can be
ingested from a file instead via :func:`load_external_detection`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .exceptions import DegenerateGeometryError, InvalidArgumentError
from .geometry import (
    SpatialHashGrid,
    align_to_principal_frame,
    project_to_plane,
    rasterize_grid,
    weighted_pca_plane,
)
from .io import read_weights_file, write_xyz
from .validation import check_indices, check_scalar, check_vector

#: added to zero probabilities when ingesting external weight files
WEIGHT_EPSILON = 1e-4

DEFAULT_ANGLE_GAP = 0.75 * math.pi

#: fixed patch sizes for the local/global neighborhood pair
LOCAL_PATCH_SIZE = 16
GLOBAL_PATCH_SIZE = 128


@dataclass(frozen=True)
class BoundaryParams:
    """Knobs of the angle-gap detector.

    ``query_radius`` bounds the neighborhood (a quarter of the circle-radius
    hyper-parameter works well); points whose largest angular gap exceeds
    ``angle_gap_threshold`` are flagged; points with fewer than
    ``min_neighbors`` neighbors are flagged unconditionally.
    """

    query_radius: float
    angle_gap_threshold: float = DEFAULT_ANGLE_GAP
    min_neighbors: int = 4

    def __post_init__(self):
        check_scalar(self.query_radius, "query_radius", positive=True)
        thr = check_scalar(self.angle_gap_threshold, "angle_gap_threshold", positive=True)
        if not thr < 2.0 * math.pi:
            raise InvalidArgumentError("angle_gap_threshold must be in (0, 2*pi)")
        if int(self.min_neighbors) < 3:
            raise InvalidArgumentError("min_neighbors must be >= 3")


@dataclass(frozen=True)
class Detection:
    """Flagged boundary candidates: cloud indices with their probabilities."""

    indices: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        prob = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if len(idx) != len(prob):
            raise InvalidArgumentError(
                f"indices ({len(idx)}) and probabilities ({len(prob)}) differ in length"
            )
        if len(prob) and (not np.isfinite(prob).all() or prob.min() < 0 or prob.max() > 1):
            raise InvalidArgumentError("probabilities must be finite and within [0, 1]")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probabilities", prob)

    def __len__(self) -> int:
        return len(self.indices)


def boundary_probabilities(cloud, params: BoundaryParams) -> np.ndarray:
    """Per-point boundary probability ``max_gap / 2*pi`` for every cloud point.

    Sparse points (< ``min_neighbors`` neighbors) get probability 1; points
    whose neighborhood is too degenerate for a local plane get 0.
    """
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=float)
    n = len(points)
    probs = np.zeros(n)
    if n == 0:
        return probs
    index = SpatialHashGrid(points, cell_size=params.query_radius)
    two_pi = 2.0 * math.pi
    for i in range(n):
        idx = index.query_ball(points[i], params.query_radius)
        neighbors = idx[idx != i]
        if len(neighbors) < params.min_neighbors:
            probs[i] = 1.0
            continue
        patch = points[idx]
        try:
            frame = weighted_pca_plane(patch)
        except DegenerateGeometryError:
            probs[i] = 0.0
            continue
        uv = project_to_plane(points[neighbors], frame)
        q = project_to_plane(points[i][None, :], frame)[0]
        d = uv - q
        lengths = np.hypot(d[:, 0], d[:, 1])
        d = d[lengths > 1e-14]
        if len(d) < params.min_neighbors:
            probs[i] = 1.0
            continue
        angles = np.sort(np.arctan2(d[:, 1], d[:, 0]))
        gaps = np.diff(angles)
        wrap = two_pi - (angles[-1] - angles[0])
        probs[i] = max(float(gaps.max(initial=0.0)), wrap) / two_pi
    return probs


def detect_boundary_angle_gap(cloud, params: BoundaryParams) -> Detection:
    """Run the angle-gap detector and return the flagged points.

    A point is flagged iff its largest angular gap exceeds
    ``params.angle_gap_threshold`` (sparse points count as gap ``2*pi``).
    """
    points = getattr(cloud, "points", cloud)
    if len(points) == 0:
        raise InvalidArgumentError("cloud is empty")
    probs = boundary_probabilities(cloud, params)
    mask = probs > params.angle_gap_threshold / (2.0 * math.pi)
    idx = np.flatnonzero(mask)
    return Detection(indices=idx, probabilities=probs[idx])


def load_external_detection(cloud: PointCloud, path, *, threshold: float = 0.5,
                            epsilon: float = WEIGHT_EPSILON) -> Detection:
    """Ingest per-point probabilities from a file and attach them as weights.

    The file carries one real per cloud point (plain text or the PLY
    ``weight`` property). Probabilities at or above ``threshold`` become the
    detected set; the raw values, with ``epsilon`` substituted for zeros, are
    stored on ``cloud.weights`` for downstream weighted fitting.

    Raises
    ------
    FormatError
        On a length mismatch (message carries both counts).
    """
    values = read_weights_file(path, n_expected=len(cloud))
    if not np.isfinite(values).all() or (values < 0).any():
        raise InvalidArgumentError(f"{path}: probabilities must be finite and >= 0")
    weights = np.where(values == 0.0, epsilon, values)
    cloud.weights = weights
    idx = np.flatnonzero(values >= threshold)
    return Detection(indices=idx, probabilities=np.clip(values[idx], 0.0, 1.0))


def detection_from_labels(cloud: PointCloud) -> Detection:
    """Detection built from the cloud's ground-truth labels (probability 1)."""
    if cloud.labels is None:
        raise InvalidArgumentError("cloud has no labels channel")
    idx = np.flatnonzero(cloud.labels == 1)
    return Detection(indices=idx, probabilities=np.ones(len(idx)))


def extract_patch_pair(cloud, query, r_hyper: float, rng=None):
    """Extract the four query-centered patches used around one point.

    Returns ``(small, big, local, global)`` PointClouds, translated so the
    query point sits at the origin. ``small`` and ``big`` keep whatever ball
    queries at 3x and 5x ``r_hyper`` find; ``local`` and ``global`` (balls at
    0.25x and 2x) are brought to exactly 16 and 128 points by padding with
    the origin or by seeded uniform downsampling. Padded rows carry weight 0
    so downstream fits ignore them; real rows carry weight 1.
    """
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=float)
    q = check_vector(query, 3, "query")
    r = check_scalar(r_hyper, "r_hyper", positive=True)
    rng = np.random.default_rng(rng)
    index = SpatialHashGrid(points, cell_size=r)

    def gather(scale):
        return index.query_ball(q, scale * r)

    def plain(idx):
        return PointCloud(points=points[idx] - q)

    def fixed(idx, size):
        pts = points[idx] - q
        if len(pts) > size:
            keep = np.sort(rng.choice(len(pts), size=size, replace=False))
            return PointCloud(points=pts[keep], weights=np.ones(size))
        pad = size - len(pts)
        padded = np.vstack((pts, np.zeros((pad, 3))))
        weights = np.concatenate((np.ones(len(pts)), np.zeros(pad)))
        return PointCloud(points=padded, weights=weights)

    small = plain(gather(3.0))
    big = plain(gather(5.0))
    local = fixed(gather(0.25), LOCAL_PATCH_SIZE)
    global_ = fixed(gather(2.0), GLOBAL_PATCH_SIZE)
    return small, big, local, global_


def patch_projection_maps(local: PointCloud, global_: PointCloud, r_hyper: float):
    """11x11 binary occupancy maps of an aligned local/global patch pair.

    Both patches (query-centered, as produced by :func:`extract_patch_pair`)
    are rotated into the global patch's principal frame and rasterized onto
    the plane; grid extents default to each patch's own query radius
    (0.25x and 2x ``r_hyper``). Padded points (weight 0) are dropped first.

    Returns
    -------
    (local_grid, global_grid) : pair of OccupancyGrid
    """
    r = check_scalar(r_hyper, "r_hyper", positive=True)

    def real_points(patch):
        if patch.weights is None:
            return patch.points
        return patch.points[patch.weights > 0]

    local_pts = real_points(local)
    global_pts = real_points(global_)
    aligned_local, aligned_global = align_to_principal_frame(local_pts, global_pts)
    local_grid = rasterize_grid(aligned_local[:, :2], extent=0.25 * r)
    global_grid = rasterize_grid(aligned_global[:, :2], extent=2.0 * r)
    return local_grid, global_grid


def export_patch_pairs(cloud, queries, r_hyper: float, out_dir, rng=None) -> list[Path]:
    """Write ``pair_<k>_{small,big,local,global}.xyz`` files for each query point.

    ``queries`` are indices into the cloud. Returns the written paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = getattr(cloud, "points", cloud)
    idx = check_indices(queries, len(points))
    rng = np.random.default_rng(rng)
    written = []
    for k, qi in enumerate(idx):
        patches = extract_patch_pair(cloud, points[qi], r_hyper, rng=rng)
        for name, patch in zip(("small", "big", "local", "global"), patches):
            path = out_dir / f"pair_{k}_{name}.xyz"
            write_xyz(path, patch)
            written.append(path)
    return written
