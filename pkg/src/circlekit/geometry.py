"""Point-cloud geometry: radius search, weighted-PCA frames, projections, grids.

Everything here is a pure function over immutable inputs; the spatial hash
index is built once and only read afterwards, so concurrent queries are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import DegenerateGeometryError, InvalidArgumentError
from .validation import check_points, check_scalar, check_vector, check_weights

GRID_RESOLUTION = 11

_FRAME_TOL = 1e-12


@dataclass(frozen=True)
class PlaneFrame:
    """Right-handed orthonormal frame spanning a plane in 3D.

    ``u_axis`` and ``v_axis`` span the plane, ``normal`` completes the triad
    (``u x v = normal``). Coordinates measured from ``origin``.
    """

    origin: np.ndarray
    normal: np.ndarray
    u_axis: np.ndarray
    v_axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", check_vector(self.origin, 3, "origin"))
        for name in ("normal", "u_axis", "v_axis"):
            object.__setattr__(self, name, check_vector(getattr(self, name), 3, name))
        n, u, v = self.normal, self.u_axis, self.v_axis
        for name, axis in (("normal", n), ("u_axis", u), ("v_axis", v)):
            if abs(np.linalg.norm(axis) - 1.0) > _FRAME_TOL:
                raise InvalidArgumentError(f"{name} is not unit length")
        for a, b in ((u, v), (u, n), (v, n)):
            if abs(float(a @ b)) > _FRAME_TOL:
                raise InvalidArgumentError("frame axes are not orthogonal")
        if np.linalg.norm(np.cross(u, v) - n) > 1e-9:
            raise InvalidArgumentError("frame is not right-handed (u x v != normal)")


@dataclass(frozen=True)
class Circle2D:
    """Circle in plane coordinates: ``center`` is ``(u, v)``, ``radius > 0``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", check_vector(self.center, 2, "center"))
        object.__setattr__(self, "radius", check_scalar(self.radius, "radius", positive=True))


@dataclass(frozen=True)
class Circle3D:
    """Circle embedded in 3D: a plane frame plus an in-plane circle."""

    frame: PlaneFrame
    circle: Circle2D

    @property
    def center(self) -> np.ndarray:
        """Circle center in world coordinates."""
        return lift_from_plane(self.circle.center[None, :], self.frame)[0]

    @property
    def normal(self) -> np.ndarray:
        return self.frame.normal

    @property
    def radius(self) -> float:
        return self.circle.radius


@dataclass(frozen=True)
class OccupancyGrid:
    """11x11 binary occupancy of the square ``[-extent, extent]^2``."""

    cells: np.ndarray
    extent: float

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.shape != (GRID_RESOLUTION, GRID_RESOLUTION):
            raise InvalidArgumentError(
                f"cells must be {GRID_RESOLUTION}x{GRID_RESOLUTION}, got {cells.shape}"
            )
        if not np.isin(cells, (0, 1)).all():
            raise InvalidArgumentError("cells must be binary")
        object.__setattr__(self, "cells", cells.astype(np.uint8))
        object.__setattr__(self, "extent", check_scalar(self.extent, "extent", positive=True))


class SpatialHashGrid:
    """Uniform spatial hash over 3D points for exact radius queries.

    Cell size should match the typical query radius; larger radii are served
    by visiting ``ceil(radius / cell_size)`` rings of cells, so results stay
    exact for any radius.
    """

    def __init__(self, points, cell_size: float):
        pts = _as_points(points)
        self.points = pts
        self.cell_size = check_scalar(cell_size, "cell_size", positive=True)
        if len(pts):
            keys = np.floor(pts / self.cell_size).astype(np.int64)
            order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
            sk = keys[order]
            change = np.flatnonzero((sk[1:] != sk[:-1]).any(axis=1)) + 1
            starts = np.concatenate(([0], change))
            ends = np.concatenate((change, [len(pts)]))
            self._cells = {tuple(sk[s]): order[s:e] for s, e in zip(starts, ends)}
        else:
            self._cells = {}

    def query_ball(self, center, radius: float) -> np.ndarray:
        """Indices of all points within ``radius`` of ``center``, ascending."""
        c = check_vector(center, 3, "center")
        r = check_scalar(radius, "radius", positive=True)
        if not self._cells:
            return np.zeros(0, dtype=np.int64)
        span = max(1, int(math.ceil(r / self.cell_size)))
        base = np.floor(c / self.cell_size).astype(np.int64)
        chunks = []
        for di in range(-span, span + 1):
            for dj in range(-span, span + 1):
                for dk in range(-span, span + 1):
                    cell = self._cells.get((base[0] + di, base[1] + dj, base[2] + dk))
                    if cell is not None:
                        chunks.append(cell)
        if not chunks:
            return np.zeros(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        d2 = ((self.points[cand] - c) ** 2).sum(axis=1)
        return np.sort(cand[d2 <= r * r])


def _as_points(cloud_or_points) -> np.ndarray:
    """Accept a PointCloud-like object (``.points``) or a raw (n, 3) array."""
    pts = getattr(cloud_or_points, "points", cloud_or_points)
    return check_points(pts, 3)


def ball_query(cloud, center, radius: float, index: SpatialHashGrid | None = None) -> np.ndarray:
    """Indices of the points within ``radius`` of ``center``.

    Parameters
    ----------
    cloud : PointCloud or (n, 3) array
    center : (3,) array
    radius : float, > 0
    index : SpatialHashGrid, optional
        Prebuilt index over the same points; pass it when issuing many
        queries against one cloud. Built on the fly otherwise.

    Returns
    -------
    (k,) int array of indices in ascending order.
    """
    if index is None:
        index = SpatialHashGrid(_as_points(cloud), cell_size=radius)
    return index.query_ball(center, radius)


def average_nn_distance(points) -> float:
    """Mean distance from each point to its nearest other point."""
    pts = _as_points(points)
    if len(pts) < 2:
        raise InvalidArgumentError("need at least 2 points for a nearest-neighbor distance")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(dist[:, 1].mean())


def weighted_pca_plane(points, weights=None) -> PlaneFrame:
    """Best-fit plane of weighted points.

    The frame origin is the weighted centroid; ``normal`` is the unit
    eigenvector of the weighted covariance with the smallest eigenvalue and
    ``u_axis`` the one with the largest. Signs are fixed so each axis has its
    largest-magnitude component positive, making the result deterministic.

    Raises
    ------
    DegenerateGeometryError
        If the two smallest covariance eigenvalues coincide (within 1e-10
        relative), i.e. the normal direction is not unique.
    """
    pts = check_points(points, 3, min_points=3)
    if weights is None:
        w = np.full(len(pts), 1.0 / len(pts))
    else:
        w = check_weights(weights, len(pts))
    wsum = w.sum()
    centroid = (w[:, None] * pts).sum(axis=0) / wsum
    d = pts - centroid
    cov = (d * w[:, None]).T @ d / wsum
    evals, evecs = np.linalg.eigh(cov)  # ascending eigenvalues
    scale = max(float(evals[2]), 0.0)
    if float(evals[1] - evals[0]) <= 1e-10 * scale or scale == 0.0:
        raise DegenerateGeometryError(
            "weighted covariance is rank-deficient; plane normal is not unique"
        )
    normal = _fix_sign(evecs[:, 0])
    u_axis = _fix_sign(evecs[:, 2])
    v_axis = np.cross(normal, u_axis)
    return PlaneFrame(origin=centroid, normal=normal, u_axis=u_axis, v_axis=v_axis)


def _fix_sign(axis: np.ndarray) -> np.ndarray:
    """Flip so the largest-magnitude component is positive."""
    i = int(np.argmax(np.abs(axis)))
    return -axis if axis[i] < 0 else axis.copy()


def project_to_plane(points, frame: PlaneFrame) -> np.ndarray:
    """In-plane ``(u, v)`` coordinates of 3D points, shape (n, 2)."""
    pts = check_points(points, 3)
    d = pts - frame.origin
    return np.column_stack((d @ frame.u_axis, d @ frame.v_axis))


def lift_from_plane(points2, frame: PlaneFrame) -> np.ndarray:
    """Map ``(u, v)`` plane coordinates back to 3D, shape (n, 3)."""
    uv = check_points(points2, 2, "points2")
    return frame.origin + uv[:, :1] * frame.u_axis + uv[:, 1:] * frame.v_axis


def rasterize_grid(points2, extent: float) -> OccupancyGrid:
    """Rasterize 2D points onto the 11x11 binary grid over ``[-extent, extent]^2``.

    A cell is 1 iff at least one point falls inside it; points outside the
    extent are clamped to the border cells.
    """
    uv = check_points(points2, 2, "points2")
    ext = check_scalar(extent, "extent", positive=True)
    cells = np.zeros((GRID_RESOLUTION, GRID_RESOLUTION), dtype=np.uint8)
    if len(uv):
        bins = np.floor((uv + ext) / (2.0 * ext) * GRID_RESOLUTION).astype(np.int64)
        bins = np.clip(bins, 0, GRID_RESOLUTION - 1)
        cells[bins[:, 1], bins[:, 0]] = 1  # row = v bin, col = u bin
    return OccupancyGrid(cells=cells, extent=ext)


def align_to_principal_frame(local_points, global_points, query=None):
    """Rotate a local/global patch pair into the global patch's principal frame.

    Both patches are translated so ``query`` (default: the origin, for
    patches that are already query-centered) maps to the origin, then rotated
    by the same rigid rotation built from the principal axes of the *global*
    patch, which is the more structure-aware of the two. After alignment the
    global patch's best-fit plane normal is ``(0, 0, +-1)``.

    Returns
    -------
    (local_aligned, global_aligned) : pair of (n, 3) arrays
    """
    local_pts = check_points(local_points, 3, "local_points")
    global_pts = check_points(global_points, 3, "global_points", min_points=3)
    q = np.zeros(3) if query is None else check_vector(query, 3, "query")
    frame = weighted_pca_plane(global_pts)
    rot = np.vstack((frame.u_axis, frame.v_axis, frame.normal))
    return (local_pts - q) @ rot.T, (global_pts - q) @ rot.T


def point_to_circle3d_distance(point, circle: Circle3D) -> float:
    """Euclidean distance from a point to the closed circular curve in 3D."""
    return float(distances_to_circle3d(np.asarray(point, float)[None, :], circle)[0])


def distances_to_circle3d(points, circle: Circle3D) -> np.ndarray:
    """Vectorized distance from each point to the circle curve, shape (n,)."""
    pts = check_points(points, 3)
    center = circle.center
    n = circle.frame.normal
    delta = pts - center
    d_off = delta @ n
    radial = delta - d_off[:, None] * n
    d_in = np.abs(np.linalg.norm(radial, axis=1) - circle.radius)
    return np.hypot(d_in, np.abs(d_off))
