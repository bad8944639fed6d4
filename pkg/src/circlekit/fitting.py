"""Weighted algebraic circle fitting with the Hyper/Pratt/Taubin/Kasa constraints.

The fit minimizes the weighted algebraic residual

    sum_i w_i^2 (A(x_i^2 + y_i^2) + B x_i + C y_i + D)^2

over the parameter vector ``K = (A, B, C, D)`` subject to a quadratic
constraint ``K^T H K = 1``, which turns into the 4x4 generalized eigenproblem
``M K = eta H K``; the solution is the eigenvector of the smallest positive
``eta``. The constraint matrix selects the estimator:

* ``hyper``  -- weighted-moment variant of the Al-Sharadqah/Chernov matrix
* ``pratt``  -- ``B^2 + C^2 - 4AD = 1``
* ``taubin`` -- gradient-normalized, same weighted moments as ``hyper``
* ``kasa``   -- fixes ``A = 1`` and degenerates to a linear least squares

``geometric_refine`` then polishes a circle against the weighted orthogonal
distance objective ``sum_i (w_i |r - dist_i|)^2`` with a damped Gauss-Newton
(Levenberg-Marquardt) loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DegenerateCircleError,
    DegenerateFitError,
    InvalidArgumentError,
)
from .geometry import (
    Circle2D,
    Circle3D,
    project_to_plane,
    weighted_pca_plane,
)
from .validation import check_indices, check_points, check_weights

CONSTRAINTS = ("hyper", "pratt", "taubin", "kasa")

WELL_POSED = "well_posed"
NEAR_DEGENERATE = "near_degenerate"

_LINE_TOL = 1e-12


@dataclass(frozen=True)
class AlgebraicCircle:
    """Algebraic circle parameters ``A(x^2+y^2) + Bx + Cy + D = 0``."""

    a: float
    b: float
    c: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d])

    @property
    def discriminant(self) -> float:
        """``B^2 + C^2 - 4AD``; must be positive for a real circle."""
        return self.b * self.b + self.c * self.c - 4.0 * self.a * self.d


@dataclass(frozen=True)
class FitDiagnostics:
    """Solver diagnostics attached to every fit result.

    ``eta`` is the chosen generalized eigenvalue (``None`` for the linear
    ``kasa`` path and for geometric refinement, which solve no eigenproblem);
    ``objective`` is the value of the minimized objective at the solution.
    """

    eta: float | None
    objective: float
    condition: str = WELL_POSED


def _prepare_weights(weights, n: int, normalize: bool) -> np.ndarray:
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = check_weights(weights, n)
    return w / w.sum() if normalize else w


def _design_rows(points2: np.ndarray) -> np.ndarray:
    x, y = points2[:, 0], points2[:, 1]
    return np.column_stack((x * x + y * y, x, y, np.ones(len(points2))))


def _moment_matrix(points2: np.ndarray, w: np.ndarray) -> np.ndarray:
    z = _design_rows(points2)
    m = (z * (w * w)[:, None]).T @ z / len(points2)
    return 0.5 * (m + m.T)


def _hyper_matrix(points2: np.ndarray, w: np.ndarray) -> np.ndarray:
    x, y = points2[:, 0], points2[:, 1]
    sz = float(w @ (x * x + y * y))
    sx = float(w @ x)
    sy = float(w @ y)
    return np.array(
        [
            [8.0 * sz, 4.0 * sx, 4.0 * sy, 2.0],
            [4.0 * sx, 1.0, 0.0, 0.0],
            [4.0 * sy, 0.0, 1.0, 0.0],
            [2.0, 0.0, 0.0, 0.0],
        ]
    )


def _pratt_matrix(points2: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, 0.0, 0.0, -2.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [-2.0, 0.0, 0.0, 0.0],
        ]
    )


def _taubin_matrix(points2: np.ndarray, w: np.ndarray) -> np.ndarray:
    x, y = points2[:, 0], points2[:, 1]
    sz = float(w @ (x * x + y * y))
    sx = float(w @ x)
    sy = float(w @ y)
    return np.array(
        [
            [4.0 * sz, 2.0 * sx, 2.0 * sy, 0.0],
            [2.0 * sx, 1.0, 0.0, 0.0],
            [2.0 * sy, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )


_CONSTRAINT_BUILDERS = {
    "hyper": _hyper_matrix,
    "pratt": _pratt_matrix,
    "taubin": _taubin_matrix,
}


def build_design_matrices(points2, weights=None, normalize_weights: bool = True):
    """Moment matrix ``M`` of the weighted objective and the Hyper constraint ``H``.

    Weights default to uniform and, by default, are rescaled to sum to 1
    before either matrix is assembled, so unit weights reproduce the
    classical mean-based Hyper matrices. ``M`` uses squared weights
    (it represents the squared residual objective); ``H`` uses first powers.

    Returns
    -------
    (M, H) : pair of symmetric 4x4 arrays
    """
    pts = check_points(points2, 2, "points2", min_points=3)
    w = _prepare_weights(weights, len(pts), normalize_weights)
    return _moment_matrix(pts, w), _hyper_matrix(pts, w)


def _check_square(mat, name: str) -> np.ndarray:
    m = np.asarray(mat, dtype=float)
    if m.shape != (4, 4):
        raise InvalidArgumentError(f"{name} must be 4x4, got {m.shape}")
    if not np.isfinite(m).all():
        raise InvalidArgumentError(f"{name} contains non-finite values")
    scale = np.abs(m).max()
    if scale > 0 and np.abs(m - m.T).max() > 1e-8 * scale:
        raise InvalidArgumentError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


def solve_constrained(M, H):
    """Solve ``M K = eta H K`` for the smallest nonnegative ``eta``.

    ``K`` is rescaled so ``K^T H K = 1`` and sign-fixed so ``A > 0``. On
    noiseless concyclic data the relevant eigenvalue is numerically zero, so
    candidates down to ``-1e-12 * trace(M)`` are admitted.

    Returns
    -------
    (AlgebraicCircle, FitDiagnostics)

    Raises
    ------
    DegenerateFitError
        If no admissible eigenvalue exists or no candidate can be normalized
        against ``H``.
    DegenerateCircleError
        If the solution's ``A`` component vanishes (the data describe a line).
    """
    M = _check_square(M, "M")
    H = _check_square(H, "H")
    trace = float(np.trace(M))
    tol = 1e-12 * max(trace, 0.0)

    etas, vecs = scipy.linalg.eig(M, H)
    real_scale = max(np.abs(etas[np.isfinite(etas)]).max(initial=0.0), tol, 1e-300)
    order = []
    for i, eta in enumerate(etas):
        if not np.isfinite(eta):
            continue
        if abs(eta.imag) > 1e-8 * max(abs(eta.real), real_scale * 1e-6):
            continue
        if eta.real >= -tol:
            order.append((float(eta.real), i))
    if not order:
        raise DegenerateFitError("no admissible generalized eigenvalue (degenerate fit)")
    order.sort()

    for eta, i in order:
        vec = vecs[:, i]
        if np.iscomplexobj(vec):
            phase = vec[int(np.argmax(np.abs(vec)))]
            if abs(phase) > 0:
                vec = vec * np.conj(phase) / abs(phase)
            vec = vec.real
        quad = float(vec @ H @ vec)
        if quad <= 1e-14 * float(vec @ vec) * max(np.abs(H).max(), 1e-300):
            continue
        k = vec / math.sqrt(quad)
        if k[0] < 0:
            k = -k
        if abs(k[0]) < _LINE_TOL * np.linalg.norm(k):
            raise DegenerateCircleError("solution describes a line (A ~ 0)")
        objective = float(k @ M @ k)
        residual = float(np.abs(M @ k - eta * (H @ k)).max())
        bound = 1e-9 * max(np.abs(M).max(), 1e-300) * max(np.abs(k).max(), 1e-300)
        condition = WELL_POSED if residual <= bound else NEAR_DEGENERATE
        return AlgebraicCircle(*k), FitDiagnostics(eta=eta, objective=objective, condition=condition)

    raise DegenerateFitError("no eigenvector satisfies the constraint normalization")


def algebraic_to_geometric(circle: AlgebraicCircle) -> Circle2D:
    """Center and radius of an algebraic circle.

    ``c = (-B/2A, -C/2A)``, ``r = sqrt(B^2 + C^2 - 4AD) / (2|A|)``; the
    absolute value keeps the radius positive for either sign of ``K``.
    """
    a = circle.a
    norm = max(abs(a), abs(circle.b), abs(circle.c), abs(circle.d))
    if norm == 0.0 or abs(a) < _LINE_TOL * norm:
        raise DegenerateCircleError("A ~ 0: parameters describe a line, not a circle")
    disc = circle.discriminant
    if disc <= 0.0:
        raise DegenerateCircleError(f"non-positive discriminant {disc!r}: no real circle")
    center = np.array([-circle.b / (2.0 * a), -circle.c / (2.0 * a)])
    return Circle2D(center=center, radius=math.sqrt(disc) / (2.0 * abs(a)))


def _check_not_collinear(pts: np.ndarray, w: np.ndarray) -> None:
    centroid = (w[:, None] * pts).sum(axis=0) / w.sum()
    d = pts - centroid
    cov = (d * w[:, None]).T @ d / w.sum()
    evals = np.linalg.eigvalsh(cov)
    if evals[0] <= 1e-12 * max(float(evals[-1]), 1e-300):
        raise DegenerateFitError("points are collinear; no circle fits them")


def _fit_kasa(pts: np.ndarray, w: np.ndarray):
    """Linear least-squares path for the fixed constraint ``A = 1``."""
    x, y = pts[:, 0], pts[:, 1]
    z = x * x + y * y
    g = np.column_stack((x, y, np.ones(len(pts))))
    w2 = w * w
    lhs = (g * w2[:, None]).T @ g
    rhs = -(g * w2[:, None]).T @ z
    try:
        bcd = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("kasa normal equations are singular") from exc
    k = AlgebraicCircle(1.0, *bcd)
    objective = float(k.as_array() @ _moment_matrix(pts, w) @ k.as_array())
    return k, FitDiagnostics(eta=None, objective=objective, condition=WELL_POSED)


def fit_circle_2d(points2, weights=None, kind: str = "hyper", *, normalize_weights: bool = True):
    """Weighted algebraic circle fit of 2D points.

    Points are shifted to their weighted centroid before the matrices are
    assembled (the result is shifted back), which keeps the solve well
    conditioned far from the origin and makes the fit rigid-motion covariant
    to machine precision.

    Parameters
    ----------
    points2 : (n, 2) array, n >= 3 and not all collinear
    weights : (n,) nonnegative array, optional
        Defaults to uniform. Zero-weight points do not influence the fit.
    kind : {'hyper', 'pratt', 'taubin', 'kasa'}
    normalize_weights : bool
        Rescale weights to sum to 1 before building the matrices (default).
        Disable to feed the raw weighted sums into the constraint matrix.

    Returns
    -------
    (Circle2D, FitDiagnostics)
    """
    if kind not in CONSTRAINTS:
        raise InvalidArgumentError(f"kind must be one of {CONSTRAINTS}, got {kind!r}")
    pts = check_points(points2, 2, "points2", min_points=3)
    w = _prepare_weights(weights, len(pts), normalize_weights)
    _check_not_collinear(pts, w)
    centroid = (w[:, None] * pts).sum(axis=0) / w.sum()
    local = pts - centroid
    if kind == "kasa":
        k, diag = _fit_kasa(local, w)
    else:
        m = _moment_matrix(local, w)
        h = _CONSTRAINT_BUILDERS[kind](local, w)
        k, diag = solve_constrained(m, h)
    circle = algebraic_to_geometric(k)
    return Circle2D(center=circle.center + centroid, radius=circle.radius), diag


def fit_circle_3d(cloud, indices=None, kind: str = "hyper", *, weights=None,
                  normalize_weights: bool = True):
    """Fit a 3D circle to selected cloud points.

    The fitting plane comes from :func:`weighted_pca_plane` over the selected
    points; the points are projected into it, fitted in 2D, and the center is
    lifted back to 3D.

    Parameters
    ----------
    cloud : PointCloud or (n, 3) array
    indices : index array, optional (default: every point)
    kind : constraint kind, as in :func:`fit_circle_2d`
    weights : (k,) array over the *selected* points, optional
        Overrides the cloud's weight channel; defaults to the channel when
        present, else uniform.

    Returns
    -------
    (Circle3D, FitDiagnostics)
    """
    pts = getattr(cloud, "points", cloud)
    pts = check_points(pts, 3)
    if indices is None:
        sel = np.arange(len(pts))
    else:
        sel = check_indices(indices, len(pts))
    if len(sel) < 3:
        raise InvalidArgumentError(f"need at least 3 selected points, got {len(sel)}")
    sub = pts[sel]
    if weights is not None:
        w = check_weights(weights, len(sel))
    else:
        channel = getattr(cloud, "weights", None)
        w = channel[sel] if channel is not None else None
    frame = weighted_pca_plane(sub, w)
    uv = project_to_plane(sub, frame)
    circle2, diag = fit_circle_2d(uv, w, kind, normalize_weights=normalize_weights)
    return Circle3D(frame=frame, circle=circle2), diag


def geometric_refine(points2, weights=None, init: Circle2D | None = None, *,
                     max_iterations: int = 100, step_tol: float = 1e-12):
    """Polish a circle against the weighted orthogonal-distance objective.

    Runs a Levenberg-Marquardt loop on ``(cx, cy, r)`` minimizing
    ``sum_i (w_i |r - dist_i|)^2``, starting from ``init`` (typically an
    algebraic fit, which supplies a good initial guess). Only improving steps
    are accepted, so the returned objective never exceeds the initial one.
    A data point coincident with the current center keeps its residual
    ``w_i * r`` but contributes no center gradient for that iteration.

    Returns
    -------
    (Circle2D, FitDiagnostics)
        ``condition`` is ``near_degenerate`` when the loop exhausted its
        iterations without meeting the step tolerance.
    """
    pts = check_points(points2, 2, "points2", min_points=3)
    if init is None:
        raise InvalidArgumentError("geometric_refine requires an initial circle")
    w = np.ones(len(pts)) if weights is None else check_weights(weights, len(pts),
                                                                require_positive_sum=True)

    def residuals(params):
        delta = params[:2] - pts
        dist = np.linalg.norm(delta, axis=1)
        f = w * (params[2] - dist)
        return f, delta, dist

    def objective_of(f):
        return float(f @ f)

    params = np.array([init.center[0], init.center[1], init.radius])
    f, delta, dist = residuals(params)
    obj = objective_of(f)
    lam = 1e-3
    converged = False
    for _ in range(max_iterations):
        safe = dist >= 1e-14
        jac = np.empty((len(pts), 3))
        # d residual / d center = -w * (c - p) / dist; zeroed at the singularity
        jac[:, :2] = 0.0
        jac[safe, :2] = -(w[safe] / dist[safe])[:, None] * delta[safe]
        jac[:, 2] = w
        grad = jac.T @ f
        hess = jac.T @ jac + lam * np.eye(3)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        if np.linalg.norm(step) <= step_tol * (np.linalg.norm(params) + step_tol):
            converged = True
            break
        trial = params + step
        if trial[2] <= 0:
            lam *= 10.0
            continue
        f_trial, delta_trial, dist_trial = residuals(trial)
        obj_trial = objective_of(f_trial)
        if obj_trial < obj:
            params, f, delta, dist, obj = trial, f_trial, delta_trial, dist_trial, obj_trial
            lam = max(lam * 0.1, 1e-15)
        else:
            lam *= 10.0
            if lam > 1e14:
                break
    condition = WELL_POSED if converged else NEAR_DEGENERATE
    circle = Circle2D(center=params[:2].copy(), radius=float(params[2]))
    return circle, FitDiagnostics(eta=None, objective=obj, condition=condition)


def weighted_distance_objective(points2, weights, circle: Circle2D) -> float:
    """Value of ``sum_i (w_i |r - dist_i|)^2`` for a candidate circle."""
    pts = check_points(points2, 2, "points2")
    w = np.ones(len(pts)) if weights is None else check_weights(weights, len(pts),
                                                                require_positive_sum=False)
    dist = np.linalg.norm(pts - circle.center, axis=1)
    f = w * (circle.radius - dist)
    return float(f @ f)
