import numpy as np
import pytest

from circlekit.exceptions import (
    DegenerateCircleError,
    DegenerateFitError,
    InvalidArgumentError,
)
from circlekit.fitting import (
    CONSTRAINTS,
    AlgebraicCircle,
    _hyper_matrix,
    _pratt_matrix,
    _taubin_matrix,
    algebraic_to_geometric,
    build_design_matrices,
    fit_circle_2d,
    fit_circle_3d,
    geometric_refine,
    solve_constrained,
    weighted_distance_objective,
)
from circlekit.geometry import Circle2D

from conftest import circle_points_2d, circle_points_3d, random_rotation


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def naive_design_matrix(points2, weights):
    """Scalar-loop assembly of (1/n) Z^T W^T W Z."""
    n = len(points2)
    m = np.zeros((4, 4))
    for (x, y), w in zip(points2, weights):
        z = np.array([x * x + y * y, x, y, 1.0])
        for i in range(4):
            for j in range(4):
                m[i, j] += w * w * z[i] * z[j]
    return m / n


def quartic_coefficients(M, H):
    """Exact coefficients of det(M - eta*H) via 5-node interpolation."""
    scale = max(np.abs(M).max() / max(np.abs(H).max(), 1e-300), 1e-300)
    nodes = scale * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    values = np.array([np.linalg.det(M - t * H) for t in nodes])
    vander = np.vander(nodes, 5, increasing=True)
    return np.linalg.solve(vander, values)  # c0 + c1 eta + ... + c4 eta^4


def charpoly_root_scan(M, H, n_grid=400_001):
    """All real roots of det(M - eta*H) = 0 by sign scan plus bisection."""
    coeffs = quartic_coefficients(M, H)
    magnitude = np.abs(coeffs)
    lead = 4
    while lead > 0 and magnitude[lead] <= 1e-13 * magnitude.max():
        lead -= 1
    coeffs = coeffs[: lead + 1]

    def poly(t):
        acc = np.zeros_like(t)
        for c in coeffs[::-1]:
            acc = acc * t + c
        return acc

    bound = 1.0 + np.abs(coeffs[:-1]).max() / abs(coeffs[-1])
    grid = np.linspace(-bound, bound, n_grid)
    vals = poly(grid)
    sign = np.sign(vals)
    idx = np.flatnonzero(sign[:-1] * sign[1:] < 0)
    roots = []
    for i in idx:
        lo, hi = grid[i], grid[i + 1]
        flo = poly(np.array([lo]))[0]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fmid = poly(np.array([mid]))[0]
            if fmid == 0.0:
                lo = hi = mid
                break
            if flo * fmid < 0:
                hi = mid
            else:
                lo, flo = mid, fmid
            if hi - lo <= 1e-16 * max(1.0, abs(lo)):
                break
        roots.append(0.5 * (lo + hi))
    exact_hits = grid[vals == 0.0]
    roots.extend(exact_hits.tolist())
    return np.sort(np.asarray(roots))


def oracle_smallest_admissible(M, H):
    """(eta, K) from the root scan: smallest root >= -1e-12 * trace(M)."""
    roots = charpoly_root_scan(M, H)
    tol = 1e-12 * np.trace(M)
    admissible = roots[roots >= -tol]
    eta = float(admissible[0])
    _, _, vt = np.linalg.svd(M - eta * H)
    return eta, vt[-1]


def angle_between(u, v):
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return float(np.arccos(min(1.0, c)))


def noisy_circle_matrices(rng, n=60):
    center = rng.uniform(-3, 3, 2)
    radius = rng.uniform(0.5, 4.0)
    pts = circle_points_2d(center, radius, n, rng, noise=0.02 * radius)
    w = rng.uniform(0.2, 1.5, n)
    return build_design_matrices(pts, w)


# ---------------------------------------------------------------------------
# design matrices
# ---------------------------------------------------------------------------

class TestBuildDesignMatrices:
    def test_hyper_row_for_concentrated_points(self):
        pts = np.tile([[1.0, 0.0]], (5, 1))
        _, h = build_design_matrices(pts, np.full(5, 0.2))
        assert np.allclose(h[0], [8.0, 4.0, 0.0, 2.0])
        assert h[1, 1] == 1.0 and h[2, 2] == 1.0 and h[3, 3] == 0.0

    def test_hyper_symmetric_point_set(self):
        pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        _, h = build_design_matrices(pts)
        assert h[0, 0] == pytest.approx(8.0)
        assert h[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert h[0, 2] == pytest.approx(0.0, abs=1e-15)
        assert h[0, 3] == 2.0

    def test_moment_matrix_against_scalar_loops(self, rng):
        pts = rng.uniform(-2, 2, (30, 2))
        w = rng.uniform(0.1, 1.0, 30)
        m, _ = build_design_matrices(pts, w)
        wn = w / w.sum()
        assert np.allclose(m, naive_design_matrix(pts, wn), atol=1e-14)

    def test_raw_sums_switch(self, rng):
        pts = rng.uniform(-2, 2, (12, 2))
        w = rng.uniform(0.1, 1.0, 12)
        m, _ = build_design_matrices(pts, w, normalize_weights=False)
        assert np.allclose(m, naive_design_matrix(pts, w), atol=1e-13)

    def test_m_positive_semidefinite(self, rng):
        pts = rng.uniform(-5, 5, (40, 2))
        m, _ = build_design_matrices(pts, rng.uniform(0, 1, 40))
        assert np.linalg.eigvalsh(m).min() >= -1e-12 * np.abs(m).max()

    def test_all_zero_weights_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(InvalidArgumentError):
            build_design_matrices(pts, np.zeros(3))

    def test_hyper_is_two_taubin_minus_pratt(self, rng):
        pts = rng.uniform(-2, 2, (25, 2))
        w = rng.uniform(0.1, 1.0, 25)
        w = w / w.sum()
        h = _hyper_matrix(pts, w)
        t = _taubin_matrix(pts, w)
        p = _pratt_matrix(pts, w)
        assert np.allclose(h, 2.0 * t - p, atol=1e-14)


# ---------------------------------------------------------------------------
# solve_constrained
# ---------------------------------------------------------------------------

class TestSolveConstrained:
    def test_exact_circle_eta_near_zero(self, rng):
        pts = circle_points_2d((0.5, -0.2), 1.3, 40)
        m, h = build_design_matrices(pts)
        k, diag = solve_constrained(m, h)
        assert abs(diag.eta) <= 1e-12 * np.abs(m).max()
        assert diag.objective <= 1e-12 * np.abs(m).max()

    def test_identity_constraint_reduces_to_ordinary_eig(self):
        m = np.diag([2.0, 3.0, 4.0, 5.0])
        k, diag = solve_constrained(m, np.eye(4))
        assert diag.eta == pytest.approx(2.0, rel=1e-12)
        assert np.allclose(np.abs(k.as_array()), [1, 0, 0, 0], atol=1e-12)
        assert k.a > 0

    def test_normalization_and_residual(self, rng):
        for _ in range(20):
            m, h = noisy_circle_matrices(rng)
            k, diag = solve_constrained(m, h)
            vec = k.as_array()
            assert abs(vec @ h @ vec - 1.0) <= 1e-9
            resid = np.abs(m @ vec - diag.eta * (h @ vec)).max()
            assert resid <= 1e-9 * np.abs(m).max() * np.abs(vec).max()
            assert diag.eta > 0

    def test_matches_charpoly_root_scan(self, rng):
        for _ in range(30):
            m, h = noisy_circle_matrices(rng)
            k, diag = solve_constrained(m, h)
            eta_oracle, k_oracle = oracle_smallest_admissible(m, h)
            assert abs(diag.eta - eta_oracle) <= 1e-8 * np.abs(m).max()
            assert angle_between(k.as_array(), k_oracle) <= 1e-6

    def test_collinear_data_raises_line_error(self):
        pts = np.column_stack((np.linspace(-1, 1, 20), np.linspace(-2, 2, 20)))
        m, h = build_design_matrices(pts)
        with pytest.raises((DegenerateCircleError, DegenerateFitError)):
            solve_constrained(m, h)

    def test_rejects_asymmetric_input(self):
        bad = np.eye(4)
        bad[0, 1] = 1.0
        with pytest.raises(InvalidArgumentError):
            solve_constrained(bad, np.eye(4))


# ---------------------------------------------------------------------------
# algebraic -> geometric conversion
# ---------------------------------------------------------------------------

class TestAlgebraicToGeometric:
    def test_unit_circle(self):
        c = algebraic_to_geometric(AlgebraicCircle(1.0, 0.0, 0.0, -1.0))
        assert np.allclose(c.center, [0, 0]) and c.radius == pytest.approx(1.0)

    def test_scale_invariance(self):
        c = algebraic_to_geometric(AlgebraicCircle(2.0, 0.0, 0.0, -2.0))
        assert np.allclose(c.center, [0, 0]) and c.radius == pytest.approx(1.0)

    def test_expanded_offset_circle(self):
        # (x-1)^2 + (y-2)^2 = 1  ->  x^2+y^2 -2x -4y +4 = 0
        c = algebraic_to_geometric(AlgebraicCircle(1.0, -2.0, -4.0, 4.0))
        assert np.allclose(c.center, [1.0, 2.0], atol=1e-15)
        assert c.radius == pytest.approx(1.0, rel=1e-15)

    def test_negative_a_keeps_radius_positive(self):
        c = algebraic_to_geometric(AlgebraicCircle(-1.0, 2.0, 4.0, -4.0))
        assert np.allclose(c.center, [1.0, 2.0], atol=1e-15)
        assert c.radius == pytest.approx(1.0, rel=1e-15)

    def test_degenerate_inputs(self):
        with pytest.raises(DegenerateCircleError):
            algebraic_to_geometric(AlgebraicCircle(0.0, 1.0, 1.0, -1.0))
        with pytest.raises(DegenerateCircleError):
            algebraic_to_geometric(AlgebraicCircle(1.0, 0.0, 0.0, 1.0))


# ---------------------------------------------------------------------------
# fit_circle_2d
# ---------------------------------------------------------------------------

class TestFitCircle2D:
    @pytest.mark.parametrize("kind", CONSTRAINTS)
    def test_circumcircle_of_three_points(self, kind):
        pts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        circle, _ = fit_circle_2d(pts, kind=kind)
        assert np.allclose(circle.center, [0, 0], atol=1e-9)
        assert circle.radius == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("kind", CONSTRAINTS)
    def test_circumcircle_verified_by_distances(self, kind):
        pts = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0]])
        circle, _ = fit_circle_2d(pts, kind=kind)
        assert np.allclose(circle.center, [1.0, 0.0], atol=1e-9)
        assert circle.radius == pytest.approx(1.0, abs=1e-9)
        for p in pts:
            assert np.linalg.norm(p - circle.center) == pytest.approx(circle.radius, abs=1e-9)

    def test_zero_weight_removes_outlier(self):
        pts = np.vstack((circle_points_2d((0, 0), 1.0, 64), [[3.0, 3.0]]))
        w = np.concatenate((np.ones(64), [0.0]))
        circle, _ = fit_circle_2d(pts, w)
        assert np.allclose(circle.center, [0, 0], atol=1e-9)
        assert circle.radius == pytest.approx(1.0, abs=1e-9)

    def test_random_probe_minimality(self, rng):
        pts = circle_points_2d((5.0, -2.0), 3.0, 200, rng, noise=0.01)
        m, h = build_design_matrices(pts)
        circle, diag = fit_circle_2d(pts, kind="hyper")
        # probe 1e5 random H-normalized candidates; none may beat the solution
        probes = rng.normal(size=(100_000, 4))
        quad = np.einsum("ij,jk,ik->i", probes, h, probes)
        keep = probes[quad > 1e-9]
        keep = keep / np.sqrt(quad[quad > 1e-9])[:, None]
        objectives = np.einsum("ij,jk,ik->i", keep, m, keep)
        assert diag.objective <= objectives.min() + 1e-15

    @pytest.mark.parametrize("kind", CONSTRAINTS)
    def test_weight_scale_invariance(self, rng, kind):
        pts = circle_points_2d((1.0, 2.0), 2.0, 80, rng, noise=0.02)
        w = rng.uniform(0.1, 1.0, 80)
        c1, _ = fit_circle_2d(pts, w, kind)
        c2, _ = fit_circle_2d(pts, 123.4 * w, kind)
        assert np.allclose(c1.center, c2.center, atol=1e-10)
        assert c1.radius == pytest.approx(c2.radius, abs=1e-10)

    @pytest.mark.parametrize("kind", ("hyper", "pratt", "taubin"))
    def test_rigid_covariance(self, rng, kind):
        pts = circle_points_2d((0.3, -0.7), 1.8, 90, rng, noise=0.02)
        w = rng.uniform(0.2, 1.0, 90)
        phi = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        shift = rng.uniform(-10, 10, 2)
        c0, _ = fit_circle_2d(pts, w, kind)
        c1, _ = fit_circle_2d(pts @ rot.T + shift, w, kind)
        assert np.allclose(c1.center, rot @ c0.center + shift, atol=1e-9)
        assert c1.radius == pytest.approx(c0.radius, abs=1e-9)

    @pytest.mark.parametrize("kind", CONSTRAINTS)
    def test_exactness_on_noiseless_data(self, rng, kind):
        center = rng.uniform(-5, 5, 2)
        radius = rng.uniform(0.5, 5.0)
        pts = circle_points_2d(center, radius, 17, rng)
        circle, _ = fit_circle_2d(pts, kind=kind)
        assert np.linalg.norm(circle.center - center) <= 1e-9 * max(1.0, radius)
        assert abs(circle.radius - radius) <= 1e-9 * radius

    def test_collinear_raises(self):
        pts = np.column_stack((np.linspace(0, 1, 10), np.linspace(0, 2, 10)))
        with pytest.raises(DegenerateFitError):
            fit_circle_2d(pts)

    def test_too_few_points(self):
        with pytest.raises(InvalidArgumentError):
            fit_circle_2d(np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_downweighting_dominance(self):
        # 20% outliers at distance >= 1 from the unit circle
        for seed in range(10):
            rng = np.random.default_rng(seed)
            inliers = circle_points_2d((0, 0), 1.0, 160, rng, noise=0.01)
            ang = rng.uniform(0, 2 * np.pi, 40)
            rad = rng.uniform(2.0, 3.5, 40)
            outliers = np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
            pts = np.vstack((inliers, outliers))
            w = np.concatenate((np.ones(160), np.full(40, 1e-6)))
            unweighted, _ = fit_circle_2d(pts)
            weighted, _ = fit_circle_2d(pts, w)
            assert abs(weighted.radius - 1.0) <= abs(unweighted.radius - 1.0)


# ---------------------------------------------------------------------------
# fit_circle_3d
# ---------------------------------------------------------------------------

class TestFitCircle3D:
    def test_planar_circle_at_height(self, rng):
        pts, _ = circle_points_3d((0, 0, 2.0), (0, 0, 1.0), 1.5, 64)
        circle, _ = fit_circle_3d(pts)
        assert np.allclose(circle.center, [0, 0, 2.0], atol=1e-9)
        assert circle.radius == pytest.approx(1.5, abs=1e-9)
        assert abs(abs(circle.normal[2]) - 1.0) < 1e-9

    def test_rigid_motion_oracle(self, rng):
        pts, _ = circle_points_3d((1.0, -2.0, 0.5), (0, 0, 1.0), 1.5, 64, rng, noise=0.003)
        rot = random_rotation(rng)
        shift = rng.uniform(-5, 5, 3)
        c0, _ = fit_circle_3d(pts)
        c1, _ = fit_circle_3d(pts @ rot.T + shift)
        assert np.allclose(c1.center, rot @ c0.center + shift, atol=1e-9)
        assert c1.radius == pytest.approx(c0.radius, abs=1e-9)
        mapped = rot @ c0.normal
        assert min(np.linalg.norm(c1.normal - mapped), np.linalg.norm(c1.normal + mapped)) < 1e-9

    def test_semicircular_arc_exact(self, rng):
        center = rng.uniform(-2, 2, 3)
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        pts, truth = circle_points_3d(center, normal, 2.2, 100, arc=np.pi)
        circle, _ = fit_circle_3d(pts)
        assert np.linalg.norm(circle.center - truth.center) <= 1e-9
        assert abs(circle.radius - truth.radius) <= 1e-9

    def test_weights_channel_used(self, rng):
        from circlekit.cloud import PointCloud

        pts, _ = circle_points_3d((0, 0, 0), (0, 0, 1.0), 1.0, 64)
        pts = np.vstack((pts, [[0.5, 0.5, 4.0]]))
        weights = np.concatenate((np.ones(64), [0.0]))
        cloud = PointCloud(points=pts, weights=weights)
        circle, _ = fit_circle_3d(cloud)
        assert np.allclose(circle.center, [0, 0, 0], atol=1e-9)
        assert circle.radius == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# geometric refinement
# ---------------------------------------------------------------------------

def grid_search_oracle(pts, weights, init, span=0.05):
    """Nested 3D grid search over (cx, cy, r) minimizing the distance objective."""
    best = np.array([init.center[0], init.center[1], init.radius])
    w = np.ones(len(pts)) if weights is None else weights
    while span > 1e-9:
        axes = [np.linspace(b - span, b + span, 21) for b in best]
        cx, cy, r = np.meshgrid(*axes, indexing="ij")
        centers = np.stack((cx.ravel(), cy.ravel()), axis=1)
        radii = r.ravel()
        d = np.linalg.norm(pts[None, :, :] - centers[:, None, :], axis=2)
        obj = ((w[None, :] * (radii[:, None] - d)) ** 2).sum(axis=1)
        best_idx = int(np.argmin(obj))
        best = np.array([centers[best_idx, 0], centers[best_idx, 1], radii[best_idx]])
        span = span / 9.0
    return best


class TestGeometricRefine:
    def test_stationary_at_exact_data(self):
        pts = circle_points_2d((0.7, -0.3), 1.1, 50)
        init = Circle2D(center=np.array([0.7, -0.3]), radius=1.1)
        refined, diag = geometric_refine(pts, init=init)
        assert np.allclose(refined.center, init.center, atol=1e-14)
        assert refined.radius == pytest.approx(init.radius, abs=1e-14)
        assert diag.condition == "well_posed"

    def test_descent_from_algebraic_init(self, rng):
        pts = circle_points_2d((0, 0), 1.0, 120, rng, noise=0.05)
        init, _ = fit_circle_2d(pts, kind="hyper")
        refined, diag = geometric_refine(pts, init=init)
        assert diag.objective <= weighted_distance_objective(pts, None, init) + 1e-15

    def test_matches_grid_search_oracle(self, rng):
        pts = circle_points_2d((1.0, 1.0), 2.0, 50, rng, noise=0.03)
        init, _ = fit_circle_2d(pts, kind="hyper")
        refined, _ = geometric_refine(pts, init=init)
        oracle = grid_search_oracle(pts, None, init)
        assert np.allclose([refined.center[0], refined.center[1], refined.radius],
                           oracle, atol=1e-6)

    def test_weighted_refinement_matches_weighted_oracle(self, rng):
        pts = circle_points_2d((0.0, 0.0), 1.5, 60, rng, noise=0.04)
        w = rng.uniform(0.2, 1.0, 60)
        init, _ = fit_circle_2d(pts, w, kind="hyper")
        refined, _ = geometric_refine(pts, w, init=init)
        oracle = grid_search_oracle(pts, w, init)
        assert np.allclose([refined.center[0], refined.center[1], refined.radius],
                           oracle, atol=1e-6)

    def test_center_coincident_point_is_harmless(self, rng):
        pts = np.vstack((circle_points_2d((0, 0), 1.0, 30), [[0.0, 0.0]]))
        init = Circle2D(center=np.zeros(2), radius=1.0)
        refined, diag = geometric_refine(pts, init=init)
        assert np.isfinite(diag.objective)
        assert refined.radius > 0

    def test_requires_init(self, rng):
        with pytest.raises(InvalidArgumentError):
            geometric_refine(circle_points_2d((0, 0), 1.0, 10), init=None)
