"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a ``[ACCEPTANCE] PASS/FAIL <criterion>`` line (visible with
``pytest -s``); the assertions carry the actual tolerances.
"""

import contextlib
import json
import time

import numpy as np
import pytest

from circlekit.boundary import detection_from_labels
from circlekit.cli import bench_scene_spec, main
from circlekit.extract import RansacParams, cluster_and_fit, match_instances
from circlekit.fitting import (
    CONSTRAINTS,
    build_design_matrices,
    fit_circle_2d,
    fit_circle_3d,
    geometric_refine,
    solve_constrained,
    weighted_distance_objective,
)
from circlekit.metrics import score_detection, score_fitting
from circlekit.scan import SceneSpec, generate_scene, label_scene

from conftest import circle_points_2d, circle_points_3d, random_rotation
from test_fitting import angle_between, oracle_smallest_admissible
from test_scan import brute_force_labels


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] FAIL {name}")
        raise
    print(f"[ACCEPTANCE] PASS {name}")


def test_exact_recovery_all_constraints():
    """100 noiseless random circles: every constraint kind is exact to 1e-9."""
    with criterion("exact recovery (100 random poses x 4 constraints, < 1 s)"):
        rng = np.random.default_rng(7)
        start = time.perf_counter()
        for _ in range(100):
            radius = rng.uniform(0.5, 5.0)
            center = rng.uniform(-10, 10, 3)
            normal = rng.normal(size=3)
            normal /= np.linalg.norm(normal)
            pts, truth = circle_points_3d(center, normal, radius, 64, rng)
            for kind in CONSTRAINTS:
                circle, _ = fit_circle_3d(pts, kind=kind)
                scale = max(1.0, radius)
                assert np.linalg.norm(circle.center - truth.center) <= 1e-9 * scale
                assert abs(circle.radius - radius) <= 1e-9 * radius
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_rigid_invariance():
    """50 random scenes: fit(T(data)) == T(fit(data)) within 1e-9."""
    with criterion("rigid invariance (50 scenes, 1e-9)"):
        rng = np.random.default_rng(11)
        for case in range(50):
            if case % 2 == 0:
                pts = circle_points_2d(rng.uniform(-3, 3, 2), rng.uniform(0.5, 4),
                                       120, rng, noise=0.01)
                phi = rng.uniform(0, 2 * np.pi)
                rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
                shift = rng.uniform(-20, 20, 2)
                c0, _ = fit_circle_2d(pts)
                c1, _ = fit_circle_2d(pts @ rot.T + shift)
                assert np.linalg.norm(c1.center - (rot @ c0.center + shift)) <= 1e-9
                assert abs(c1.radius - c0.radius) <= 1e-9
            else:
                normal = rng.normal(size=3)
                normal /= np.linalg.norm(normal)
                pts, _ = circle_points_3d(rng.uniform(-3, 3, 3), normal,
                                          rng.uniform(0.5, 4), 120, rng, noise=0.01)
                rot = random_rotation(rng)
                shift = rng.uniform(-20, 20, 3)
                c0, _ = fit_circle_3d(pts)
                c1, _ = fit_circle_3d(pts @ rot.T + shift)
                assert np.linalg.norm(c1.center - (rot @ c0.center + shift)) <= 1e-9
                assert abs(c1.radius - c0.radius) <= 1e-9
                mapped = rot @ c0.normal
                assert min(np.linalg.norm(c1.normal - mapped),
                           np.linalg.norm(c1.normal + mapped)) <= 1e-9


def test_eigensolver_matches_root_scan_oracle():
    """100 data-built (M, H) pairs against the det(M - eta H) root scan."""
    with criterion("eigen-solver oracle equivalence (100 pairs)"):
        rng = np.random.default_rng(23)
        for _ in range(100):
            center = rng.uniform(-3, 3, 2)
            radius = rng.uniform(0.5, 4.0)
            n = int(rng.integers(20, 120))
            pts = circle_points_2d(center, radius, n, rng,
                                   noise=rng.uniform(0.005, 0.05) * radius)
            w = rng.uniform(0.05, 1.5, n)
            m, h = build_design_matrices(pts, w)
            k, diag = solve_constrained(m, h)
            eta_oracle, k_oracle = oracle_smallest_admissible(m, h)
            assert abs(diag.eta - eta_oracle) <= 1e-8 * np.abs(m).max()
            assert angle_between(k.as_array(), k_oracle) <= 1e-6


def test_weighted_dominance_over_outliers():
    """Oracle weights beat unweighted Hyper by 4x on contaminated data."""
    with criterion("weighted-vs-unweighted dominance (100 seeds, < 5 s)"):
        start = time.perf_counter()
        weighted_err, unweighted_err = [], []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n_in, n_out = 160, 40  # 20% outliers
            theta = rng.uniform(0, 2 * np.pi, n_in)
            inliers = np.column_stack((np.cos(theta), np.sin(theta)))
            inliers = inliers + rng.normal(0, 0.01, (n_in, 2))
            ang = rng.uniform(0, 2 * np.pi, n_out)
            rad = rng.uniform(1.5, 3.0, n_out)
            outliers = np.column_stack((rad * np.cos(ang), rad * np.sin(ang)))
            pts = np.vstack((inliers, outliers))
            w = np.concatenate((np.ones(n_in), np.full(n_out, 1e-6)))
            unweighted, _ = fit_circle_2d(pts, kind="hyper")
            weighted, _ = fit_circle_2d(pts, w, kind="hyper")
            unweighted_err.append(abs(unweighted.radius - 1.0))
            weighted_err.append(abs(weighted.radius - 1.0))
        elapsed = time.perf_counter() - start
        assert np.mean(weighted_err) < 0.25 * np.mean(unweighted_err)
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_partial_arc_robustness():
    """90-degree arcs at sigma = 0.005 r: Hyper AD(r) stays under 10 sigma."""
    with criterion("partial-arc robustness (90-degree arcs, 100 seeds)"):
        normalized = []
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            radius = rng.uniform(0.5, 5.0)
            sigma = 0.005 * radius
            start = rng.uniform(0, 2 * np.pi)
            pts = circle_points_2d((0.0, 0.0), radius, 100, rng, noise=sigma,
                                   arc=np.pi / 2, start=start)
            circle, _ = fit_circle_2d(pts, kind="hyper")
            normalized.append(abs(circle.radius - radius) / sigma)
        assert np.mean(normalized) < 10.0


def test_multi_circle_extraction_18_circles():
    """Fig.-6-style scene: 18 circles, 6 radii, 0.1% noise, 10 seeds, no spurious."""
    with criterion("multi-circle extraction (18 circles, 10 seeds, < 30 s/scene)"):
        for seed in range(10):
            start = time.perf_counter()
            spec = bench_scene_spec(0.001, seed=seed, n_circles=18)
            scene = generate_scene(spec)
            sigma = 0.001 * scene.bounding_box_diagonal()
            detection = detection_from_labels(scene.cloud)
            params = RansacParams(
                iterations=300, min_inliers=14, max_circles=26, seed=seed,
                max_radius=8.0, sample_radius=10.0,
                min_arc_coverage=0.25, max_rms_ratio=0.4,
            )
            instances = cluster_and_fit(scene.cloud, detection, params, "hyper")
            elapsed = time.perf_counter() - start
            assert len(instances) == 18, f"seed {seed}: {len(instances)} instances"
            pairs = match_instances(instances, scene.truth, center_tol=2.0)
            assert len(pairs) == 18, f"seed {seed}: only {len(pairs)} matched"
            matched = [(instances[i].circle, scene.truth[j]) for i, j in pairs]
            score = score_fitting(matched)
            assert score.ad_r < 3.0 * sigma, f"seed {seed}: AD(r)={score.ad_r:.4f}"
            assert elapsed < 30.0, f"seed {seed}: took {elapsed:.1f}s"


def test_labeling_matches_brute_force():
    """label_scene equals all-pairs thresholding on 5 random scenes, exactly."""
    with criterion("labeling oracle equivalence (5 scenes, exact)"):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            spec = SceneSpec(
                circles=(
                    {"center": [-1.2, 0.4, 0.0], "radius": float(rng.uniform(0.5, 0.8))},
                    {"center": [1.3, -0.3, 0.0], "radius": float(rng.uniform(0.5, 0.8))},
                ),
                plane_extent=3.0,
                sample_spacing=0.3,
                noise_sigma_rel=float(rng.uniform(0, 0.003)),
                seed=seed,
            )
            scene = generate_scene(spec)
            t = float(rng.uniform(0.1, 0.4))
            labeled = label_scene(scene, t=t)
            expected = brute_force_labels(scene.cloud.points, scene.gt_curve_samples, t)
            assert np.array_equal(labeled.cloud.labels, expected)


def test_metric_definitions():
    """Hand-counted P = R = F1 = 2/3 plus MSE >= AD^2 on 1000 random scorings."""
    with criterion("metric definitions (hand count + 1000 random scorings)"):
        labels = np.array([0, 1, 1, 1, 0, 0])
        score = score_detection([1, 2, 5], labels)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(2 / 3)
        assert score.f1 == pytest.approx(2 / 3)

        from circlekit.geometry import Circle2D, Circle3D
        from circlekit.io import frame_from_normal

        rng = np.random.default_rng(31)
        frame = frame_from_normal([0, 0, 0], [0, 0, 1.0])
        for _ in range(1000):
            k = int(rng.integers(1, 7))
            pairs = []
            for _ in range(k):
                f = Circle3D(frame=frame, circle=Circle2D(
                    center=rng.uniform(-1, 1, 2), radius=float(rng.uniform(0.5, 3))))
                t = Circle3D(frame=frame, circle=Circle2D(
                    center=rng.uniform(-1, 1, 2), radius=float(rng.uniform(0.5, 3))))
                pairs.append((f, t))
            s = score_fitting(pairs)
            assert s.mse_r >= s.ad_r**2 - 1e-12


def test_refine_descent():
    """Refinement never increases the distance objective over 100 noisy fits."""
    with criterion("geometric-refine descent (100 noisy instances)"):
        for seed in range(100):
            rng = np.random.default_rng(2000 + seed)
            radius = rng.uniform(0.5, 3.0)
            pts = circle_points_2d(rng.uniform(-2, 2, 2), radius, 80, rng,
                                   noise=0.03 * radius)
            w = rng.uniform(0.2, 1.0, 80)
            init, _ = fit_circle_2d(pts, w, kind="hyper")
            refined, diag = geometric_refine(pts, w, init=init)
            at_init = weighted_distance_objective(pts, w, init)
            assert diag.objective <= at_init
            # noisy algebraic inits are never stationary points of the
            # distance objective, so the descent is strict
            assert diag.objective < at_init


def test_bench_determinism(tmp_path):
    """Two bench runs with one seed produce byte-identical JSON."""
    with criterion("bench determinism (byte-identical JSON)"):
        out1 = tmp_path / "bench1.json"
        out2 = tmp_path / "bench2.json"
        args = ["bench", "--seed", "5", "--circles", "6", "--json-out"]
        assert main(args + [str(out1)]) == 0
        assert main(args + [str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        payload = json.loads(out1.read_text())
        assert set(payload) == set(CONSTRAINTS)
        for scores in payload.values():
            assert set(scores) == {"0.1%", "0.5%", "1.0%"}
