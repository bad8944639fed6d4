"""Command-line front end: ``gen | detect | fit | extract | eval | bench``.

All randomness flows from the ``--seed`` flags, so every command is a pure
function of its inputs: identical invocations produce byte-identical files.
Exit codes: 0 success, 1 runtime/numerical failure, 2 usage or spec error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .boundary import (
    DEFAULT_ANGLE_GAP,
    BoundaryParams,
    Detection,
    boundary_probabilities,
    detect_boundary_angle_gap,
    detection_from_labels,
    export_patch_pairs,
    load_external_detection,
)
from .exceptions import (
    CircleKitError,
    FormatError,
    InvalidArgumentError,
    InvalidSpecError,
    PointCloudParseError,
)
from .extract import CircleInstance, RansacParams, cluster_and_fit, match_instances, refine_instance
from .fitting import CONSTRAINTS, fit_circle_3d, geometric_refine
from .geometry import Circle3D, average_nn_distance, project_to_plane
from .io import (
    circle_from_record,
    circle_record,
    dumps_json,
    read_cloud,
    read_instances_json,
    read_truth_json,
    read_weights_file,
    write_cloud,
    write_truth_json,
    write_weights_file,
)
from .metrics import FitScore, evaluate, format_metrics_grid, score_fitting
from .scan import SceneSpec, generate_scene


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path}: config must be a JSON object")
    return data


def _pick(flag_value, config: dict, key: str, default=None):
    """CLI flag beats config file beats default."""
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _read_labels(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in (".xyz", ".ply"):
        cloud = read_cloud(path)
        if cloud.labels is None:
            raise FormatError(f"{path}: cloud file carries no label column")
        return np.asarray(cloud.labels)
    values = read_weights_file(path)
    if not np.isin(values, (0.0, 1.0)).all():
        raise FormatError(f"{path}: labels must be 0 or 1")
    return values.astype(np.int8)


def _ransac_params(args, config: dict, r_hyper: float | None) -> RansacParams:
    ransac_cfg = config.get("ransac", {})
    max_radius = _pick(getattr(args, "max_radius", None), ransac_cfg, "max_radius")
    sample_radius = _pick(getattr(args, "sample_radius", None), ransac_cfg, "sample_radius")
    if r_hyper is not None:
        if max_radius is None:
            max_radius = 5.0 * r_hyper
        if sample_radius is None:
            sample_radius = 2.5 * r_hyper
    return RansacParams(
        iterations=int(_pick(args.iterations, ransac_cfg, "iterations", 200)),
        inlier_tol=_pick(args.inlier_tol, ransac_cfg, "inlier_tol"),
        min_inliers=int(_pick(args.min_inliers, ransac_cfg, "min_inliers", 6)),
        max_circles=int(_pick(args.max_circles, ransac_cfg, "max_circles", 32)),
        seed=int(_pick(args.seed, config, "seed", 0)),
        max_radius=max_radius,
        sample_radius=sample_radius,
        min_arc_coverage=float(_pick(
            getattr(args, "min_arc_coverage", None), ransac_cfg, "min_arc_coverage", 0.3
        )),
        max_rms_ratio=_pick(
            getattr(args, "max_rms_ratio", None), ransac_cfg, "max_rms_ratio", 0.35
        ),
    )


def _boundary_params(args, config: dict, r_hyper: float | None, cloud) -> BoundaryParams:
    boundary_cfg = config.get("boundary", {})
    radius = _pick(getattr(args, "query_radius", None), boundary_cfg, "query_radius")
    if radius is None and r_hyper is not None:
        radius = 0.25 * r_hyper
    if radius is None:
        radius = 4.0 * average_nn_distance(cloud.points)
    return BoundaryParams(
        query_radius=radius,
        angle_gap_threshold=_pick(
            getattr(args, "angle_threshold", None), boundary_cfg,
            "angle_gap_threshold", DEFAULT_ANGLE_GAP,
        ),
        min_neighbors=int(_pick(
            getattr(args, "min_neighbors", None), boundary_cfg, "min_neighbors", 4
        )),
    )


def _emit_json(text: str, json_out) -> None:
    if json_out:
        Path(json_out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    spec_data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec_data["seed"] = args.seed
    spec = SceneSpec.from_dict(spec_data)
    scene = generate_scene(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud_path = out_dir / f"scene.{args.format}"
    write_cloud(cloud_path, scene.cloud)
    write_truth_json(out_dir / "truth.json", scene.truth)
    print(f"seed {spec.seed}: wrote {len(scene.cloud)} points, "
          f"{len(scene.truth)} circles to {out_dir}")
    return 0


def cmd_detect(args) -> int:
    cloud = read_cloud(args.cloud)
    if len(cloud) == 0:
        raise InvalidArgumentError(f"{args.cloud}: cloud is empty")
    params = _boundary_params(args, {}, args.r_hyper, cloud)
    probs = boundary_probabilities(cloud, params)
    mask = probs > params.angle_gap_threshold / (2.0 * np.pi)
    detection = Detection(indices=np.flatnonzero(mask), probabilities=probs[mask])
    if args.out:
        write_weights_file(args.out, probs)
    if args.json_out:
        payload = {
            "indices": [int(i) for i in detection.indices],
            "probabilities": [float(p) for p in detection.probabilities],
        }
        Path(args.json_out).write_text(dumps_json(payload), encoding="utf-8")
    if args.export_patches:
        if args.r_hyper is None:
            raise InvalidArgumentError("--export-patches requires --r-hyper")
        queries = detection.indices[: args.max_patches]
        export_patch_pairs(cloud, queries, args.r_hyper, args.export_patches, rng=args.seed)
    print(f"flagged {len(detection)} of {len(cloud)} points as circle-boundary candidates")
    return 0


def cmd_fit(args) -> int:
    cloud = read_cloud(args.cloud)
    if len(cloud) < 3:
        raise InvalidArgumentError(f"{args.cloud}: need at least 3 points to fit")
    if args.weights:
        cloud.weights = read_weights_file(args.weights, n_expected=len(cloud))
    circle, diag = fit_circle_3d(cloud, None, args.constraint)
    if args.refine:
        uv = project_to_plane(cloud.points, circle.frame)
        w = cloud.weights
        circle2, diag = geometric_refine(uv, w, init=circle.circle)
        circle = Circle3D(frame=circle.frame, circle=circle2)
    record = circle_record(circle, diag, args.constraint)
    _emit_json(dumps_json(record), args.json_out)
    return 0


def cmd_extract(args) -> int:
    config = _load_config(args.config)
    cloud = read_cloud(args.cloud)
    constraint = _pick(args.constraint, config, "constraint", "hyper")
    if constraint not in CONSTRAINTS:
        raise InvalidArgumentError(f"constraint must be one of {CONSTRAINTS}")
    r_hyper = _pick(args.r_hyper, config, "r_hyper")
    refine = args.refine or bool(config.get("refine", False))

    if len(cloud) == 0:
        _emit_json(dumps_json([]), args.json_out)
        return 0

    if args.weights:
        detection = load_external_detection(cloud, args.weights)
        print(f"detection: external weights from {args.weights} "
              f"({len(detection)} points >= 0.5)", file=sys.stderr)
    else:
        params = _boundary_params(args, config, r_hyper, cloud)
        detection = detect_boundary_angle_gap(cloud, params)
        print(f"detection: angle-gap detector flagged {len(detection)} points",
              file=sys.stderr)

    ransac = _ransac_params(args, config, r_hyper)
    instances = cluster_and_fit(cloud, detection, ransac, constraint)
    if refine:
        instances = [refine_instance(cloud, inst) for inst in instances]
    records = []
    for inst in instances:
        rec = circle_record(inst.circle, inst.diagnostics, constraint)
        rec["inliers"] = [int(i) for i in inst.inlier_indices]
        records.append(rec)
    _emit_json(dumps_json(records), args.json_out)
    return 0


def cmd_eval(args) -> int:
    records = read_instances_json(args.instances)
    truth = read_truth_json(args.truth)
    labels = _read_labels(args.labels)
    found = [circle_from_record(rec) for rec in records]
    predicted: list[int] = []
    for rec in records:
        for idx in rec.get("inliers", []):
            if not 0 <= int(idx) < len(labels):
                raise FormatError(
                    f"instance inlier index {idx} out of range for {len(labels)} labels; "
                    "mismatched scene?"
                )
            predicted.append(int(idx))
    predicted = np.unique(np.asarray(predicted, dtype=np.int64))
    center_tol = args.center_tol
    if center_tol is None:
        if not truth:
            raise InvalidArgumentError("truth file has no circles")
        center_tol = min(c.radius for c in truth)
    pairs = match_instances(found, truth, center_tol)
    report = evaluate(found, truth, pairs, predicted=predicted, truth_labels=labels,
                      in_plane=args.in_plane,
                      config={"center_tol": center_tol, "in_plane": args.in_plane,
                              "instances": str(args.instances), "truth": str(args.truth)})
    print(report.render_table())
    if args.json_out:
        Path(args.json_out).write_text(dumps_json(report.to_json_dict()), encoding="utf-8")
    if args.csv_out:
        Path(args.csv_out).write_text(report.to_csv(), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

BENCH_NOISE_LEVELS = (("0.1%", 0.001), ("0.5%", 0.005), ("1.0%", 0.01))
BENCH_RADII = (2.0, 2.4, 2.8, 3.2, 3.6, 4.0)


def bench_scene_spec(noise_rel: float, seed: int, n_circles: int = 18) -> SceneSpec:
    """Desk-scale plate with ``n_circles`` holes drawn from six radii."""
    radii = [BENCH_RADII[i % len(BENCH_RADII)] for i in range(n_circles)]
    cols = min(6, n_circles)
    pitch = 14.0
    n_rows = (n_circles + cols - 1) // cols
    circles = []
    for i, r in enumerate(radii):
        row, col = divmod(i, cols)
        cx = (col - (cols - 1) / 2.0) * pitch
        cy = (row - (n_rows - 1) / 2.0) * pitch
        circles.append({"center": [cx, cy, 0.0], "radius": r, "depth": 1.0})
    reach = max(max(abs(c["center"][0]), abs(c["center"][1])) + c["radius"]
                for c in circles)
    return SceneSpec(
        circles=tuple(circles),
        plane_extent=reach + 3.0,
        sample_spacing=0.7,
        noise_sigma_rel=noise_rel,
        inner_wall=True,
        seed=seed,
    )


def run_bench(seed: int = 0, seeds_per_level: int = 1, n_circles: int = 18,
              refine: bool = False) -> dict:
    """Fitting-error grid over the noise-level matrix, per constraint kind.

    The detection stage uses the scene's ground-truth labels so that the grid
    compares the fitting methods on identical inputs; instances come from one
    RANSAC clustering pass and are refit per method.
    """
    methods = list(CONSTRAINTS) + (["hyper+refine"] if refine else [])
    grid: dict[str, dict[str, FitScore]] = {m: {} for m in methods}
    for label, noise in BENCH_NOISE_LEVELS:
        per_method: dict[str, list] = {m: [] for m in methods}
        for k in range(seeds_per_level):
            spec = bench_scene_spec(noise, seed=seed + 1000 * k, n_circles=n_circles)
            scene = generate_scene(spec)
            detection = detection_from_labels(scene.cloud)
            params = RansacParams(
                iterations=300,
                min_inliers=14,
                max_circles=n_circles + 8,
                seed=seed + 1000 * k,
                max_radius=2.0 * max(BENCH_RADII),
                sample_radius=2.5 * max(BENCH_RADII),
                min_arc_coverage=0.25,
                max_rms_ratio=0.4,
            )
            instances = cluster_and_fit(scene.cloud, detection, params, "hyper")
            for method in methods:
                kind = method.split("+")[0]
                refit = []
                for inst in instances:
                    circle, diag = fit_circle_3d(scene.cloud, inst.inlier_indices, kind)
                    new = CircleInstance(circle=circle, inlier_indices=inst.inlier_indices,
                                         diagnostics=diag)
                    if method.endswith("+refine"):
                        new = refine_instance(scene.cloud, new)
                    refit.append(new)
                pairs = match_instances(refit, scene.truth,
                                        center_tol=min(BENCH_RADII))
                if pairs:
                    matched = [(refit[i].circle, scene.truth[j]) for i, j in pairs]
                    per_method[method].append(score_fitting(matched))
        for method in methods:
            scores = per_method[method]
            if scores:
                grid[method][label] = FitScore(
                    ad_c=float(np.mean([s.ad_c for s in scores])),
                    ad_r=float(np.mean([s.ad_r for s in scores])),
                    mse_r=float(np.mean([s.mse_r for s in scores])),
                    k=int(sum(s.k for s in scores)),
                )
    return grid


def cmd_bench(args) -> int:
    grid = run_bench(seed=args.seed or 0, seeds_per_level=args.seeds,
                     n_circles=args.circles, refine=args.refine)
    labels = [label for label, _ in BENCH_NOISE_LEVELS]
    print(format_metrics_grid(grid, labels))
    if args.json_out:
        payload = {
            method: {
                label: {"ad_c": s.ad_c, "ad_r": s.ad_r, "mse_r": s.mse_r, "k": s.k}
                for label, s in scores.items()
            }
            for method, scores in grid.items()
        }
        Path(args.json_out).write_text(dumps_json(payload), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circlekit",
        description="Extract circle primitives from 3D point clouds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled scan from a scene spec")
    p.add_argument("spec", help="scene spec JSON file")
    p.add_argument("out_dir", help="output directory (scene.<fmt> + truth.json)")
    p.add_argument("--format", choices=("xyz", "ply"), default="xyz")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("detect", help="flag circle-boundary candidate points")
    p.add_argument("cloud")
    p.add_argument("--r-hyper", type=float, default=None,
                   help="circle-radius hyper-parameter; sets query radius to 0.25x")
    p.add_argument("--query-radius", type=float, default=None)
    p.add_argument("--angle-threshold", type=float, default=None,
                   help="flag when the largest angular gap exceeds this (radians)")
    p.add_argument("--min-neighbors", type=int, default=None)
    p.add_argument("--out", default=None, help="write per-point probabilities, one per line")
    p.add_argument("--json-out", default=None)
    p.add_argument("--export-patches", default=None, metavar="DIR",
                   help="export pair_<k>_{small,big,local,global}.xyz patches")
    p.add_argument("--max-patches", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fit", help="fit a single circle to a cloud")
    p.add_argument("cloud")
    p.add_argument("--constraint", choices=CONSTRAINTS, default="hyper")
    p.add_argument("--weights", default=None, help="per-point weight file")
    p.add_argument("--refine", action="store_true")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extract", help="detect, cluster, and fit all circles")
    p.add_argument("cloud")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--r-hyper", type=float, default=None)
    p.add_argument("--constraint", choices=CONSTRAINTS, default=None)
    p.add_argument("--weights", default=None,
                   help="external per-point probabilities (bypasses the detector)")
    p.add_argument("--query-radius", type=float, default=None)
    p.add_argument("--angle-threshold", type=float, default=None)
    p.add_argument("--min-neighbors", type=int, default=None)
    p.add_argument("--inlier-tol", type=float, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--min-inliers", type=int, default=None)
    p.add_argument("--max-circles", type=int, default=None)
    p.add_argument("--max-radius", type=float, default=None)
    p.add_argument("--sample-radius", type=float, default=None)
    p.add_argument("--min-arc-coverage", type=float, default=None,
                   help="discard candidates whose inliers span less than this "
                        "fraction of the circle (default 0.3; lower it for "
                        "partial-arc scans)")
    p.add_argument("--max-rms-ratio", type=float, default=None,
                   help="discard candidates whose inlier RMS distance exceeds "
                        "this fraction of the inlier tolerance (default 0.35)")
    p.add_argument("--refine", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="score instances against ground truth")
    p.add_argument("instances", help="instances JSON from 'extract'")
    p.add_argument("truth", help="truth.json from 'gen'")
    p.add_argument("labels", help="labeled cloud file or 0/1-per-line file")
    p.add_argument("--center-tol", type=float, default=None,
                   help="max center distance for matching (default: min truth radius)")
    p.add_argument("--in-plane", action="store_true",
                   help="measure center deviation in the truth circle's plane")
    p.add_argument("--json-out", default=None)
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run the noise-matrix benchmark grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="scenes per noise level")
    p.add_argument("--circles", type=int, default=18)
    p.add_argument("--refine", action="store_true", help="add a hyper+refine row")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidSpecError, InvalidArgumentError, FormatError, PointCloudParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CircleKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
