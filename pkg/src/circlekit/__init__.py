"""circlekit: circle primitive extraction from raw 3D point clouds.

The package detects circle-boundary candidate points, fits circles with a
weighted algebraic formulation (Hyper/Pratt/Taubin/Kasa constraint family,
solved as a 4x4 generalized eigenproblem), clusters multi-circle scenes with
sequential RANSAC, generates labeled synthetic scans for evaluation, and
scores results with detection and metrology metrics.

Top-level entry points:

* estimators: :class:`CircleFitter`, :class:`BoundaryPointDetector`,
  :class:`CircleExtractor`
* functional core: :func:`fit_circle_2d`, :func:`fit_circle_3d`,
  :func:`cluster_and_fit`, :func:`generate_scene`, ...
* CLI: ``circlekit gen | detect | fit | extract | eval | bench``
"""

from .boundary import (
    BoundaryParams,
    Detection,
    detect_boundary_angle_gap,
    detection_from_labels,
    extract_patch_pair,
    export_patch_pairs,
    load_external_detection,
    patch_projection_maps,
)
from .cloud import CIRCLE_BOUNDARY, NON_CIRCLE, PointCloud
from .estimators import BoundaryPointDetector, CircleExtractor, CircleFitter
from .exceptions import (
    CircleKitError,
    DegenerateCircleError,
    DegenerateFitError,
    DegenerateGeometryError,
    FormatError,
    InvalidArgumentError,
    InvalidSpecError,
    PointCloudParseError,
)
from .extract import (
    CircleInstance,
    RansacParams,
    cluster_and_fit,
    match_instances,
    refine_instance,
)
from .fitting import (
    CONSTRAINTS,
    AlgebraicCircle,
    FitDiagnostics,
    algebraic_to_geometric,
    build_design_matrices,
    fit_circle_2d,
    fit_circle_3d,
    geometric_refine,
    solve_constrained,
    weighted_distance_objective,
)
from .geometry import (
    Circle2D,
    Circle3D,
    OccupancyGrid,
    PlaneFrame,
    SpatialHashGrid,
    align_to_principal_frame,
    average_nn_distance,
    ball_query,
    distances_to_circle3d,
    lift_from_plane,
    point_to_circle3d_distance,
    project_to_plane,
    rasterize_grid,
    weighted_pca_plane,
)
from .metrics import (
    DetectionScore,
    EvalReport,
    FitScore,
    evaluate,
    score_detection,
    score_fitting,
)
from .scan import CircleSpec, ScanScene, SceneSpec, generate_scene, label_scene, sample_circle_curve

__version__ = "0.1.0"

__all__ = [
    "AlgebraicCircle",
    "BoundaryParams",
    "BoundaryPointDetector",
    "CIRCLE_BOUNDARY",
    "CONSTRAINTS",
    "Circle2D",
    "Circle3D",
    "CircleExtractor",
    "CircleFitter",
    "CircleInstance",
    "CircleKitError",
    "CircleSpec",
    "DegenerateCircleError",
    "DegenerateFitError",
    "DegenerateGeometryError",
    "Detection",
    "DetectionScore",
    "EvalReport",
    "FitDiagnostics",
    "FitScore",
    "FormatError",
    "InvalidArgumentError",
    "InvalidSpecError",
    "NON_CIRCLE",
    "OccupancyGrid",
    "PlaneFrame",
    "PointCloud",
    "PointCloudParseError",
    "RansacParams",
    "ScanScene",
    "SceneSpec",
    "SpatialHashGrid",
    "align_to_principal_frame",
    "algebraic_to_geometric",
    "average_nn_distance",
    "ball_query",
    "build_design_matrices",
    "cluster_and_fit",
    "detect_boundary_angle_gap",
    "detection_from_labels",
    "distances_to_circle3d",
    "evaluate",
    "export_patch_pairs",
    "extract_patch_pair",
    "fit_circle_2d",
    "fit_circle_3d",
    "generate_scene",
    "geometric_refine",
    "label_scene",
    "lift_from_plane",
    "load_external_detection",
    "match_instances",
    "patch_projection_maps",
    "point_to_circle3d_distance",
    "project_to_plane",
    "rasterize_grid",
    "refine_instance",
    "sample_circle_curve",
    "score_detection",
    "score_fitting",
    "solve_constrained",
    "weighted_distance_objective",
    "weighted_pca_plane",
]
