"""Readers and writers for point clouds, weight files, and circle records.

Supported cloud formats:

* ASCII XYZ: ``x y z [w] [label]`` per line, ``#`` starts a comment.
* ASCII PLY: ``vertex`` element with properties ``x y z`` and optional
  ``weight`` and ``label``.

Circle instances and ground-truth circles are serialized as JSON records
``{center, radius, normal, eta, objective, constraint, inliers}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .exceptions import FormatError, PointCloudParseError
from .geometry import Circle2D, Circle3D, PlaneFrame
from .validation import check_unit_vector, check_vector

_FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# XYZ
# ---------------------------------------------------------------------------

def read_xyz(path) -> PointCloud:
    """Read an ASCII XYZ file; column count (3, 4 or 5) must be consistent."""
    path = Path(path)
    xyz, weights, labels = [], [], []
    ncols = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (3, 4, 5):
                raise PointCloudParseError(path, lineno, f"expected 3-5 columns, got {len(parts)}")
            if ncols is None:
                ncols = len(parts)
            elif len(parts) != ncols:
                raise PointCloudParseError(
                    path, lineno, f"inconsistent column count {len(parts)} (file uses {ncols})"
                )
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise PointCloudParseError(path, lineno, f"non-numeric value in {parts!r}") from None
            xyz.append(values[:3])
            if ncols >= 4:
                weights.append(values[3])
            if ncols == 5:
                if values[4] not in (0.0, 1.0):
                    raise PointCloudParseError(path, lineno, f"label must be 0 or 1, got {values[4]!r}")
                labels.append(int(values[4]))
    return PointCloud(
        points=np.asarray(xyz, dtype=float).reshape(len(xyz), 3),
        weights=np.asarray(weights) if weights else None,
        labels=np.asarray(labels) if labels else None,
    )


def write_xyz(path, cloud: PointCloud) -> None:
    """Write ``x y z [w] [label]`` lines; labels force a weight column (1.0)."""
    path = Path(path)
    cols = [cloud.points]
    if cloud.weights is not None:
        cols.append(cloud.weights[:, None])
    elif cloud.labels is not None:
        cols.append(np.ones((len(cloud), 1)))
    if cloud.labels is not None:
        cols.append(cloud.labels[:, None].astype(float))
    data = np.hstack(cols) if len(cloud) else np.zeros((0, 3))
    with path.open("w", encoding="utf-8") as fh:
        for row in data:
            fh.write(" ".join(_FLOAT_FMT % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# PLY (ASCII)
# ---------------------------------------------------------------------------

def read_ply(path) -> PointCloud:
    """Read an ASCII PLY file with a ``vertex`` element (x, y, z[, weight][, label])."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PointCloudParseError(path, 1, "not a PLY file (missing 'ply' magic)")
    n_vertex = None
    properties: list[str] = []
    in_vertex = False
    body_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "format":
            if tokens[1] != "ascii":
                raise PointCloudParseError(path, lineno, f"unsupported PLY format {tokens[1]!r}")
        elif tokens[0] == "element":
            in_vertex = tokens[1] == "vertex"
            if in_vertex:
                n_vertex = int(tokens[2])
        elif tokens[0] == "property" and in_vertex:
            properties.append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = lineno + 1
            break
    if body_start is None or n_vertex is None:
        raise PointCloudParseError(path, len(lines), "PLY header missing end_header or vertex element")
    for axis in ("x", "y", "z"):
        if axis not in properties:
            raise PointCloudParseError(path, body_start - 1, f"vertex element lacks property {axis!r}")
    rows = []
    for offset in range(n_vertex):
        lineno = body_start + offset
        if lineno > len(lines):
            raise PointCloudParseError(path, len(lines), f"expected {n_vertex} vertices, file ended early")
        parts = lines[lineno - 1].split()
        if len(parts) != len(properties):
            raise PointCloudParseError(
                path, lineno, f"expected {len(properties)} values, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise PointCloudParseError(path, lineno, f"non-numeric value in {parts!r}") from None
    table = np.asarray(rows, dtype=float).reshape(n_vertex, len(properties))
    col = {name: i for i, name in enumerate(properties)}
    labels = None
    if "label" in col:
        lab = table[:, col["label"]]
        bad = np.flatnonzero(~np.isin(lab, (0.0, 1.0)))
        if bad.size:
            raise PointCloudParseError(path, body_start + int(bad[0]), "label must be 0 or 1")
        labels = lab.astype(np.int8)
    return PointCloud(
        points=table[:, [col["x"], col["y"], col["z"]]],
        weights=table[:, col["weight"]] if "weight" in col else None,
        labels=labels,
    )


def write_ply(path, cloud: PointCloud) -> None:
    path = Path(path)
    props = ["x", "y", "z"]
    cols = [cloud.points]
    if cloud.weights is not None:
        props.append("weight")
        cols.append(cloud.weights[:, None])
    if cloud.labels is not None:
        props.append("label")
        cols.append(cloud.labels[:, None].astype(float))
    data = np.hstack(cols) if len(cloud) else np.zeros((0, len(props)))
    with path.open("w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(cloud)}\n")
        for name in props:
            kind = "uchar" if name == "label" else "float"
            fh.write(f"property {kind} {name}\n")
        fh.write("end_header\n")
        for row in data:
            vals = [_FLOAT_FMT % v for v in row[:3]]
            if cloud.weights is not None:
                vals.append(_FLOAT_FMT % row[3])
            if cloud.labels is not None:
                vals.append("%d" % row[-1])
            fh.write(" ".join(vals) + "\n")


def read_cloud(path) -> PointCloud:
    """Dispatch on extension: ``.ply`` -> PLY, anything else -> XYZ."""
    path = Path(path)
    return read_ply(path) if path.suffix.lower() == ".ply" else read_xyz(path)


def write_cloud(path, cloud: PointCloud) -> None:
    path = Path(path)
    (write_ply if path.suffix.lower() == ".ply" else write_xyz)(path, cloud)


# ---------------------------------------------------------------------------
# Per-point reals (detection probabilities / fitting weights)
# ---------------------------------------------------------------------------

def read_weights_file(path, n_expected: int | None = None) -> np.ndarray:
    """One real per line (``#`` comments allowed), or the PLY ``weight`` property."""
    path = Path(path)
    if path.suffix.lower() == ".ply":
        cloud = read_ply(path)
        if cloud.weights is None:
            raise FormatError(f"{path}: PLY file has no 'weight' property")
        values = cloud.weights
    else:
        out = []
        with path.open("r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    out.append(float(line))
                except ValueError:
                    raise PointCloudParseError(path, lineno, f"expected one real, got {line!r}") from None
        values = np.asarray(out, dtype=float)
    if n_expected is not None and len(values) != n_expected:
        raise FormatError(
            f"{path}: expected {n_expected} values (one per cloud point), got {len(values)}"
        )
    return values


def write_weights_file(path, values) -> None:
    values = np.asarray(values, dtype=float).reshape(-1)
    with Path(path).open("w", encoding="utf-8") as fh:
        for v in values:
            fh.write(_FLOAT_FMT % v + "\n")


# ---------------------------------------------------------------------------
# Circle records (JSON)
# ---------------------------------------------------------------------------

def circle_record(circle: Circle3D, diagnostics=None, constraint: str | None = None) -> dict:
    """JSON-serializable record for one fitted circle."""
    rec = {
        "center": [float(v) for v in circle.center],
        "radius": float(circle.radius),
        "normal": [float(v) for v in circle.normal],
    }
    if diagnostics is not None:
        rec["eta"] = None if diagnostics.eta is None else float(diagnostics.eta)
        rec["objective"] = float(diagnostics.objective)
    if constraint is not None:
        rec["constraint"] = constraint
    return rec


def circle_from_record(rec: dict) -> Circle3D:
    """Rebuild a Circle3D from a record; in-plane axes are reconstructed."""
    center = check_vector(rec["center"], 3, "center")
    normal = check_unit_vector(rec["normal"], 3, "normal", tol=1e-3)
    frame = frame_from_normal(center, normal)
    return Circle3D(frame=frame, circle=Circle2D(center=np.zeros(2), radius=float(rec["radius"])))


def frame_from_normal(origin, normal) -> PlaneFrame:
    """Deterministic plane frame with the given origin and unit normal."""
    n = check_unit_vector(normal, 3, "normal", tol=1e-6)
    seed_axis = np.zeros(3)
    seed_axis[int(np.argmin(np.abs(n)))] = 1.0
    u = seed_axis - (seed_axis @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return PlaneFrame(origin=check_vector(origin, 3, "origin"), normal=n, u_axis=u, v_axis=v)


def write_instances_json(path, instances, constraint: str | None = None) -> None:
    """Write CircleInstance records (circle + diagnostics + inliers) as a JSON array."""
    records = []
    for inst in instances:
        rec = circle_record(inst.circle, inst.diagnostics, constraint)
        rec["inliers"] = [int(i) for i in inst.inlier_indices]
        records.append(rec)
    Path(path).write_text(dumps_json(records), encoding="utf-8")


def read_instances_json(path) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise FormatError(f"{path}: expected a JSON array of circle records")
    return data


def write_truth_json(path, circles: list[Circle3D]) -> None:
    Path(path).write_text(dumps_json([circle_record(c) for c in circles]), encoding="utf-8")


def read_truth_json(path) -> list[Circle3D]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise FormatError(f"{path}: expected a JSON array of circle records")
    return [circle_from_record(rec) for rec in data]


def dumps_json(obj) -> str:
    """Deterministic JSON text: sorted keys, stable float repr, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
