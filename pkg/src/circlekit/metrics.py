"""Detection and fitting metrics, plus report rendering.

Detection quality is precision / recall / F1 over circle-boundary points;
fitting quality over matched circle pairs is the average center deviation
``AD(c) = mean ||c - c_hat||``, the average radius deviation
``AD(r) = mean |r - r_hat|`` and the mean squared radius error
``MSE(r) = mean (r - r_hat)^2``. Zero-denominator scores are defined as 0 so
reports stay totally ordered; stored values are unit fractions (percentages
are a display concern).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError
from .geometry import Circle3D
from .validation import check_indices


@dataclass(frozen=True)
class DetectionScore:
    """Precision / recall / F1 with the underlying counts."""

    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "DetectionScore":
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        return cls(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1)


@dataclass(frozen=True)
class FitScore:
    """Aggregate fitting errors over ``k`` matched circles."""

    ad_c: float
    ad_r: float
    mse_r: float
    k: int


def score_detection(predicted, truth_labels) -> DetectionScore:
    """Score a predicted boundary-point index set against 0/1 truth labels."""
    labels = np.asarray(truth_labels).reshape(-1)
    idx = check_indices(predicted, len(labels), "predicted")
    predicted_mask = np.zeros(len(labels), dtype=bool)
    predicted_mask[idx] = True
    positive = labels == 1
    tp = int((predicted_mask & positive).sum())
    fp = int((predicted_mask & ~positive).sum())
    fn = int((~predicted_mask & positive).sum())
    return DetectionScore.from_counts(tp, fp, fn)


def circle_pair_errors(found: Circle3D, truth: Circle3D, in_plane: bool = False):
    """(center deviation, radius deviation) for one matched pair.

    The center deviation is measured in 3D by default; ``in_plane`` projects
    the center offset onto the truth circle's plane first.
    """
    delta = found.center - truth.center
    if in_plane:
        n = truth.frame.normal
        delta = delta - (delta @ n) * n
    return float(np.linalg.norm(delta)), abs(found.radius - truth.radius)


def score_fitting(pairs, in_plane: bool = False) -> FitScore:
    """Aggregate AD(c), AD(r), MSE(r) over matched (found, truth) circle pairs."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidArgumentError("cannot score an empty pairing")
    d_center = []
    d_radius = []
    for found, truth in pairs:
        dc, dr = circle_pair_errors(found, truth, in_plane=in_plane)
        d_center.append(dc)
        d_radius.append(dr)
    d_center = np.asarray(d_center)
    d_radius = np.asarray(d_radius)
    return FitScore(
        ad_c=float(d_center.mean()),
        ad_r=float(d_radius.mean()),
        mse_r=float((d_radius**2).mean()),
        k=len(pairs),
    )


@dataclass
class EvalReport:
    """Everything one evaluation run produced, ready for JSON / table / CSV."""

    detection: DetectionScore | None = None
    fitting: FitScore | None = None
    per_circle: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {"config": self.config, "per_circle": self.per_circle}
        if self.detection is not None:
            d = self.detection
            out["detection"] = {
                "tp": d.tp, "fp": d.fp, "fn": d.fn,
                "precision": d.precision, "recall": d.recall, "f1": d.f1,
            }
        if self.fitting is not None:
            f = self.fitting
            out["fitting"] = {"ad_c": f.ad_c, "ad_r": f.ad_r, "mse_r": f.mse_r, "k": f.k}
        return out

    def render_table(self) -> str:
        lines = []
        if self.detection is not None:
            d = self.detection
            lines.append(f"{'':12s}{'Precision':>12s}{'Recall':>12s}{'F1':>12s}")
            lines.append(
                f"{'detection':12s}{d.precision:12.6f}{d.recall:12.6f}{d.f1:12.6f}"
            )
        if self.fitting is not None:
            f = self.fitting
            lines.append(f"{'':12s}{'AD(c)':>12s}{'AD(r)':>12s}{'MSE(r)':>12s}{'K':>6s}")
            lines.append(
                f"{'fitting':12s}{f.ad_c:12.6f}{f.ad_r:12.6f}{f.mse_r:12.6f}{f.k:6d}"
            )
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["truth_id,ad_c,ad_r"]
        for entry in self.per_circle:
            rows.append(f"{entry['truth_id']},{entry['ad_c']:.12g},{entry['ad_r']:.12g}")
        if self.fitting is not None:
            rows.append(f"aggregate,{self.fitting.ad_c:.12g},{self.fitting.ad_r:.12g}")
        return "\n".join(rows) + "\n"


def evaluate(found, truth, pairs, predicted=None, truth_labels=None,
             in_plane: bool = False, config: dict | None = None) -> EvalReport:
    """Assemble a full report from matched circles and (optionally) detection sets."""
    found_circles = [getattr(f, "circle", f) if hasattr(f, "inlier_indices") else f
                     for f in found]
    per_circle = []
    matched = []
    for fi, ti in pairs:
        dc, dr = circle_pair_errors(found_circles[fi], truth[ti], in_plane=in_plane)
        per_circle.append({"truth_id": int(ti), "ad_c": dc, "ad_r": dr})
        matched.append((found_circles[fi], truth[ti]))
    report = EvalReport(config=config or {}, per_circle=per_circle)
    if matched:
        report.fitting = score_fitting(matched, in_plane=in_plane)
    if predicted is not None and truth_labels is not None:
        report.detection = score_detection(predicted, truth_labels)
    return report


def format_metrics_grid(rows: dict, noise_labels: list[str]) -> str:
    """Aligned grid in the usual layout: method rows, noise-level column groups.

    ``rows`` maps a method name to ``{noise_label: FitScore}``.
    """
    header1 = f"{'':10s}"
    header2 = f"{'Method':10s}"
    for label in noise_labels:
        header1 += f"{label:^36s}"
        header2 += f"{'AD(c)':>12s}{'AD(r)':>12s}{'MSE(r)':>12s}"
    lines = [header1, header2]
    for method, scores in rows.items():
        line = f"{method:10s}"
        for label in noise_labels:
            score = scores.get(label)
            if score is None:
                line += f"{'-':>12s}{'-':>12s}{'-':>12s}"
            else:
                line += f"{score.ad_c:12.6f}{score.ad_r:12.6f}{score.mse_r:12.6f}"
        lines.append(line)
    return "\n".join(lines)
