"""Shared helpers for the test suite."""

import numpy as np
import pytest

from circlekit.geometry import Circle2D, Circle3D
from circlekit.io import frame_from_normal


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random proper rotation matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, [0, 1]] = q[:, [1, 0]]
    return q


def circle_points_2d(center, radius, n, rng=None, noise=0.0, arc=2.0 * np.pi, start=0.0):
    """Points along a 2D circle arc, optionally jittered with Gaussian noise."""
    theta = start + np.linspace(0.0, arc, n, endpoint=arc < 2.0 * np.pi)
    pts = np.column_stack((center[0] + radius * np.cos(theta),
                           center[1] + radius * np.sin(theta)))
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, pts.shape)
    return pts


def circle_points_3d(center, normal, radius, n, rng=None, noise=0.0,
                     arc=2.0 * np.pi, start=0.0):
    """Points along a posed 3D circle arc plus the Circle3D ground truth."""
    frame = frame_from_normal(center, np.asarray(normal, float) / np.linalg.norm(normal))
    theta = start + np.linspace(0.0, arc, n, endpoint=arc < 2.0 * np.pi)
    pts = (frame.origin
           + radius * np.cos(theta)[:, None] * frame.u_axis
           + radius * np.sin(theta)[:, None] * frame.v_axis)
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, pts.shape)
    truth = Circle3D(frame=frame, circle=Circle2D(center=np.zeros(2), radius=radius))
    return pts, truth


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
