"""Rigid transforms between labeled frames and pinhole camera projection.

Rotations are unit quaternions in scalar-first order (w, x, y, z).  Every
transform carries the names of the frames it maps between, and composition
refuses to chain transforms whose frame labels do not line up.  That check has
caught more bugs than any other assert in this codebase; do not remove it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import FrameMismatchError

_QUAT_NORM_TOL = 1e-9


def _as_vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of two (w, x, y, z) quaternions."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix for a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Quaternion (w, x, y, z) for a proper rotation matrix.

    Shepperd's method: pick the largest diagonal combination to stay away
    from the small-divisor cases.
    """
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_from_yaw(yaw: float) -> np.ndarray:
    """Quaternion for a rotation of `yaw` radians about +z."""
    return np.array([np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)])


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) map taking points expressed in `from_frame` into `to_frame`."""

    rotation: np.ndarray  # unit quaternion (w, x, y, z)
    translation: np.ndarray  # (3,)
    from_frame: str = "ego"
    to_frame: str = "city"

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=np.float64)
        t = _as_vec3(self.translation)
        if q.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(t)):
            raise ValueError("transform components must be finite")
        norm = np.linalg.norm(q)
        if norm < 1e-12:
            raise ValueError("zero-norm quaternion")
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            q = q / norm
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix form."""
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m


def identity_transform(from_frame: str = "ego", to_frame: str = "ego") -> RigidTransform:
    return RigidTransform(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), from_frame, to_frame)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying `b` first, then `a`.

    Frame labels must chain: b maps X->Y, a maps Y->Z, result maps X->Z.
    """
    if a.from_frame != b.to_frame:
        raise FrameMismatchError(
            f"cannot compose: left expects points in '{a.from_frame}' "
            f"but right produces '{b.to_frame}'"
        )
    q = quat_multiply(a.rotation, b.rotation)
    t = quat_to_matrix(a.rotation) @ b.translation + a.translation
    return RigidTransform(q, t, b.from_frame, a.to_frame)


def invert(t: RigidTransform) -> RigidTransform:
    q_inv = quat_conjugate(t.rotation)
    t_inv = -(quat_to_matrix(q_inv) @ t.translation)
    return RigidTransform(q_inv, t_inv, t.to_frame, t.from_frame)


def transform_point(t: RigidTransform, p) -> np.ndarray:
    return quat_to_matrix(t.rotation) @ _as_vec3(p) + t.translation


def transform_points(t: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Apply `t` to an (N, 3) array of points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got shape {pts.shape}")
    return pts @ quat_to_matrix(t.rotation).T + t.translation


class Pixel(NamedTuple):
    u: float
    v: float
    depth: float


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the ego-to-camera extrinsic transform.

    Camera frame convention: +z looks out of the lens, +x right, +y down,
    so a point is in front of the camera iff its camera-frame z is positive.
    """

    camera_id: str
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: RigidTransform = field(
        default_factory=lambda: identity_transform("ego", "camera")
    )

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")


def project_to_image(cam: CameraModel, p_ego) -> Optional[Pixel]:
    """Project an ego-frame point into the image, or None when not visible.

    Not visible means behind the camera (depth <= 0) or outside the image
    bounds. Callers rely on the None: downstream filters treat off-image
    points differently from in-image ones.
    """
    p_cam = transform_point(cam.extrinsics, p_ego)
    depth = p_cam[2]
    if depth <= 0:
        return None
    u = cam.fx * p_cam[0] / depth + cam.cx
    v = cam.fy * p_cam[1] / depth + cam.cy
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        return None
    return Pixel(float(u), float(v), float(depth))


def project_points(cam: CameraModel, points: np.ndarray):
    """Vectorized projection of (N, 3) ego-frame points.

    Returns (uv, depth, visible): uv is (N, 2) pixel coordinates (valid only
    where visible), depth is camera-frame z, and visible flags points that
    land inside the image with positive depth.
    """
    p_cam = transform_points(cam.extrinsics, points)
    depth = p_cam[:, 2]
    uv = np.zeros((len(p_cam), 2))
    in_front = depth > 0
    safe = np.where(in_front, depth, 1.0)
    uv[:, 0] = cam.fx * p_cam[:, 0] / safe + cam.cx
    uv[:, 1] = cam.fy * p_cam[:, 1] / safe + cam.cy
    visible = (
        in_front
        & (uv[:, 0] >= 0.0)
        & (uv[:, 0] < cam.width)
        & (uv[:, 1] >= 0.0)
        & (uv[:, 1] < cam.height)
    )
    return uv, depth, visible
