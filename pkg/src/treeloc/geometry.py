"""Rigid transforms, quaternions and small rotation helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_2d(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def axis_angle(axis: Sequence[float], angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=float)
    n = np.linalg.norm(k)
    if n == 0.0 or angle == 0.0:
        return np.eye(3)
    k = k / n
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotvec(w: Sequence[float]) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    if theta < 1e-300:
        return np.eye(3)
    return axis_angle(w / theta, theta)


def minimal_rotation(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Smallest rotation carrying unit vector ``u`` onto unit vector ``w``."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    c = float(np.clip(u @ w, -1.0, 1.0))
    axis = np.cross(u, w)
    s = float(np.linalg.norm(axis))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # antiparallel: half turn about any axis orthogonal to u
        helper = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = np.cross(u, helper)
        return axis_angle(axis, math.pi)
    return axis_angle(axis / s, math.atan2(s, c))


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, radians."""
    c = (np.trace(R) - 1.0) / 2.0
    # asin-based branch keeps precision for tiny angles
    skew = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / 2.0
    return math.atan2(float(np.linalg.norm(skew)), float(np.clip(c, -1.0, 1.0)))


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0."""
    R = np.asarray(R, dtype=float)
    t = np.trace(R)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = (float(v) for v in q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def yaw_of(R: np.ndarray) -> float:
    """Twist angle about z of ``R`` (swing-twist decomposition)."""
    q = matrix_to_quat(R)
    return 2.0 * math.atan2(q[3], q[0])


def swing_of(R: np.ndarray) -> np.ndarray:
    """Swing part ``S`` of ``R = S @ Rz(twist)``; ``S`` rotates about a horizontal axis."""
    return R @ rot_z(-yaw_of(R))


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    out = np.mod(np.asarray(a, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    out = np.where(out <= -math.pi, out + 2.0 * math.pi, out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation acting as ``x -> R x + t``."""

    rotation: np.ndarray
    translation: np.ndarray
    # quaternion the transform was parsed from, so text round trips are exact
    source_quat: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_quat(cls, t: Sequence[float], q: Sequence[float]) -> "RigidTransform":
        qa = np.asarray(q, dtype=float)
        n = float(np.linalg.norm(qa))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion not unit-norm (|q| = {n!r})")
        q0 = -qa if qa[0] < 0 else qa.copy()
        q0.setflags(write=False)
        return cls(quat_to_matrix(qa), t, q0)

    @property
    def quat(self) -> np.ndarray:
        if self.source_quat is not None:
            return self.source_quat.copy()
        return matrix_to_quat(self.rotation)

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.translation

    def __eq__(self, other) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation)
                    and np.array_equal(self.translation, other.translation))

    def __repr__(self) -> str:
        return f"RigidTransform(t={self.translation.tolist()}, q={self.quat.tolist()})"


def pose_errors(est: RigidTransform, gt: RigidTransform) -> tuple:
    """(3D translation m, 3D rotation rad, 2D translation m, 2D yaw rad).

    The 2D rotation error is the twist about z of the error rotation, which is
    never larger than the geodesic angle.
    """
    dt = est.translation - gt.translation
    E = gt.rotation.T @ est.rotation
    ang = rotation_angle(E)
    q = matrix_to_quat(E)
    yaw_err = 2.0 * math.atan2(abs(q[3]), abs(q[0]))
    return float(np.linalg.norm(dt)), ang, float(np.linalg.norm(dt[:2])), min(yaw_err, ang)
