"""Rigid transforms, yaw conventions and the workspace constraint box.

Workcell frame: z up, origin at the table center, +y toward the operator
side. Yaw is measured about +z and is zero along +y, so the planar
orientation vector [sin(yaw), cos(yaw), 0] points at the operator when
yaw = 0.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DegenerateDirection

# Horizontal offsets below this are treated as directionless.
DEGENERATE_EPS = 1e-9

# Orthonormality tolerance for rotation matrices.
ROTATION_TOL = 1e-9


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def rotation_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix of a rotation vector (axis * angle); log's inverse."""
    w = np.asarray(w, dtype=float)
    angle = float(np.linalg.norm(w))
    if angle < 1e-12:
        return np.eye(3)
    K = hat(w / angle)
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotation_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_angle = (np.trace(R) - 1.0) / 2.0
    cos_angle = min(1.0, max(-1.0, cos_angle))
    angle = math.acos(cos_angle)
    if angle < 1e-12:
        return np.zeros(3)
    if abs(math.pi - angle) < 1e-6:
        # Near pi the off-diagonal formula collapses; recover the axis from
        # the dominant column of R + I.
        M = R + np.eye(3)
        axis = M[:, int(np.argmax(np.diag(M)))]
        axis = axis / np.linalg.norm(axis)
        return axis * angle
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * (angle / (2.0 * math.sin(angle)))


@dataclasses.dataclass
class RigidTransform:
    """Proper rigid motion: rotation (3x3, det +1) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Map a point from this frame into the parent frame."""
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def apply_direction(self, d: np.ndarray) -> np.ndarray:
        """Rotate a direction vector (no translation)."""
        return self.rotation @ np.asarray(d, dtype=float)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying `other` first, then this one."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def is_valid(self, tol: float = ROTATION_TOL) -> bool:
        R = self.rotation
        if not np.allclose(R.T @ R, np.eye(3), atol=tol):
            return False
        return bool(np.linalg.det(R) > 0.0)

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def yaw_toward(origin: np.ndarray, target: np.ndarray) -> float:
    """Yaw of the horizontal direction from origin to target.

    Raises DegenerateDirection when the two points share (nearly) the same
    horizontal position.
    """
    dx = float(target[0] - origin[0])
    dy = float(target[1] - origin[1])
    if math.hypot(dx, dy) < DEGENERATE_EPS:
        raise DegenerateDirection(
            "horizontal offset %.3g m is below %.1g" % (math.hypot(dx, dy), DEGENERATE_EPS)
        )
    return math.atan2(dx, dy)


def orientation_from_yaw(yaw: float) -> np.ndarray:
    """Unit planar orientation vector [sin(yaw), cos(yaw), 0]."""
    return np.array([math.sin(yaw), math.cos(yaw), 0.0])


def yaw_from_orientation(a: np.ndarray) -> float:
    """Inverse of orientation_from_yaw."""
    if math.hypot(float(a[0]), float(a[1])) < DEGENERATE_EPS:
        raise DegenerateDirection("orientation vector has no horizontal part")
    return math.atan2(float(a[0]), float(a[1]))


def aim_rotation(yaw: float) -> np.ndarray:
    """Tool rotation whose z-axis is the horizontal aim direction at `yaw`.

    Columns are the tool axes in world coordinates: z = [sin, cos, 0]
    (the aim), y = world down, x completes the right-handed frame.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [c, 0.0, s],
            [-s, 0.0, c],
            [0.0, -1.0, 0.0],
        ]
    )


def yaw_of_rotation(R: np.ndarray) -> float:
    """Yaw of a tool rotation matrix.

    Uses the horizontal projection of the tool z-axis; falls back to the
    x-axis when the z-axis is near vertical (both cannot be vertical at
    once since they are orthogonal).
    """
    zx, zy = float(R[0, 2]), float(R[1, 2])
    if math.hypot(zx, zy) >= 1e-6:
        return math.atan2(zx, zy)
    xx, xy = float(R[0, 0]), float(R[1, 0])
    return math.atan2(-xy, xx)


@dataclasses.dataclass
class Pose:
    """Tool pose: position plus planar orientation vector."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.orientation = np.asarray(self.orientation, dtype=float)

    @property
    def yaw(self) -> float:
        return yaw_from_orientation(self.orientation)

    @classmethod
    def from_position_yaw(cls, position: np.ndarray, yaw: float) -> "Pose":
        return cls(np.asarray(position, dtype=float), orientation_from_yaw(yaw))


@dataclasses.dataclass
class ConstraintBox:
    """Axis-aligned position box plus a yaw interval.

    Defaults cover the reachable work volume under the inverted arm.
    """

    x_min: float = -0.9
    x_max: float = 0.9
    y_min: float = -0.9
    y_max: float = 0.9
    z_min: float = 0.2
    z_max: float = 1.2
    yaw_min: float = -math.pi / 4.0
    yaw_max: float = math.pi / 4.0

    def __post_init__(self):
        if not (
            self.x_min < self.x_max
            and self.y_min < self.y_max
            and self.z_min < self.z_max
            and self.yaw_min < self.yaw_max
        ):
            raise ValueError("constraint box bounds must satisfy min < max")

    def contains_position(self, p: np.ndarray, tol: float = 0.0) -> bool:
        return bool(
            self.x_min - tol <= p[0] <= self.x_max + tol
            and self.y_min - tol <= p[1] <= self.y_max + tol
            and self.z_min - tol <= p[2] <= self.z_max + tol
        )

    def contains_yaw(self, yaw: float, tol: float = 0.0) -> bool:
        return bool(self.yaw_min - tol <= yaw <= self.yaw_max + tol)

    def clamp_position(self, p: np.ndarray) -> np.ndarray:
        lo = np.array([self.x_min, self.y_min, self.z_min])
        hi = np.array([self.x_max, self.y_max, self.z_max])
        return np.clip(np.asarray(p, dtype=float), lo, hi)

    def clamp_yaw(self, yaw: float) -> float:
        return float(min(self.yaw_max, max(self.yaw_min, yaw)))
