"""Synthetic detection sources: fixed depth cameras and the arm-mounted
stereo head.

Detections are modeled as the target center plus sensor-specific error:
fixed cameras report in world coordinates through their believed pose
(miscalibration shows up as a persistent offset), the stereo head reports
in its own camera frame with quantized depth. Cameras look along +z of
their frame.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from .geometry import RigidTransform
from .kinematics import ArmModel, joint_origins, tool_transform


@dataclasses.dataclass
class FrustumSpec:
    """Right circular view cone clipped by near and far planes."""

    fov: float
    near: float
    far: float

    def __post_init__(self):
        if not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if not 0.0 < self.near < self.far:
            raise ValueError("need 0 < near < far")


def in_frustum(p: np.ndarray, sensor_pose: RigidTransform, frustum: FrustumSpec) -> bool:
    """True when world point p is inside the sensor's view cone."""
    cam = sensor_pose.inverse().apply(p)
    return in_frustum_camera(cam, frustum)


def in_frustum_camera(p_cam: np.ndarray, frustum: FrustumSpec) -> bool:
    depth = float(p_cam[2])
    if not frustum.near <= depth <= frustum.far:
        return False
    lateral = math.hypot(float(p_cam[0]), float(p_cam[1]))
    return math.atan2(lateral, depth) <= frustum.fov / 2.0


def look_at(origin: np.ndarray, target: np.ndarray, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera pose at origin with +z toward target and x roughly level."""
    origin = np.asarray(origin, dtype=float)
    z = np.asarray(target, dtype=float) - origin
    z = z / np.linalg.norm(z)
    up = np.asarray(up, dtype=float)
    x = np.cross(up, z)
    n = np.linalg.norm(x)
    if n < 1e-9:
        # Looking straight along up: pick any level x.
        x = np.array([1.0, 0.0, 0.0])
    else:
        x = x / n
    y = np.cross(z, x)
    return RigidTransform(np.column_stack([x, y, z]), origin)


@dataclasses.dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)


@dataclasses.dataclass
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def segment_segment_distance(
    p1: np.ndarray, q1: np.ndarray, p2: np.ndarray, q2: np.ndarray
) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a < 1e-18 and e < 1e-18:
        return float(np.linalg.norm(r))
    if a < 1e-18:
        t = min(1.0, max(0.0, f / e))
        return float(np.linalg.norm(p1 - (p2 + t * d2)))
    c = float(d1 @ r)
    if e < 1e-18:
        s = min(1.0, max(0.0, -c / a))
        return float(np.linalg.norm(p1 + s * d1 - p2))
    b = float(d1 @ d2)
    denom = a * e - b * b
    if denom > 1e-18:
        s = min(1.0, max(0.0, (b * f - c * e) / denom))
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


def segment_blocked(origin: np.ndarray, p: np.ndarray, obstacle) -> bool:
    if isinstance(obstacle, Sphere):
        return point_segment_distance(obstacle.center, origin, p) < obstacle.radius
    if isinstance(obstacle, Capsule):
        return (
            segment_segment_distance(origin, p, obstacle.a, obstacle.b)
            < obstacle.radius
        )
    raise TypeError("unsupported obstacle type %r" % (obstacle,))


@dataclasses.dataclass
class Ball:
    """Spherical target; signed distance is negative inside."""

    radius: float

    def signed_distance(self, p: np.ndarray, center: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(p) - np.asarray(center))) - self.radius


@dataclasses.dataclass
class Disc:
    """Flat circular target; normal faces the approach side.

    Signed distance is the normal offset (negative behind the plane, which
    counts as contact for a position-controlled tip) while the projection
    falls inside the radius, else the distance to the rim.
    """

    radius: float
    normal: np.ndarray = dataclasses.field(
        default_factory=lambda: np.array([0.0, -1.0, 0.0])
    )

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)

    def signed_distance(self, p: np.ndarray, center: np.ndarray) -> float:
        d = np.asarray(p, dtype=float) - np.asarray(center, dtype=float)
        off = float(d @ self.normal)
        in_plane = d - off * self.normal
        r = float(np.linalg.norm(in_plane))
        if r <= self.radius:
            return off
        return math.hypot(r - self.radius, off)

    def in_plane_error(self, p: np.ndarray, center: np.ndarray) -> float:
        d = np.asarray(p, dtype=float) - np.asarray(center, dtype=float)
        off = float(d @ self.normal)
        return float(np.linalg.norm(d - off * self.normal))


class Scene:
    """World state the sensors observe: one target, static occluders and
    the arm's own link capsules (refreshed as the joints move)."""

    def __init__(
        self,
        target_shape,
        target_path: Callable[[float], np.ndarray],
        occluders: list | None = None,
        arm: ArmModel | None = None,
        arm_link_radius: float = 0.06,
    ):
        self.target_shape = target_shape
        self.target_path = target_path
        self.occluders = list(occluders) if occluders else []
        self.arm = arm
        self.arm_link_radius = arm_link_radius
        self.arm_capsules: list[Capsule] = []

    def target_position(self, t: float) -> np.ndarray:
        return np.asarray(self.target_path(t), dtype=float)

    def update_arm(self, q: np.ndarray):
        if self.arm is None:
            return
        pts = joint_origins(self.arm, q)
        capsules = []
        for a, b in zip(pts[:-1], pts[1:]):
            if np.linalg.norm(b - a) < 1e-6:
                continue
            capsules.append(Capsule(a, b, self.arm_link_radius))
        self.arm_capsules = capsules

    def occluded_from(
        self, origin: np.ndarray, p: np.ndarray, include_arm: bool = True
    ) -> bool:
        obstacles = self.occluders
        if include_arm:
            obstacles = obstacles + self.arm_capsules
        return any(segment_blocked(origin, p, ob) for ob in obstacles)


def occluded(p: np.ndarray, sensor_origin: np.ndarray, scene: Scene,
             include_arm: bool = True) -> bool:
    """True when the straight ray from the sensor to p is blocked."""
    return scene.occluded_from(np.asarray(sensor_origin, dtype=float),
                               np.asarray(p, dtype=float), include_arm)


@dataclasses.dataclass
class Detection:
    """Single detection attempt. Position is meaningless when not valid."""

    sensor_id: int
    position: np.ndarray
    t: float
    valid: bool
    frame: str = "world"


@dataclasses.dataclass
class EtoHSensor:
    """Fixed depth camera watching the cell from a corner.

    believed_pose is the registration the system works with; true_pose is
    what the simulation uses to generate measurements. The radial bias term
    grows linearly with the target's horizontal distance beyond
    bias_inner_radius, modeling registration error that worsens away from
    the cell center.
    """

    sensor_id: int
    true_pose: RigidTransform
    believed_pose: RigidTransform
    frustum: FrustumSpec
    noise_sigma: float
    rate: float = 5.0
    bias_gain: float = 0.0
    bias_inner_radius: float = 0.0
    bias_excess_cap: float = math.inf
    bias_direction: np.ndarray = dataclasses.field(
        default_factory=lambda: np.zeros(3)
    )


@dataclasses.dataclass
class EinHSensor:
    """Stereo head riding on the arm, mounted behind the tool tip."""

    mount: RigidTransform
    frustum: FrustumSpec
    depth_quantum: float
    noise_sigma: float
    rate: float = 10.0
    sensor_id: int = 100

    def camera_pose(self, model: ArmModel, q: np.ndarray) -> RigidTransform:
        return tool_transform(model, q).compose(self.mount)


def observe_etoh(
    sensor: EtoHSensor, scene: Scene, t: float, rng: np.random.Generator
) -> Detection:
    """One detection attempt by a fixed camera.

    The measurement is taken in the true sensor frame and reported through
    the believed pose, so pose miscalibration becomes a persistent world-
    frame offset. Returns an invalid detection when the target is outside
    the frustum or the ray to it is blocked.
    """
    s_true = scene.target_position(t)
    visible = in_frustum(s_true, sensor.true_pose, sensor.frustum) and not (
        scene.occluded_from(sensor.true_pose.translation, s_true, include_arm=True)
    )
    if not visible:
        return Detection(sensor.sensor_id, np.zeros(3), t, valid=False)
    measured = sensor.true_pose.inverse().apply(s_true)
    reported = sensor.believed_pose.apply(measured)
    radial = math.hypot(float(s_true[0]), float(s_true[1]))
    excess = min(
        max(0.0, radial - sensor.bias_inner_radius), sensor.bias_excess_cap
    )
    if excess > 0.0 and sensor.bias_gain != 0.0:
        reported = reported + sensor.bias_gain * excess * sensor.bias_direction
    if sensor.noise_sigma > 0.0:
        reported = reported + sensor.noise_sigma * rng.standard_normal(3)
    return Detection(sensor.sensor_id, reported, t, valid=True)


def observe_einh(
    sensor: EinHSensor,
    scene: Scene,
    model: ArmModel,
    q: np.ndarray,
    t: float,
    rng: np.random.Generator,
) -> Detection:
    """One detection attempt by the arm-mounted stereo head.

    Reports in the camera frame: depth snapped to the nearest multiple of
    the depth quantum, Gaussian noise on the two lateral axes. The arm's
    own links are not occluders here (the head is aimed past its tooltip);
    scene occluders still block the view.
    """
    cam = sensor.camera_pose(model, q)
    s_true = scene.target_position(t)
    p_cam = cam.inverse().apply(s_true)
    visible = in_frustum_camera(p_cam, sensor.frustum) and not scene.occluded_from(
        cam.translation, s_true, include_arm=False
    )
    if not visible:
        return Detection(sensor.sensor_id, np.zeros(3), t, valid=False, frame="camera")
    out = p_cam.copy()
    if sensor.depth_quantum > 0.0:
        out[2] = round(out[2] / sensor.depth_quantum) * sensor.depth_quantum
    if sensor.noise_sigma > 0.0:
        out[:2] = out[:2] + sensor.noise_sigma * rng.standard_normal(2)
    return Detection(sensor.sensor_id, out, t, valid=True, frame="camera")
