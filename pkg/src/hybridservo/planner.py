"""Per-segment goal computation, diagnostic cost, and waystate trajectories.

A segment goal discounts the step toward the latest target estimate, the
tool is kept pointing at the operator side of the cell, and the resulting
pose is realized as a joint-interpolated trajectory under a trapezoidal
velocity profile.
"""

from __future__ import annotations

import dataclasses
import math
from typing import List, Optional

import numpy as np

from .errors import LimitViolation
from .geometry import ConstraintBox, Pose, orientation_from_yaw, yaw_toward
from .kinematics import ArmModel, RobotState, forward_kinematics, inverse_kinematics

DEFAULT_ALPHA = 0.8
SNAP_DISTANCE = 0.02
WAYPOINT_SPACING = 0.05
MIN_DURATION = 0.001
FACING_OPERATOR = np.array([0.0, 1.0, 0.0])


@dataclasses.dataclass
class GoalPose:
    y_star: np.ndarray
    a_star: np.ndarray

    def __post_init__(self):
        self.y_star = np.asarray(self.y_star, dtype=float)
        self.a_star = np.asarray(self.a_star, dtype=float)

    def as_pose(self) -> Pose:
        return Pose(self.y_star, self.a_star)


@dataclasses.dataclass
class PlannerWeights:
    w1: np.ndarray = dataclasses.field(
        default_factory=lambda: np.array([10.0, 10.0, 10.0])
    )
    w2: np.ndarray = dataclasses.field(default_factory=lambda: np.ones(3))
    c: np.ndarray = dataclasses.field(default_factory=lambda: np.full(6, 0.1))

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if self.w1.shape != (3,) or self.w2.shape != (3,) or self.c.shape != (6,):
            raise ValueError("weights must be diagonal entries of sizes 3, 3, 6")
        if np.any(self.w1 <= 0.0) or np.any(self.w2 <= 0.0):
            raise ValueError("pose weights must be strictly positive")
        if np.any(self.c < 0.0):
            raise ValueError("joint weights must be nonnegative")


@dataclasses.dataclass
class Waystate:
    t: float
    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.q_dot = np.asarray(self.q_dot, dtype=float)
        self.q_ddot = np.asarray(self.q_ddot, dtype=float)
        for arr in (self.q, self.q_dot, self.q_ddot):
            if arr.shape != (6,):
                raise ValueError("waystates carry 6-vectors")

    @classmethod
    def at_rest(cls, t: float, q: np.ndarray) -> "Waystate":
        return cls(t, np.asarray(q, dtype=float), np.zeros(6), np.zeros(6))


@dataclasses.dataclass
class SegmentPlan:
    k: int
    waystates: List[Waystate]
    t0: float
    te: float

    @property
    def duration(self) -> float:
        return self.te - self.t0

    @property
    def end_state(self) -> Waystate:
        return self.waystates[-1]

    def sample(self, t: float) -> Waystate:
        """State at time t, held at the boundary states outside [t0, te].

        Exact for the piecewise-constant accelerations this planner emits.
        """
        ws = self.waystates
        if t <= ws[0].t:
            return ws[0]
        if t >= ws[-1].t:
            return ws[-1]
        idx = 0
        for i in range(len(ws) - 1):
            if ws[i].t <= t < ws[i + 1].t:
                idx = i
                break
        base = ws[idx]
        dt = t - base.t
        q = base.q + base.q_dot * dt + 0.5 * base.q_ddot * dt * dt
        q_dot = base.q_dot + base.q_ddot * dt
        return Waystate(t, q, q_dot, base.q_ddot.copy())

    def validate(self, model: ArmModel, tol: float = 1e-6):
        """Limit and consistency checks; raises LimitViolation on failure."""
        ws = self.waystates
        if len(ws) < 2:
            raise LimitViolation(f"segment {self.k}: needs at least two waystates")
        for i in range(len(ws) - 1):
            if ws[i + 1].t <= ws[i].t:
                raise LimitViolation(f"segment {self.k}: waystates not time-ordered")
        lo = model.joint_limits[:, 0]
        hi = model.joint_limits[:, 1]
        vmax = model.max_velocity
        amax = model.max_acceleration
        for w in ws:
            if np.any(w.q < lo - tol) or np.any(w.q > hi + tol):
                raise LimitViolation(f"segment {self.k}: joint limit exceeded")
            if np.any(np.abs(w.q_dot) > vmax + tol):
                raise LimitViolation(f"segment {self.k}: velocity limit exceeded")
            if np.any(np.abs(w.q_ddot) > amax + tol):
                raise LimitViolation(f"segment {self.k}: acceleration limit exceeded")
        for a, b in zip(ws, ws[1:]):
            dt = b.t - a.t
            implied = (b.q - a.q) / dt
            avg = 0.5 * (a.q_dot + b.q_dot)
            scale = max(float(np.max(np.abs(avg))), float(np.max(np.abs(implied))), 1e-6)
            if np.max(np.abs(avg - implied)) > 0.05 * scale + tol:
                raise LimitViolation(
                    f"segment {self.k}: velocity inconsistent with positions"
                )


def compute_goal_position(
    y0: np.ndarray,
    s_prev: np.ndarray,
    distance_to_target: float,
    box: Optional[ConstraintBox] = None,
    alpha: float = DEFAULT_ALPHA,
    snap_distance: float = SNAP_DISTANCE,
) -> np.ndarray:
    """Discounted step toward the estimate, clamped into the workspace box."""
    if box is None:
        box = ConstraintBox()
    y0 = np.asarray(y0, dtype=float)
    s_prev = np.asarray(s_prev, dtype=float)
    a = 1.0 if distance_to_target < snap_distance else alpha
    return box.clamp_position(y0 + a * (s_prev - y0))


AIM_EPS = 0.05


def compute_goal_orientation(
    y0: np.ndarray,
    s_prev: np.ndarray,
    previous: Optional[np.ndarray] = None,
    box: Optional[ConstraintBox] = None,
    aim_eps: float = AIM_EPS,
) -> np.ndarray:
    """Point the tool at the target, yaw clamped to the allowed wedge.

    Within aim_eps of the target horizontally there is no stable aim
    direction (a centimeter of estimate jitter swings the yaw arbitrarily,
    possibly outside the reachable wrist range), so the previous
    orientation — or the neutral operator-facing one — is kept.
    """
    if box is None:
        box = ConstraintBox()
    d = np.asarray(s_prev, dtype=float) - np.asarray(y0, dtype=float)
    if math.hypot(d[0], d[1]) < aim_eps:
        if previous is not None:
            return np.asarray(previous, dtype=float)
        return FACING_OPERATOR.copy()
    gamma = box.clamp_yaw(yaw_toward(y0, s_prev))
    return orientation_from_yaw(gamma)


def task_cost(
    r: RobotState, goal: GoalPose, q_star: np.ndarray, w: PlannerWeights
) -> float:
    dy = goal.y_star - r.position
    da = goal.a_star - r.orientation
    dq = np.asarray(q_star, dtype=float) - r.q
    return float(dy @ (w.w1 * dy) + da @ (w.w2 * da) + dq @ (w.c * dq))


def _profile_times(s_values, s_dot_max, s_ddot_max):
    """Map path-parameter values to (t, s_dot, s_ddot) on a trapezoid.

    The profile covers s in [0, 1] from rest to rest. Returns the total
    duration and the per-value kinematics, where s_ddot is the constant
    acceleration of the interval that STARTS at the value.
    """
    t_acc = s_dot_max / s_ddot_max
    s_acc = 0.5 * s_ddot_max * t_acc * t_acc
    if 2.0 * s_acc > 1.0:
        # Triangular: never reaches cruise speed.
        s_acc = 0.5
        s_dot_max = math.sqrt(s_ddot_max)
        t_acc = s_dot_max / s_ddot_max
        total = 2.0 * t_acc
        t_cruise_end = t_acc
    else:
        cruise = (1.0 - 2.0 * s_acc) / s_dot_max
        total = 2.0 * t_acc + cruise
        t_cruise_end = t_acc + cruise
    s_cruise_end = 1.0 - s_acc
    out = []
    for s in s_values:
        if s < s_acc - 1e-12:
            t = math.sqrt(2.0 * s / s_ddot_max)
            out.append((t, s_ddot_max * t, s_ddot_max))
        elif s < s_cruise_end - 1e-12:
            t = t_acc + (s - s_acc) / s_dot_max
            out.append((t, s_dot_max, 0.0))
        elif s < 1.0 - 1e-12:
            t = total - math.sqrt(2.0 * (1.0 - s) / s_ddot_max)
            out.append((t, s_ddot_max * (total - t), -s_ddot_max))
        else:
            out.append((total, 0.0, 0.0))
    # The value sitting exactly on a phase boundary must carry the next
    # phase's acceleration so forward integration stays exact.
    for i, (t, v, _) in enumerate(out):
        if abs(t - t_acc) < 1e-12 and t_acc < total:
            out[i] = (t, v, 0.0 if t_cruise_end > t_acc + 1e-12 else -s_ddot_max)
        elif abs(t - t_cruise_end) < 1e-12 and t_cruise_end < total:
            out[i] = (t, v, -s_ddot_max)
    return total, out


def plan_segment(
    start: Waystate,
    goal: GoalPose,
    model: ArmModel,
    k: int = 0,
    weights: Optional[PlannerWeights] = None,
    spacing: float = WAYPOINT_SPACING,
) -> SegmentPlan:
    """Joint-interpolated trapezoidal trajectory from start to the goal pose.

    Waypoint count grows with the task-space distance (one per `spacing`
    meters, at least two). Profile phase boundaries are inserted as extra
    waystates so sampled motion integrates exactly.
    """
    if float(np.max(np.abs(start.q_dot))) > 1e-9:
        raise LimitViolation("segments must start from rest")
    q0 = start.q
    q_star = inverse_kinematics(model, goal.as_pose(), seed=q0)
    q_star = model.clamp_joints(q_star)
    dq = q_star - q0

    start_pos = forward_kinematics(model, q0).position
    dist = float(np.linalg.norm(goal.y_star - start_pos))
    # Tiny backoff keeps float fuzz from bumping an exact multiple up a bin.
    n = max(2, math.ceil(dist / spacing - 1e-9))

    moving = np.abs(dq) > 1e-12
    if not np.any(moving):
        ws = [
            Waystate(start.t, q0.copy(), np.zeros(6), np.zeros(6)),
            Waystate(start.t + MIN_DURATION, q0.copy(), np.zeros(6), np.zeros(6)),
        ]
        return SegmentPlan(k, ws, start.t, start.t + MIN_DURATION)

    s_dot_max = float(np.min(model.max_velocity[moving] / np.abs(dq[moving])))
    s_ddot_max = float(np.min(model.max_acceleration[moving] / np.abs(dq[moving])))

    s_values = set(i / (n - 1) for i in range(n))
    # Phase boundary s-positions.
    t_acc = s_dot_max / s_ddot_max
    s_acc = min(0.5, 0.5 * s_ddot_max * t_acc * t_acc)
    s_values.add(s_acc)
    s_values.add(1.0 - s_acc)
    s_sorted = sorted(s_values)

    total, kinematics = _profile_times(s_sorted, s_dot_max, s_ddot_max)
    waystates = []
    for s, (t, s_dot, s_ddot) in zip(s_sorted, kinematics):
        waystates.append(
            Waystate(start.t + t, q0 + s * dq, s_dot * dq, s_ddot * dq)
        )
    # Pin the rest boundary conditions exactly.
    waystates[0] = Waystate(start.t, q0.copy(), np.zeros(6), waystates[0].q_ddot)
    waystates[-1] = Waystate(start.t + total, q_star.copy(), np.zeros(6), np.zeros(6))

    plan = SegmentPlan(k, waystates, start.t, start.t + total)
    plan.validate(model)
    return plan
