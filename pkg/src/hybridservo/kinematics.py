"""Six-axis arm model: DH forward kinematics, Jacobian, iterative IK.

The arm hangs inverted from a gantry: the base transform rolls the base
frame 180 degrees about x and lifts it to a configured height. A fixed
tool extension along the flange z-axis models the physical tip; all tool
poses refer to the tip.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import NoConvergence, OutOfWorkspace
from .geometry import (
    ConstraintBox,
    Pose,
    RigidTransform,
    aim_rotation,
    orientation_from_yaw,
    rot_x,
    rotation_log,
    yaw_of_rotation,
)

# Published DH table for a 1.3 m reach six-axis arm, rows (a, d, alpha).
UR10_DH = np.array(
    [
        [0.0, 0.1273, math.pi / 2.0],
        [-0.612, 0.0, 0.0],
        [-0.5723, 0.0, 0.0],
        [0.0, 0.163941, math.pi / 2.0],
        [0.0, 0.1157, -math.pi / 2.0],
        [0.0, 0.0922, 0.0],
    ]
)


def dh_transform(a: float, d: float, alpha: float, theta: float) -> RigidTransform:
    """Single-link transform in the standard DH convention."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    R = np.array(
        [
            [ct, -st * ca, st * sa],
            [st, ct * ca, -ct * sa],
            [0.0, sa, ca],
        ]
    )
    t = np.array([a * ct, a * st, d])
    return RigidTransform(R, t)


@dataclasses.dataclass
class ArmModel:
    """Geometry and limits of the arm.

    dh rows are (a, d, alpha, theta_offset). The base transform maps the
    DH base frame into the workcell; tool maps the flange frame to the
    tool tip.
    """

    dh: np.ndarray
    base: RigidTransform
    tool: RigidTransform
    joint_limits: np.ndarray
    max_velocity: np.ndarray
    max_acceleration: np.ndarray

    def __post_init__(self):
        self.dh = np.asarray(self.dh, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)
        self.max_velocity = np.asarray(self.max_velocity, dtype=float)
        self.max_acceleration = np.asarray(self.max_acceleration, dtype=float)
        if self.dh.shape != (6, 4):
            raise ValueError("dh must be 6x4 (a, d, alpha, theta_offset)")
        if np.any(self.joint_limits[:, 0] >= self.joint_limits[:, 1]):
            raise ValueError("joint limits must satisfy min < max")
        if np.any(self.max_velocity <= 0.0) or np.any(self.max_acceleration <= 0.0):
            raise ValueError("velocity and acceleration limits must be positive")

    @classmethod
    def inverted_ur10(
        cls,
        base_height: float = 1.40,
        base_y: float = -0.35,
        tool_offset: float = 0.30,
        max_velocity: float = 1.0,
        max_acceleration: float = 2.0,
    ) -> "ArmModel":
        """Ceiling-mounted arm with a straight tool extension on the flange.

        The base hangs offset away from the operator side (negative y) so
        that targets in front of the tool keep the wrist center outside the
        unreachable cylinder around the base axis.
        """
        dh = np.zeros((6, 4))
        dh[:, :3] = UR10_DH
        base = RigidTransform(rot_x(math.pi), np.array([0.0, base_y, base_height]))
        tool = RigidTransform(np.eye(3), np.array([0.0, 0.0, tool_offset]))
        limits = np.tile([-2.0 * math.pi, 2.0 * math.pi], (6, 1))
        return cls(
            dh=dh,
            base=base,
            tool=tool,
            joint_limits=limits,
            max_velocity=np.full(6, float(max_velocity)),
            max_acceleration=np.full(6, float(max_acceleration)),
        )

    def clamp_joints(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_limits[:, 0], self.joint_limits[:, 1])


def _chain(model: ArmModel, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotations (7,3,3) and origins (7,3) of base plus the six joint frames.

    The per-joint update is unrolled into scalar arithmetic: this sits
    inside the IK loop and the per-tick sensor updates, where the overhead
    of composing 3x3 numpy products dominates the actual flops. Writing
    the columns out by hand keeps the hot path allocation-free.
    """
    Rs = np.empty((7, 3, 3))
    ps = np.empty((7, 3))
    Rs[0] = model.base.rotation
    ps[0] = model.base.translation
    dh = model.dh.tolist()
    qs = [float(v) for v in q]
    # Current rotation as column vectors, current origin as scalars.
    (x0, x1, x2), (y0, y1, y2), (z0, z1, z2) = model.base.rotation.tolist()
    p0, p1, p2 = model.base.translation.tolist()
    for i in range(6):
        a, d, alpha, offset = dh[i]
        ct = math.cos(qs[i] + offset)
        st = math.sin(qs[i] + offset)
        ca = math.cos(alpha)
        sa = math.sin(alpha)
        # Columns of the local DH rotation are (ct,st,0), (-st*ca,ct*ca,sa),
        # (st*sa,-ct*sa,ca); v and u are the images of (ct,st,0) and
        # (-st,ct,0) under the current rotation.
        v0 = x0 * ct + x1 * st
        v1 = y0 * ct + y1 * st
        v2 = z0 * ct + z1 * st
        u0 = x1 * ct - x0 * st
        u1 = y1 * ct - y0 * st
        u2 = z1 * ct - z0 * st
        p0 += a * v0 + d * x2
        p1 += a * v1 + d * y2
        p2 += a * v2 + d * z2
        x0, x1, x2 = v0, u0 * ca + x2 * sa, x2 * ca - u0 * sa
        y0, y1, y2 = v1, u1 * ca + y2 * sa, y2 * ca - u1 * sa
        z0, z1, z2 = v2, u2 * ca + z2 * sa, z2 * ca - u2 * sa
        out = Rs[i + 1]
        out[0, 0] = x0
        out[0, 1] = x1
        out[0, 2] = x2
        out[1, 0] = y0
        out[1, 1] = y1
        out[1, 2] = y2
        out[2, 0] = z0
        out[2, 1] = z1
        out[2, 2] = z2
        pi = ps[i + 1]
        pi[0] = p0
        pi[1] = p1
        pi[2] = p2
    return Rs, ps


def joint_frames(model: ArmModel, q: np.ndarray) -> list[RigidTransform]:
    """Cumulative frames [base, joint1, ..., joint6] in the workcell."""
    Rs, ps = _chain(model, q)
    return [RigidTransform(Rs[i], ps[i]) for i in range(7)]


def flange_transform(model: ArmModel, q: np.ndarray) -> RigidTransform:
    Rs, ps = _chain(model, q)
    return RigidTransform(Rs[6], ps[6])


def tool_transform(model: ArmModel, q: np.ndarray) -> RigidTransform:
    return flange_transform(model, q).compose(model.tool)


def joint_origins(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Stacked origins of base, joint frames and tool tip, shape (8, 3)."""
    Rs, ps = _chain(model, q)
    tip = Rs[6] @ model.tool.translation + ps[6]
    return np.vstack([ps, tip])


def forward_kinematics(model: ArmModel, q: np.ndarray) -> Pose:
    """Tool tip pose for a joint vector."""
    T = tool_transform(model, q)
    return Pose(T.translation, orientation_from_yaw(yaw_of_rotation(T.rotation)))


def jacobian(model: ArmModel, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian at the tool tip, rows (linear xyz, angular xyz)."""
    Rs, ps = _chain(model, q)
    tip = Rs[6] @ model.tool.translation + ps[6]
    J = np.empty((6, 6))
    for i in range(6):
        # Joint i+1 rotates about the z-axis of frame i.
        z = Rs[i, :, 2]
        d = tip - ps[i]
        J[0, i] = z[1] * d[2] - z[2] * d[1]
        J[1, i] = z[2] * d[0] - z[0] * d[2]
        J[2, i] = z[0] * d[1] - z[1] * d[0]
        J[3:, i] = z
    return J


@dataclasses.dataclass
class RobotState:
    """Task-space pose paired with the joint vector that produced it."""

    position: np.ndarray
    orientation: np.ndarray
    q: np.ndarray

    @classmethod
    def from_joints(cls, model: ArmModel, q: np.ndarray) -> "RobotState":
        pose = forward_kinematics(model, q)
        return cls(pose.position, pose.orientation, np.asarray(q, dtype=float))


_DEFAULT_BOX = object()


def inverse_kinematics(
    model: ArmModel,
    goal: Pose,
    seed: np.ndarray,
    box: ConstraintBox | None | object = _DEFAULT_BOX,
    damping: float = 0.01,
    max_step: float = 0.2,
    pos_tol: float = 1e-4,
    rot_tol: float = 1e-4,
    max_iters: int = 200,
    stall_window: int = 12,
) -> np.ndarray:
    """Damped least-squares IK for a position + yaw goal.

    The full goal rotation is fixed by the yaw through the tool aim
    convention, so the solve runs on the complete 6-dof error. Joint limits
    are enforced every step. Pass box=None to skip the workspace gate.

    Raises OutOfWorkspace when the goal leaves the constraint box and
    NoConvergence when the iteration cap is hit or the solve stalls at a
    workspace boundary (no meaningful progress for stall_window steps).
    """
    if box is _DEFAULT_BOX:
        box = ConstraintBox()
    yaw = goal.yaw
    if box is not None and (
        not box.contains_position(goal.position, tol=1e-9)
        or not box.contains_yaw(yaw, tol=1e-9)
    ):
        raise OutOfWorkspace(
            "goal position %s / yaw %.3f outside constraint box" % (goal.position, yaw)
        )

    R_goal = aim_rotation(yaw)
    target = np.asarray(goal.position, dtype=float)
    q = model.clamp_joints(np.asarray(seed, dtype=float).copy())
    lam_sq = damping * damping
    best = math.inf

    eye6 = np.eye(6)
    tool_t = model.tool.translation
    tool_R = model.tool.rotation

    def residual(qv):
        Rs, ps = _chain(model, qv)
        tip = Rs[6] @ tool_t + ps[6]
        e_pos = target - tip
        e_rot = rotation_log(R_goal @ (Rs[6] @ tool_R).T)
        return Rs, ps, tip, e_pos, e_rot

    Rs, ps, tip, e_pos, e_rot = residual(q)
    best_cost = math.inf
    stalled = 0
    for _ in range(max_iters + 1):
        pos_err = float(np.linalg.norm(e_pos))
        rot_err = float(np.linalg.norm(e_rot))
        best = min(best, pos_err + rot_err)
        if pos_err <= pos_tol and rot_err <= rot_tol:
            return q
        cost_now = pos_err * pos_err + rot_err * rot_err
        if cost_now < 0.99 * best_cost:
            best_cost = cost_now
            stalled = 0
        else:
            stalled += 1
            if stalled >= stall_window:
                raise NoConvergence(
                    "ik stalled after %d steps without progress" % stall_window,
                    best_residual=best,
                )
        J = np.empty((6, 6))
        for i in range(6):
            z = Rs[i, :, 2]
            d = tip - ps[i]
            J[0, i] = z[1] * d[2] - z[2] * d[1]
            J[1, i] = z[2] * d[0] - z[0] * d[2]
            J[2, i] = z[0] * d[1] - z[1] * d[0]
            J[3:, i] = z
        e = np.concatenate([e_pos, e_rot])
        A = J @ J.T + lam_sq * eye6
        dq = J.T @ np.linalg.solve(A, e)
        # Scale the whole step so the largest joint move is max_step;
        # per-joint clipping distorts the direction and can limit-cycle.
        biggest = float(np.max(np.abs(dq)))
        if biggest > max_step:
            dq *= max_step / biggest
        cost = pos_err * pos_err + rot_err * rot_err
        for _ in range(2):
            q_new = model.clamp_joints(q + dq)
            out = residual(q_new)
            new_cost = float(out[3] @ out[3] + out[4] @ out[4])
            if new_cost <= cost or biggest <= 1e-14:
                break
            dq = dq * 0.5
        q = q_new
        Rs, ps, tip, e_pos, e_rot = out

    raise NoConvergence(
        "ik did not reach tolerance in %d iterations" % max_iters, best_residual=best
    )
