import math

import numpy as np
import pytest

from hybridservo.errors import NoConvergence, OutOfWorkspace
from hybridservo.geometry import Pose, RigidTransform, yaw_toward
from hybridservo.kinematics import (
    ArmModel,
    RobotState,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    joint_origins,
    tool_transform,
)

HOME_Q = np.array(
    [1.00910097, -2.07593299, 1.84169176, 0.23424123, 1.00910097, 0.0]
)


@pytest.fixture(scope="module")
def model():
    return ArmModel.inverted_ur10()


def chain_at_zero(model):
    """Independent forward pass: at q = 0 every DH link reduces to a pure
    (a, d, alpha) block, so the chain can be built without trig in theta."""
    T = model.base.as_matrix()
    for a, d, alpha, _ in model.dh:
        ca, sa = math.cos(alpha), math.sin(alpha)
        L = np.array(
            [
                [1.0, 0.0, 0.0, a],
                [0.0, ca, -sa, 0.0],
                [0.0, sa, ca, d],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
        T = T @ L
    return T @ model.tool.as_matrix()


def test_stretched_pose_matches_link_offset_sums(model):
    pose = forward_kinematics(model, np.zeros(6))
    # x: -(a2 + a3); y: base_y + d4 + d6 + tool; z: height - d1 + d5.
    assert pose.position == pytest.approx([-1.1843, 0.206141, 1.3884], abs=1e-12)
    assert np.allclose(pose.orientation, [0.0, 1.0, 0.0], atol=1e-12)
    assert np.allclose(
        tool_transform(model, np.zeros(6)).as_matrix(), chain_at_zero(model), atol=1e-12
    )


def test_fk_deterministic(model):
    rng = np.random.default_rng(0)
    q = rng.uniform(-math.pi, math.pi, 6)
    a = tool_transform(model, q).as_matrix()
    b = tool_transform(model, q.copy()).as_matrix()
    assert np.array_equal(a, b)


def test_fk_periodic_in_two_pi(model):
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(-1.0, 1.0, 6)
        shifted = q + 2.0 * math.pi * rng.integers(-1, 2, size=6)
        a = tool_transform(model, q).as_matrix()
        b = tool_transform(model, shifted).as_matrix()
        assert np.allclose(a, b, atol=1e-9)


def test_base_joint_only_spins_about_base_axis(model):
    # Rotating joint 1 must keep the tip distance to the base axis fixed.
    rng = np.random.default_rng(2)
    axis_origin = model.base.translation
    for _ in range(20):
        q = rng.uniform(-1.5, 1.5, 6)
        p1 = forward_kinematics(model, q).position
        q2 = q.copy()
        q2[0] += rng.uniform(-2.0, 2.0)
        p2 = forward_kinematics(model, q2).position
        r1 = np.hypot(p1[0] - axis_origin[0], p1[1] - axis_origin[1])
        r2 = np.hypot(p2[0] - axis_origin[0], p2[1] - axis_origin[1])
        assert r1 == pytest.approx(r2, abs=1e-9)
        assert p1[2] == pytest.approx(p2[2], abs=1e-9)


def finite_difference_jacobian(model, q, h=1e-6):
    J = np.zeros((6, 6))
    R0 = tool_transform(model, q).rotation
    for i in range(6):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        Tp, Tm = tool_transform(model, qp), tool_transform(model, qm)
        J[:3, i] = (Tp.translation - Tm.translation) / (2.0 * h)
        W = ((Tp.rotation - Tm.rotation) / (2.0 * h)) @ R0.T
        J[3:, i] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


def test_jacobian_matches_central_differences(model):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        q = rng.uniform(-math.pi, math.pi, 6)
        err = np.abs(jacobian(model, q) - finite_difference_jacobian(model, q)).max()
        worst = max(worst, float(err))
    assert worst <= 1e-5


def test_jacobian_column_independent_of_distal_joints(model):
    # Column i depends only on joints 1..i, so zeroing distal joints must
    # not change it.
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = rng.uniform(-math.pi, math.pi, 6)
        J = jacobian(model, q)
        for i in range(6):
            q_cut = q.copy()
            q_cut[i + 1 :] = 0.0
            J_cut = jacobian(model, q_cut)
            assert np.allclose(J[3:, : i + 1], J_cut[3:, : i + 1], atol=1e-12)


def test_joint_origins_shape_and_base(model):
    pts = joint_origins(model, HOME_Q)
    assert pts.shape == (8, 3)
    assert np.allclose(pts[0], model.base.translation)
    assert np.allclose(pts[-1], forward_kinematics(model, HOME_Q).position)


def test_home_configuration_pose(model):
    pose = forward_kinematics(model, HOME_Q)
    assert pose.position == pytest.approx([0.0, 0.35, 0.72], abs=1e-7)
    assert pose.yaw == pytest.approx(0.0, abs=1e-7)


def test_ik_fixed_point_returns_seed(model):
    pose = forward_kinematics(model, HOME_Q)
    q = inverse_kinematics(model, pose, HOME_Q)
    assert np.array_equal(q, HOME_Q)


def test_ik_reaches_goal_within_tolerance(model):
    goal = Pose.from_position_yaw([0.15, 0.45, 0.8], 0.2)
    q = inverse_kinematics(model, goal, HOME_Q)
    pose = forward_kinematics(model, q)
    assert np.linalg.norm(pose.position - goal.position) <= 1e-4
    assert abs(pose.yaw - 0.2) <= 1e-4


def test_ik_roundtrip_from_perturbed_seeds(model):
    rng = np.random.default_rng(5)
    q = HOME_Q.copy()
    solutions = []
    for _ in range(100):
        tgt = np.array(
            [
                rng.uniform(-0.5, 0.5),
                rng.uniform(0.3, 0.75),
                rng.uniform(0.5, 1.0),
            ]
        )
        yaw = float(
            np.clip(
                yaw_toward(forward_kinematics(model, q).position, tgt),
                -math.pi / 4,
                math.pi / 4,
            )
        )
        q = inverse_kinematics(model, Pose.from_position_yaw(tgt, yaw), q)
        solutions.append(q.copy())
    for qs in solutions:
        pose = forward_kinematics(model, qs)
        seed = qs + rng.normal(0.0, 0.1, 6)
        q2 = inverse_kinematics(model, pose, seed, box=None)
        err = np.linalg.norm(forward_kinematics(model, q2).position - pose.position)
        assert err <= 1e-4


def test_ik_respects_joint_limits(model):
    tight = ArmModel(
        dh=model.dh,
        base=model.base,
        tool=model.tool,
        joint_limits=np.tile([-2.2, 2.2], (6, 1)),
        max_velocity=model.max_velocity,
        max_acceleration=model.max_acceleration,
    )
    goal = Pose.from_position_yaw([0.1, 0.5, 0.7], 0.0)
    q = inverse_kinematics(tight, goal, HOME_Q)
    assert np.all(q >= -2.2) and np.all(q <= 2.2)


def test_ik_rejects_goal_outside_box(model):
    with pytest.raises(OutOfWorkspace):
        inverse_kinematics(
            model, Pose.from_position_yaw([0.0, 1.5, 0.7], 0.0), HOME_Q
        )
    with pytest.raises(OutOfWorkspace):
        inverse_kinematics(
            model, Pose.from_position_yaw([0.0, 0.5, 0.7], 1.2), HOME_Q
        )


def test_ik_unreachable_raises_no_convergence(model):
    # Inside the box but outside the arm's reach envelope.
    goal = Pose.from_position_yaw([-0.9, 0.9, 0.2], 0.0)
    with pytest.raises(NoConvergence) as info:
        inverse_kinematics(model, goal, HOME_Q)
    assert info.value.best_residual is not None
    assert info.value.best_residual > 0.0


def test_robot_state_from_joints(model):
    state = RobotState.from_joints(model, HOME_Q)
    assert np.allclose(state.q, HOME_Q)
    assert state.position == pytest.approx([0.0, 0.35, 0.72], abs=1e-7)


def test_model_validation():
    with pytest.raises(ValueError):
        ArmModel(
            dh=np.zeros((5, 4)),
            base=RigidTransform.identity(),
            tool=RigidTransform.identity(),
            joint_limits=np.tile([-1.0, 1.0], (6, 1)),
            max_velocity=np.ones(6),
            max_acceleration=np.ones(6),
        )
    with pytest.raises(ValueError):
        ArmModel(
            dh=np.zeros((6, 4)),
            base=RigidTransform.identity(),
            tool=RigidTransform.identity(),
            joint_limits=np.tile([1.0, -1.0], (6, 1)),
            max_velocity=np.ones(6),
            max_acceleration=np.ones(6),
        )
