import math

import numpy as np
import pytest

from hybridservo.errors import DegenerateDirection
from hybridservo.geometry import (
    ConstraintBox,
    Pose,
    RigidTransform,
    aim_rotation,
    orientation_from_yaw,
    rot_z,
    rotation_log,
    yaw_from_orientation,
    yaw_of_rotation,
    yaw_toward,
)


def rand_transform(rng):
    w = rng.normal(size=3)
    angle = rng.uniform(-math.pi, math.pi)
    axis = w / np.linalg.norm(w)
    K = np.array(
        [
            [0, -axis[2], axis[1]],
            [axis[2], 0, -axis[0]],
            [-axis[1], axis[0], 0],
        ]
    )
    R = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
    return RigidTransform(R, rng.normal(size=3))


def test_identity_apply():
    p = np.array([0.3, -0.2, 0.9])
    assert np.allclose(RigidTransform.identity().apply(p), p)


def test_compose_is_left_application():
    # a follows b: compose(a, b) applied to p equals a(b(p)).
    a = RigidTransform(rot_z(math.pi / 2), np.array([1.0, 0.0, 0.0]))
    b = RigidTransform(rot_z(math.pi / 2), np.zeros(3))
    p = np.array([1.0, 0.0, 0.0])
    assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-12)
    assert np.allclose(a.compose(b).apply(p), [0.0, 0.0, 0.0], atol=1e-12)
    # Swapping the order applies a first, then b.
    assert np.allclose(b.compose(a).apply(p), [-1.0, 1.0, 0.0], atol=1e-12)


def test_compose_associative():
    rng = np.random.default_rng(42)
    for _ in range(50):
        a, b, c = (rand_transform(rng) for _ in range(3))
        p = rng.normal(size=3)
        left = a.compose(b).compose(c).apply(p)
        right = a.compose(b.compose(c)).apply(p)
        assert np.allclose(left, right, atol=1e-10)


def test_compose_matches_sequential_apply():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = rand_transform(rng), rand_transform(rng)
        p = rng.normal(size=3)
        assert np.allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-10)


def test_inverse_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = rand_transform(rng)
        p = rng.normal(size=3)
        assert np.allclose(t.inverse().apply(t.apply(p)), p, atol=1e-10)
        ident = t.compose(t.inverse())
        assert np.allclose(ident.rotation, np.eye(3), atol=1e-10)
        assert np.allclose(ident.translation, 0.0, atol=1e-10)


def test_rotations_stay_orthonormal():
    rng = np.random.default_rng(11)
    t = RigidTransform.identity()
    for _ in range(200):
        t = t.compose(rand_transform(rng))
    assert t.is_valid(tol=1e-9)


def test_yaw_convention():
    # +y is zero yaw; +x/+y diagonal is +45 degrees.
    assert yaw_toward([0, 0, 0], [0.0, 1.0, 0.0]) == pytest.approx(0.0)
    assert yaw_toward([0, 0, 0], [1.0, 1.0, 0.0]) == pytest.approx(math.pi / 4)
    assert yaw_toward([0, 0, 0.5], [1.0, 0.0, 0.2]) == pytest.approx(math.pi / 2)


def test_yaw_toward_ignores_vertical_offset():
    assert yaw_toward([0, 0, 0], [0.0, 0.3, 5.0]) == pytest.approx(0.0)


def test_yaw_toward_degenerate():
    with pytest.raises(DegenerateDirection):
        yaw_toward([0.2, 0.3, 0.0], [0.2, 0.3, 1.0])


def test_orientation_roundtrip():
    rng = np.random.default_rng(9)
    for yaw in rng.uniform(-math.pi, math.pi, size=100):
        a = orientation_from_yaw(yaw)
        assert np.linalg.norm(a) == pytest.approx(1.0)
        assert a[2] == 0.0
        assert yaw_from_orientation(a) == pytest.approx(yaw)


def test_orientation_vector_at_minus_30_deg():
    a = orientation_from_yaw(math.radians(-30.0))
    assert np.allclose(a, [-0.5, math.sqrt(3) / 2, 0.0], atol=1e-12)


def test_aim_rotation_properties():
    rng = np.random.default_rng(15)
    for yaw in rng.uniform(-math.pi, math.pi, size=50):
        R = aim_rotation(yaw)
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)
        # z column is the horizontal aim, y column points world-down.
        assert np.allclose(R[:, 2], orientation_from_yaw(yaw), atol=1e-12)
        assert np.allclose(R[:, 1], [0.0, 0.0, -1.0], atol=1e-12)
        assert yaw_of_rotation(R) == pytest.approx(yaw)


def test_yaw_of_rotation_vertical_z_falls_back_to_x():
    # Tool z straight down: yaw must come from the x-axis instead.
    R = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    assert yaw_of_rotation(R) == pytest.approx(0.0)


def test_rotation_log_roundtrip():
    rng = np.random.default_rng(21)
    for _ in range(100):
        t = rand_transform(rng)
        w = rotation_log(t.rotation)
        angle = np.linalg.norm(w)
        if angle < 1e-12:
            continue
        axis = w / angle
        K = np.array(
            [
                [0, -axis[2], axis[1]],
                [axis[2], 0, -axis[0]],
                [-axis[1], axis[0], 0],
            ]
        )
        R = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
        assert np.allclose(R, t.rotation, atol=1e-8)


def test_pose_yaw_property():
    pose = Pose.from_position_yaw([0.1, 0.2, 0.3], 0.4)
    assert pose.yaw == pytest.approx(0.4)


def test_constraint_box_defaults_and_clamp():
    box = ConstraintBox()
    assert box.contains_position([0.0, 0.0, 0.7])
    assert not box.contains_position([0.0, 0.0, 0.1])
    assert np.allclose(box.clamp_position([2.0, -2.0, 0.0]), [0.9, -0.9, 0.2])
    assert box.clamp_yaw(1.0) == pytest.approx(math.pi / 4)
    assert box.clamp_yaw(-3.0) == pytest.approx(-math.pi / 4)
    assert box.clamp_yaw(0.1) == pytest.approx(0.1)


def test_constraint_box_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        ConstraintBox(x_min=1.0, x_max=-1.0)
