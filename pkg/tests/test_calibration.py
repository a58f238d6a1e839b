import math

import numpy as np
import pytest

from hybridservo.calibration import (
    CorrespondenceSet,
    fit_sphere_center,
    procrustes_align,
)
from hybridservo.errors import DegenerateGeometry, DegenerateSamples
from hybridservo.geometry import RigidTransform, rot_x, rot_z

MEAN_UNIT_NORM = 2.0 * math.sqrt(2.0 / math.pi)  # E||N(0, I3)|| = 1.5958


def cap_samples(rng, center, radius, n=60, half_angle=math.radians(70.0), axis=None):
    """Surface points on the cap of a sphere facing `axis`."""
    if axis is None:
        axis = np.array([0.0, 0.0, 1.0])
    axis = axis / np.linalg.norm(axis)
    # Build an orthonormal basis around the axis.
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    pts = []
    for _ in range(n):
        ang = rng.uniform(0.0, half_angle)
        azi = rng.uniform(0.0, 2.0 * math.pi)
        d = (
            math.cos(ang) * axis
            + math.sin(ang) * (math.cos(azi) * u + math.sin(azi) * v)
        )
        pts.append(np.asarray(center) + radius * d)
    return np.array(pts)


def test_sphere_fit_exact_recovery():
    rng = np.random.default_rng(0)
    center = np.array([0.3, -0.2, 0.9])
    pts = cap_samples(rng, center, 0.06)
    fitted = fit_sphere_center(pts, 0.06)
    assert np.linalg.norm(fitted - center) <= 1e-9


def test_sphere_fit_many_random_centers():
    rng = np.random.default_rng(1)
    for _ in range(25):
        center = rng.uniform(-1.0, 1.0, 3)
        axis = rng.normal(size=3)
        pts = cap_samples(rng, center, 0.05, axis=axis)
        fitted = fit_sphere_center(pts, 0.05)
        assert np.linalg.norm(fitted - center) <= 1e-9


def test_sphere_fit_noisy_within_a_millimeter():
    rng = np.random.default_rng(2)
    center = np.array([0.1, 0.4, 0.6])
    pts = cap_samples(rng, center, 0.06, n=200)
    pts = pts + rng.normal(0.0, 0.001, pts.shape)
    fitted = fit_sphere_center(pts, 0.06)
    assert np.linalg.norm(fitted - center) <= 0.001


def test_sphere_fit_rejects_small_or_collinear_sets():
    with pytest.raises(DegenerateSamples):
        fit_sphere_center(np.zeros((3, 3)), 0.05)
    line = np.outer(np.linspace(0.0, 1.0, 10), [1.0, 0.0, 0.0])
    with pytest.raises(DegenerateSamples):
        fit_sphere_center(line, 0.05)


def test_procrustes_identity():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.0, 1.0, (12, 3))
    report = procrustes_align(CorrespondenceSet(pts, pts.copy()))
    assert np.allclose(report.transform.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(report.transform.translation, 0.0, atol=1e-12)
    assert report.mean_residual <= 1e-12


def test_procrustes_recovers_known_transform():
    rng = np.random.default_rng(4)
    for _ in range(30):
        T = RigidTransform(
            rot_z(rng.uniform(-math.pi, math.pi)) @ rot_x(rng.uniform(-1.0, 1.0)),
            rng.uniform(-0.5, 0.5, 3),
        )
        src = rng.uniform(-1.0, 1.0, (10, 3))
        ref = np.array([T.apply(p) for p in src])
        report = procrustes_align(CorrespondenceSet(src, ref))
        assert np.allclose(report.transform.rotation, T.rotation, atol=1e-9)
        assert np.allclose(report.transform.translation, T.translation, atol=1e-9)
        assert report.max_residual <= 1e-9


def test_procrustes_always_proper_rotation():
    rng = np.random.default_rng(5)
    for _ in range(30):
        # Near-planar sets are where an unconstrained solve can reflect.
        src = rng.uniform(-1.0, 1.0, (8, 3))
        src[:, 2] *= 1e-6
        ref = rng.uniform(-1.0, 1.0, (8, 3))
        report = procrustes_align(CorrespondenceSet(src, ref))
        assert np.linalg.det(report.transform.rotation) == pytest.approx(1.0)


def test_procrustes_noise_residuals_track_input_noise():
    # Noise vectors drawn with mean length 3 cm should leave mean residuals
    # within 20% of 3 cm once the 6-dof transform absorbs its share.
    rng = np.random.default_rng(6)
    sigma = 0.03 / MEAN_UNIT_NORM
    means = []
    for _ in range(100):
        T = RigidTransform(rot_z(rng.uniform(-1.0, 1.0)), rng.uniform(-0.3, 0.3, 3))
        src = rng.uniform(-1.0, 1.0, (12, 3))
        ref = np.array([T.apply(p) for p in src]) + rng.normal(0.0, sigma, (12, 3))
        means.append(procrustes_align(CorrespondenceSet(src, ref)).mean_residual)
    overall = float(np.mean(means))
    assert 0.03 * 0.8 <= overall <= 0.03 * 1.2


def test_procrustes_collinear_raises():
    src = np.outer(np.linspace(0.0, 1.0, 6), [1.0, 2.0, 0.0])
    ref = src + 0.1
    with pytest.raises(DegenerateGeometry):
        procrustes_align(CorrespondenceSet(src, ref))


def test_correspondence_set_validation():
    with pytest.raises(ValueError):
        CorrespondenceSet(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        CorrespondenceSet(np.zeros((4, 3)), np.zeros((5, 3)))


def test_correspondence_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    pairs = CorrespondenceSet(
        rng.uniform(-1.0, 1.0, (9, 3)), rng.uniform(-1.0, 1.0, (9, 3))
    )
    path = tmp_path / "pairs.txt"
    pairs.save(path)
    loaded = CorrespondenceSet.load(path)
    assert np.array_equal(loaded.source, pairs.source)
    assert np.array_equal(loaded.reference, pairs.reference)
    # Exactly six fields per line.
    for line in path.read_text().splitlines():
        assert len(line.split()) == 6


def test_correspondence_load_rejects_bad_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1.0 2.0 3.0 4.0 5.0\n")
    with pytest.raises(ValueError):
        CorrespondenceSet.load(path)
