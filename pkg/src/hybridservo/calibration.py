"""Sensor registration tools: sphere-marker center fitting and rigid
point-set alignment.

The workflow this supports: a spherical marker is shown to each camera at
a set of known locations, each camera fits the marker center from surface
samples in its own frame, and the camera pose is recovered by aligning the
fitted centers to the known locations.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DegenerateGeometry, DegenerateSamples, NoConvergence
from .geometry import RigidTransform


def fit_sphere_center(
    samples: np.ndarray,
    radius: float,
    max_iters: int = 100,
    tol: float = 1e-12,
) -> np.ndarray:
    """Center of a known-radius sphere from surface samples.

    Gauss-Newton on the radial residual ||s_i - c|| - radius. The start
    point is the sample centroid pushed inward by the radius along the
    patch normal (both normal signs are tried, the better one kept), which
    lands close enough for the quadratic convergence to take over.

    Raises DegenerateSamples for fewer than 4 samples or a near-collinear
    patch, NoConvergence if the iteration cap is hit.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 4:
        raise DegenerateSamples("need at least 4 surface samples")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[1] < 1e-9 * max(1.0, svals[0]):
        raise DegenerateSamples("samples are collinear")

    # Patch normal = least-varying direction of the samples.
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    normal = Vt[2]
    spread_sq = float(np.mean(np.sum(centered**2, axis=1)))
    h = np.sqrt(max(radius * radius - spread_sq, 0.0))
    candidates = [centroid + h * normal, centroid - h * normal]
    costs = [
        float(np.sum((np.linalg.norm(pts - c, axis=1) - radius) ** 2))
        for c in candidates
    ]
    c = candidates[int(np.argmin(costs))].copy()

    for _ in range(max_iters):
        diff = pts - c
        dist = np.linalg.norm(diff, axis=1)
        dist = np.maximum(dist, 1e-12)
        r = dist - radius
        J = -diff / dist[:, None]
        step = np.linalg.solve(J.T @ J, -J.T @ r)
        c = c + step
        if float(np.linalg.norm(step)) < tol:
            return c
    raise NoConvergence(
        "sphere fit did not settle in %d iterations" % max_iters,
        best_residual=float(np.sqrt(np.mean(r * r))),
    )


@dataclasses.dataclass
class CorrespondenceSet:
    """Paired points: the same physical locations seen in two frames."""

    source: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=float)
        self.reference = np.asarray(self.reference, dtype=float)
        if self.source.shape != self.reference.shape:
            raise ValueError("source and reference must have matching shapes")
        if self.source.ndim != 2 or self.source.shape[1] != 3:
            raise ValueError("correspondences must be (N, 3)")
        if self.source.shape[0] < 3:
            raise ValueError("need at least 3 point pairs")

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for s, r in zip(self.source, self.reference):
                fields = [repr(float(v)) for v in (*s, *r)]
                fh.write(" ".join(fields) + "\n")

    @classmethod
    def load(cls, path) -> "CorrespondenceSet":
        src, ref = [], []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 6:
                    raise ValueError(
                        "line %d: expected 6 decimal fields, got %d"
                        % (line_no, len(parts))
                    )
                vals = [float(p) for p in parts]
                src.append(vals[:3])
                ref.append(vals[3:])
        return cls(np.array(src), np.array(ref))


@dataclasses.dataclass
class RegistrationReport:
    """Rigid alignment result with its per-point residuals (meters)."""

    transform: RigidTransform
    residuals: np.ndarray
    mean_residual: float
    max_residual: float
    rms_residual: float


def procrustes_align(pairs: CorrespondenceSet) -> RegistrationReport:
    """Best rigid transform mapping source points onto reference points.

    Kabsch solution: SVD of the cross-covariance with the determinant
    corrected to +1, so the result is always a proper rotation.

    Raises DegenerateGeometry when the source points are (near) collinear,
    which leaves the rotation about that line unconstrained.
    """
    src = pairs.source
    ref = pairs.reference
    src_c = src.mean(axis=0)
    ref_c = ref.mean(axis=0)
    A = src - src_c
    B = ref - ref_c
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[1] < 1e-9 * max(1.0, svals[0]):
        raise DegenerateGeometry("source points are collinear")
    H = A.T @ B
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = ref_c - R @ src_c
    transform = RigidTransform(R, t)
    mapped = (R @ src.T).T + t
    residuals = np.linalg.norm(mapped - ref, axis=1)
    return RegistrationReport(
        transform=transform,
        residuals=residuals,
        mean_residual=float(residuals.mean()),
        max_residual=float(residuals.max()),
        rms_residual=float(np.sqrt(np.mean(residuals**2))),
    )
