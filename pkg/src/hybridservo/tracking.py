"""Detection selection and fusion into a single world-frame target estimate."""

from __future__ import annotations

import dataclasses
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InvalidDetection, NoValidDetections
from .kinematics import ArmModel
from .sensors import Detection, EinHSensor, EtoHSensor

SOURCE_ETOH = "etoh"
SOURCE_EINH = "einh"

# Frames averaged when smoothing consecutive eye-in-hand fixes.
EINH_WINDOW = 3


@dataclasses.dataclass
class TargetEstimate:
    position: np.ndarray
    timestamp: float
    source: str
    contributing_sensors: tuple

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.source not in (SOURCE_ETOH, SOURCE_EINH):
            raise ValueError(f"unknown source {self.source!r}")
        self.contributing_sensors = tuple(self.contributing_sensors)
        n = len(self.contributing_sensors)
        if self.source == SOURCE_EINH and n != 1:
            raise ValueError("eye-in-hand estimates come from exactly one sensor")
        if self.source == SOURCE_ETOH and not 1 <= n <= 4:
            raise ValueError("fixed-camera estimates use one to four sensors")


def select_etoh_sensors(
    detections: Sequence[Detection],
    prior: Optional[np.ndarray],
    sensors: Sequence[EtoHSensor],
) -> list:
    """Pick the two sensors nearest the target, by believed mounting position.

    When no prior estimate exists each sensor is ranked against its own
    detection. Fewer than two valid detections selects whatever is valid.
    """
    origins = {s.sensor_id: s.believed_pose.translation for s in sensors}
    ranked = []
    for d in detections:
        if not d.valid:
            continue
        anchor = d.position if prior is None else np.asarray(prior, dtype=float)
        dist = float(np.linalg.norm(origins[d.sensor_id] - anchor))
        ranked.append((dist, d.sensor_id))
    ranked.sort()
    return [sid for _, sid in ranked[:2]]


def fuse_etoh(detections: Sequence[Detection]) -> TargetEstimate:
    """Unweighted mean of the selected detections."""
    valid = [d for d in detections if d.valid]
    if not valid:
        raise NoValidDetections("no valid fixed-camera detections to fuse")
    positions = np.array([d.position for d in valid])
    return TargetEstimate(
        position=positions.mean(axis=0),
        timestamp=max(d.t for d in valid),
        source=SOURCE_ETOH,
        contributing_sensors=tuple(sorted(d.sensor_id for d in valid)),
    )


def einh_to_global(
    d: Detection, q: np.ndarray, sensor: EinHSensor, model: ArmModel
) -> TargetEstimate:
    """Lift a camera-frame detection into the world via the current arm pose."""
    if not d.valid:
        raise InvalidDetection("cannot transform an invalid detection")
    if d.frame != "camera":
        raise InvalidDetection(f"expected a camera-frame detection, got {d.frame!r}")
    camera = sensor.camera_pose(model, q)
    return TargetEstimate(
        position=camera.apply(d.position),
        timestamp=d.t,
        source=SOURCE_EINH,
        contributing_sensors=(d.sensor_id,),
    )


class Tracker:
    """Per-tick consumer of detection streams.

    Keeps the latest estimate from each sensor family plus the escalation
    flag: after a tick with zero valid fixed-camera detections the next tick
    fuses every valid detection instead of the closest two.
    """

    def __init__(
        self,
        etoh_sensors: Iterable[EtoHSensor],
        etoh_period: float = 0.2,
        einh_period: float = 0.1,
    ):
        self.etoh_sensors = list(etoh_sensors)
        self.periods = {SOURCE_ETOH: float(etoh_period), SOURCE_EINH: float(einh_period)}
        self.escalated = False
        self.last_etoh: Optional[TargetEstimate] = None
        self.last_einh: Optional[TargetEstimate] = None
        # Camera-frame position of the most recent valid eye-in-hand attempt;
        # None after a failed attempt.
        self.last_einh_camera: Optional[np.ndarray] = None
        self.last_einh_attempt: Optional[float] = None
        # Recent world-frame eye-in-hand fixes: (timestamp, position) pairs.
        self._einh_window: list = []

    @property
    def prior(self) -> Optional[np.ndarray]:
        return None if self.last_etoh is None else self.last_etoh.position

    def ingest_etoh(self, detections: Sequence[Detection]) -> Optional[TargetEstimate]:
        valid = [d for d in detections if d.valid]
        if not valid:
            self.escalated = True
            return None
        if self.escalated:
            chosen = valid
        else:
            ids = set(select_etoh_sensors(detections, self.prior, self.etoh_sensors))
            chosen = [d for d in valid if d.sensor_id in ids]
        est = fuse_etoh(chosen)
        self.escalated = False
        self.last_etoh = est
        return est

    def ingest_einh(
        self, d: Detection, q: np.ndarray, sensor: EinHSensor, model: ArmModel
    ) -> Optional[TargetEstimate]:
        self.last_einh_attempt = d.t
        if not d.valid:
            self.last_einh_camera = None
            self._einh_window.clear()
            return None
        self.last_einh_camera = np.array(d.position, dtype=float)
        lifted = einh_to_global(d, q, sensor, model)
        # Average the recent fixes: the arm moves between frames, so the
        # depth rounding lands differently each time and the mean steadies
        # both it and the lateral noise.  A dropout clears the window.
        horizon = d.t - 2.0 * self.periods[SOURCE_EINH]
        self._einh_window = [
            (t, p) for t, p in self._einh_window if t >= horizon
        ][-(EINH_WINDOW - 1):]
        self._einh_window.append((d.t, lifted.position))
        mean = np.mean([p for _, p in self._einh_window], axis=0)
        est = TargetEstimate(mean, d.t, SOURCE_EINH, lifted.contributing_sensors)
        self.last_einh = est
        return est

    def estimate(self, source: str, now: float) -> Optional[TargetEstimate]:
        """Latest estimate from `source`, or None when absent or stale.

        Stale means older than two detection periods.
        """
        est = self.last_etoh if source == SOURCE_ETOH else self.last_einh
        if est is None:
            return None
        if now - est.timestamp > 2.0 * self.periods[source]:
            return None
        return est
