"""Experiment scenario definitions: target scripts and start poses."""

from __future__ import annotations

import dataclasses
import json
from typing import List, Optional

import numpy as np

from .errors import ScenarioError
from .geometry import Pose, orientation_from_yaw, yaw_toward
from .kinematics import inverse_kinematics

MODES = ("hybrid", "etoh_only")
SHAPES = ("ball", "disc")


@dataclasses.dataclass
class ServoAction:
    """One servoing task: reach the target, optionally from a reset pose."""

    target: np.ndarray
    start_q: Optional[np.ndarray] = None

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        if self.target.shape != (3,):
            raise ScenarioError("action target must be a 3-vector")
        if self.start_q is not None:
            self.start_q = np.asarray(self.start_q, dtype=float)
            if self.start_q.shape != (6,):
                raise ScenarioError("start_q must have 6 entries")


@dataclasses.dataclass
class Scenario:
    name: str
    shape: str
    actions: List[ServoAction]
    mode: str = "hybrid"
    occluders: list = dataclasses.field(default_factory=list)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ScenarioError(f"unknown target shape {self.shape!r}")
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}")


def ball_waypoints(
    half_width: float = 0.5,
    y_range=(0.25, 0.75),
    z_range=(0.5, 1.0),
) -> List[np.ndarray]:
    """22 stations on a virtual box: corners, face centers, and the edge
    midpoints of its top and bottom faces."""
    xs = (-half_width, half_width)
    ys = y_range
    zs = z_range
    xm = 0.0
    ym = 0.5 * (ys[0] + ys[1])
    zm = 0.5 * (zs[0] + zs[1])
    pts = []
    for x in xs:
        for y in ys:
            for z in zs:
                pts.append((x, y, z))  # 8 corners
    pts += [
        (xm, ym, zs[0]), (xm, ym, zs[1]),          # bottom, top
        (xs[0], ym, zm), (xs[1], ym, zm),          # left, right
        (xm, ys[0], zm), (xm, ys[1], zm),          # near, far
    ]
    for z in zs:  # top and bottom edge midpoints
        pts += [(xm, ys[0], z), (xm, ys[1], z), (xs[0], ym, z), (xs[1], ym, z)]
    ordered = sorted(pts, key=lambda p: (p[2], p[1], p[0]))
    return [np.array(p) for p in ordered]


def ball_scenario(mode: str = "hybrid") -> Scenario:
    actions = [ServoAction(p) for p in ball_waypoints()]
    return Scenario(name="ball", shape="ball", actions=actions, mode=mode)


BULLSEYE_TARGETS = (
    (-0.2, 0.5, 0.7),
    (0.0, 0.52, 0.85),
    (0.2, 0.5, 0.7),
)
BULLSEYE_START_TIPS = (
    (-0.35, 0.38, 0.6),
    (0.35, 0.38, 0.6),
    (-0.2, 0.34, 0.95),
    (0.2, 0.34, 0.95),
)


def bulls_eye_scenario(cell, mode: str = "hybrid", repetitions: int = 2) -> Scenario:
    """Three disc targets approached from four start poses, repeated.

    Start joint configurations are solved once here so every action begins
    from an identical, reproducible pose.
    """
    starts = []
    for tip in BULLSEYE_START_TIPS:
        tip = np.asarray(tip, dtype=float)
        yaw = cell.box.clamp_yaw(yaw_toward(tip, np.array([0.0, 0.9, tip[2]])))
        goal = Pose(tip, orientation_from_yaw(yaw))
        starts.append(inverse_kinematics(cell.model, goal, seed=cell.home_q))
    actions = []
    for _ in range(repetitions):
        for target in BULLSEYE_TARGETS:
            for q in starts:
                actions.append(ServoAction(np.array(target), start_q=q.copy()))
    return Scenario(name="bullseye", shape="disc", actions=actions, mode=mode)


def builtin_scenario(name: str, cell, mode: str = "hybrid") -> Scenario:
    if name == "ball":
        return ball_scenario(mode)
    if name == "bullseye":
        return bulls_eye_scenario(cell, mode)
    raise ScenarioError(f"unknown scenario {name!r}")


def load_scenario(path) -> Scenario:
    """Scenario from a JSON file: name, shape, mode, actions[].target/start_q."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid scenario file: {exc}") from exc
    try:
        actions = [
            ServoAction(a["target"], a.get("start_q")) for a in data["actions"]
        ]
        return Scenario(
            name=data["name"],
            shape=data["shape"],
            actions=actions,
            mode=data.get("mode", "hybrid"),
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario file: {exc!r}") from exc
