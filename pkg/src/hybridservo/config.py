"""Flat dotted-key configuration with typed schema and canonical hashing.

The native format is diff-friendly text, one `key = value` per line; a
JSON object with the same flat keys is accepted interchangeably. Unknown
keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError
from .executor import LoopParams, StopCondition
from .geometry import ConstraintBox, RigidTransform
from .kinematics import ArmModel
from .master import MasterState
from .planner import PlannerWeights
from .sensors import EinHSensor, EtoHSensor, FrustumSpec, look_at

HOME_Q = (1.00910097, -2.07593299, 1.84169176, 0.23424123, 1.00910097, 0.0)

# key -> (kind, default); kinds: int, float, vec (whitespace-separated floats)
SCHEMA: Dict[str, Tuple[str, object]] = {
    "seed": ("int", 0),
    "arm.base_height": ("float", 1.40),
    "arm.base_y": ("float", -0.35),
    "arm.tool_offset": ("float", 0.30),
    "arm.max_velocity": ("float", 0.45),
    "arm.max_acceleration": ("float", 1.0),
    "arm.home_q": ("vec", list(HOME_Q)),
    "arm.link_radius": ("float", 0.04),
    "box.x": ("vec", [-0.9, 0.9]),
    "box.y": ("vec", [-0.9, 0.9]),
    "box.z": ("vec", [0.2, 1.2]),
    "box.yaw": ("vec", [-math.pi / 4.0, math.pi / 4.0]),
    "etoh.corner_x": ("float", 1.6),
    "etoh.corner_y": ("float", 1.2),
    "etoh.height": ("float", 1.8),
    "etoh.look_at": ("vec", [0.0, 0.35, 0.7]),
    "etoh.fov": ("float", math.radians(75.0)),
    "etoh.near": ("float", 0.5),
    "etoh.far": ("float", 6.0),
    "etoh.rate": ("float", 5.0),
    "etoh.noise_sigma": ("float", 0.034),
    "etoh.miscal_rot_sigma": ("float", 0.003),
    "etoh.miscal_trans_sigma": ("float", 0.008),
    "etoh.bias_gain": ("float", 0.6),
    "etoh.bias_inner_radius": ("float", 0.55),
    "etoh.bias_excess_cap": ("float", 0.25),
    "einh.mount": ("vec", [0.0, -0.06, -0.28]),
    "einh.fov": ("float", math.radians(45.0)),
    "einh.near": ("float", 0.20),
    "einh.far": ("float", 0.40),
    "einh.quantum": ("float", 0.007),
    "einh.noise_sigma": ("float", 0.015),
    "einh.rate": ("float", 10.0),
    "planner.alpha": ("float", 0.8),
    "planner.snap_distance": ("float", 0.02),
    "planner.spacing": ("float", 0.05),
    "planner.w1": ("vec", [10.0, 10.0, 10.0]),
    "planner.w2": ("vec", [1.0, 1.0, 1.0]),
    "planner.c": ("vec", [0.1] * 6),
    "master.hysteresis": ("float", 0.05),
    "loop.plan_latency": ("float", 0.03),
    "loop.settle_time": ("float", 1.4),
    "loop.threshold": ("float", 0.005),
    "loop.hold_segments": ("int", 2),
    "loop.timeout": ("float", 60.0),
    "target.ball_radius": ("float", 0.05),
    "target.disc_radius": ("float", 0.10),
    "calib.marker_radius": ("float", 0.075),
    "calib.samples": ("int", 60),
    "calib.point_noise": ("float", 0.001),
    "calib.center_sigma": ("float", 0.0146),
}


class WorkcellConfig:
    """Validated flat key/value configuration."""

    def __init__(self, values: Dict[str, object] | None = None):
        self.values: Dict[str, object] = {k: _copy(v) for k, (_, v) in SCHEMA.items()}
        if values:
            for key, value in values.items():
                self.set(key, value)

    def set(self, key: str, value):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        kind = SCHEMA[key][0]
        try:
            self.values[key] = _coerce(kind, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc

    def get(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self.values[key]

    def copy(self) -> "WorkcellConfig":
        return WorkcellConfig(self.values)

    # ---- serialization ----

    def dumps(self) -> str:
        lines = []
        for key in sorted(self.values):
            lines.append(f"{key} = {_format_value(self.values[key])}")
        return "\n".join(lines) + "\n"

    def dumps_json(self) -> str:
        return json.dumps(self.values, sort_keys=True, indent=2) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "WorkcellConfig":
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON config: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("JSON config must be an object")
            return cls(data)
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        return cls(values)

    @classmethod
    def load(cls, path) -> "WorkcellConfig":
        with open(path) as fh:
            return cls.loads(fh.read())

    def hash(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    # ---- built objects ----

    def build(self) -> "BuiltCell":
        return BuiltCell(self)


def _copy(v):
    return list(v) if isinstance(v, list) else v


def _coerce(kind: str, value):
    if kind == "int":
        if isinstance(value, str):
            return int(value, 0)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"expected integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, str):
            return float(value)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ValueError(f"expected number, got {value!r}")
    if kind == "vec":
        if isinstance(value, str):
            parts = value.split()
            if not parts:
                raise ValueError("empty vector")
            return [float(p) for p in parts]
        if isinstance(value, (list, tuple, np.ndarray)):
            return [float(p) for p in value]
        raise ValueError(f"expected vector, got {value!r}")
    raise ValueError(f"unknown kind {kind!r}")


def _format_value(v) -> str:
    if isinstance(v, list):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


class BuiltCell:
    """Config values turned into the simulator's working objects.

    Sensor believed poses here equal the true poses; per-run
    miscalibration and bias directions are drawn by the harness.
    """

    def __init__(self, cfg: WorkcellConfig):
        g = cfg.get
        self.config = cfg
        self.model = ArmModel.inverted_ur10(
            base_height=g("arm.base_height"),
            base_y=g("arm.base_y"),
            tool_offset=g("arm.tool_offset"),
            max_velocity=g("arm.max_velocity"),
            max_acceleration=g("arm.max_acceleration"),
        )
        self.home_q = np.array(g("arm.home_q"), dtype=float)
        if self.home_q.shape != (6,):
            raise ConfigError("arm.home_q must have 6 entries")
        bx, by = g("box.x"), g("box.y")
        bz, byaw = g("box.z"), g("box.yaw")
        for name, pair in (("box.x", bx), ("box.y", by), ("box.z", bz),
                           ("box.yaw", byaw)):
            if len(pair) != 2:
                raise ConfigError(f"{name} must have 2 entries (min max)")
        self.box = ConstraintBox(
            x_min=bx[0], x_max=bx[1], y_min=by[0], y_max=by[1],
            z_min=bz[0], z_max=bz[1], yaw_min=byaw[0], yaw_max=byaw[1],
        )
        self.weights = PlannerWeights(
            w1=np.array(g("planner.w1")),
            w2=np.array(g("planner.w2")),
            c=np.array(g("planner.c")),
        )
        self.etoh_frustum = FrustumSpec(g("etoh.fov"), g("etoh.near"), g("etoh.far"))
        self.einh_frustum = FrustumSpec(g("einh.fov"), g("einh.near"), g("einh.far"))
        mount = np.array(g("einh.mount"), dtype=float)
        if mount.shape != (3,):
            raise ConfigError("einh.mount must have 3 entries")
        self.einh_sensor = EinHSensor(
            mount=RigidTransform(np.eye(3), mount),
            frustum=self.einh_frustum,
            depth_quantum=g("einh.quantum"),
            noise_sigma=g("einh.noise_sigma"),
            rate=g("einh.rate"),
        )
        self.arm_link_radius = g("arm.link_radius")
        self.ball_radius = g("target.ball_radius")
        self.disc_radius = g("target.disc_radius")
        self.seed = g("seed")

    def corner_poses(self) -> List[RigidTransform]:
        g = self.config.get
        cx, cy, h = g("etoh.corner_x"), g("etoh.corner_y"), g("etoh.height")
        aim = np.array(g("etoh.look_at"), dtype=float)
        corners = [(-cx, -cy), (cx, -cy), (cx, cy), (-cx, cy)]
        return [look_at(np.array([x, y, h]), aim) for x, y in corners]

    def etoh_sensors(self, believed_poses=None, bias_directions=None):
        """Build the four fixed sensors; poses default to perfectly known."""
        g = self.config.get
        true_poses = self.corner_poses()
        if believed_poses is None:
            believed_poses = true_poses
        if bias_directions is None:
            bias_directions = [np.zeros(3)] * 4
        sensors = []
        for i in range(4):
            sensors.append(
                EtoHSensor(
                    sensor_id=i,
                    true_pose=true_poses[i],
                    believed_pose=believed_poses[i],
                    frustum=self.etoh_frustum,
                    noise_sigma=g("etoh.noise_sigma"),
                    rate=g("etoh.rate"),
                    bias_gain=g("etoh.bias_gain"),
                    bias_inner_radius=g("etoh.bias_inner_radius"),
                    bias_excess_cap=g("etoh.bias_excess_cap"),
                    bias_direction=np.asarray(bias_directions[i], dtype=float),
                )
            )
        return sensors

    def loop_params(self, pinned_mode=None, timeout=None) -> LoopParams:
        g = self.config.get
        stop = StopCondition(
            threshold=g("loop.threshold"),
            hold_segments=g("loop.hold_segments"),
            timeout=timeout if timeout is not None else g("loop.timeout"),
        )
        return LoopParams(
            plan_latency=g("loop.plan_latency"),
            settle_time=g("loop.settle_time"),
            etoh_period=1.0 / g("etoh.rate"),
            einh_period=1.0 / g("einh.rate"),
            alpha=g("planner.alpha"),
            snap_distance=g("planner.snap_distance"),
            spacing=g("planner.spacing"),
            hysteresis_margin=g("master.hysteresis"),
            stop=stop,
            weights=self.weights,
            box=self.box,
            pinned_mode=pinned_mode,
        )

    def master_state(self, mode=None) -> MasterState:
        kwargs = {"hysteresis_margin": self.config.get("master.hysteresis")}
        if mode is not None:
            kwargs["mode"] = mode
        return MasterState(**kwargs)
