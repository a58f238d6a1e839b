"""Virtual-time control loop overlapping execution with next-segment planning.

Each segment executes the trajectory planned during the previous segment
while the following one is planned from the predicted end state, so the
arm never waits on the planner unless planning outlasts the motion. All
timing lives on a deterministic virtual clock; nothing reads wall time.
"""

from __future__ import annotations

import dataclasses
from typing import List, Optional

import numpy as np

from .errors import DegenerateDirection, IKError, Timeout
from .geometry import (
    ConstraintBox,
    Pose,
    orientation_from_yaw,
    yaw_from_orientation,
    yaw_toward,
)
from .kinematics import ArmModel, RobotState, forward_kinematics
from .master import MasterState, ServoMode, update_mode
from .planner import (
    DEFAULT_ALPHA,
    SNAP_DISTANCE,
    WAYPOINT_SPACING,
    GoalPose,
    PlannerWeights,
    SegmentPlan,
    Waystate,
    compute_goal_orientation,
    compute_goal_position,
    plan_segment,
    task_cost,
)
from .seeding import stream
from .sensors import EinHSensor, EtoHSensor, Scene, observe_einh, observe_etoh
from .tracking import SOURCE_EINH, SOURCE_ETOH, TargetEstimate, Tracker


@dataclasses.dataclass
class VirtualClock:
    now: float = 0.0
    resolution: float = 0.001

    def advance_to(self, t: float):
        if t < self.now:
            raise ValueError(f"clock cannot move backwards ({t} < {self.now})")
        self.now = t


@dataclasses.dataclass
class StopCondition:
    threshold: float = 0.005
    hold_segments: int = 2
    timeout: float = 60.0
    raise_on_timeout: bool = False

    def __post_init__(self):
        if self.threshold < 0.0 or self.hold_segments < 1 or self.timeout <= 0.0:
            raise ValueError("invalid stop condition")


@dataclasses.dataclass
class SegmentRecord:
    k: int
    plan: SegmentPlan
    plan_latency: float
    exec_duration: float
    mode_at_plan: ServoMode
    target_estimate_used: Optional[TargetEstimate]
    goal_cost: Optional[float] = None


@dataclasses.dataclass
class ModeEvent:
    t: float
    old: ServoMode
    new: ServoMode
    trigger: str


@dataclasses.dataclass
class LoopParams:
    plan_latency: float = 0.03
    settle_time: float = 0.35
    etoh_period: float = 0.2
    einh_period: float = 0.1
    alpha: float = DEFAULT_ALPHA
    snap_distance: float = SNAP_DISTANCE
    spacing: float = WAYPOINT_SPACING
    hysteresis_margin: float = 0.05
    stop: StopCondition = dataclasses.field(default_factory=StopCondition)
    weights: PlannerWeights = dataclasses.field(default_factory=PlannerWeights)
    box: ConstraintBox = dataclasses.field(default_factory=ConstraintBox)
    pinned_mode: Optional[ServoMode] = None
    log_estimates: bool = True


@dataclasses.dataclass
class LoopResult:
    records: List[SegmentRecord]
    converged: bool
    timed_out: bool
    error: Optional[str]
    t_final: float
    t_converged: Optional[float]
    q_final: np.ndarray
    final_tool: Pose
    mode_events: List[ModeEvent]
    estimate_log: List[TargetEstimate]

    @property
    def iterations(self) -> int:
        return len(self.records)


def convergence_check(
    tool: Pose, scene: Scene, threshold: float = 0.005, t: float = 0.0
) -> bool:
    """True when the tool tip sits within `threshold` of the target surface.

    Signed distance, so a tip past the surface still counts as touching.
    """
    center = scene.target_position(t)
    return scene.target_shape.signed_distance(tool.position, center) <= threshold


class _TickSchedule:
    """Chronological merge of the two sensor families' tick grids.

    Fixed cameras sort before the arm-mounted head at equal times so the
    head's fresher reading is what the mode decision last saw.
    """

    def __init__(self, etoh_period: float, einh_period: float):
        self.periods = (etoh_period, einh_period)
        self.counts = [0, 0]

    def peek(self):
        times = [self.counts[i] * self.periods[i] for i in (0, 1)]
        fam = 0 if times[0] <= times[1] else 1
        return times[fam], fam

    def pop(self):
        t, fam = self.peek()
        self.counts[fam] += 1
        return t, fam


class _Loop:
    def __init__(
        self,
        scene: Scene,
        etoh_sensors: List[EtoHSensor],
        einh_sensor: EinHSensor,
        model: ArmModel,
        q0: np.ndarray,
        seed: int,
        params: LoopParams,
        namespace: str = "",
    ):
        self.scene = scene
        self.etoh_sensors = etoh_sensors
        self.einh = einh_sensor
        self.model = model
        self.params = params
        self.clock = VirtualClock()
        prefix = f"{namespace}." if namespace else ""
        self.etoh_rngs = {
            s.sensor_id: stream(seed, f"{prefix}etoh.{s.sensor_id}")
            for s in etoh_sensors
        }
        self.einh_rng = stream(seed, f"{prefix}einh")
        self.tracker = Tracker(etoh_sensors, params.etoh_period, params.einh_period)
        self.ticks = _TickSchedule(params.etoh_period, params.einh_period)
        self.q = np.asarray(q0, dtype=float)
        pinned = params.pinned_mode
        self.master = MasterState(
            mode=pinned if pinned is not None else ServoMode.ETOH,
            hysteresis_margin=params.hysteresis_margin,
        )
        self.mode_events: List[ModeEvent] = []
        self.estimate_log: List[TargetEstimate] = []
        self.records: List[SegmentRecord] = []
        # Goal poses the solver already failed from an identical start; a
        # stale estimate repeats the exact same request every detection
        # period, and re-crawling the solver each time dominates runtime.
        self._unreachable: List[tuple] = []

    def _update_master(self, t: float, q_now: np.ndarray):
        if self.params.pinned_mode is not None:
            return
        if self.master.mode is ServoMode.EINH:
            target_cam = self.tracker.last_einh_camera
        else:
            # Arm-camera detections keep flowing in every mode, so when the
            # head already has a fresh fix the switch-in test uses that
            # directly. Otherwise fall back to projecting the last fused
            # estimate even when it has gone stale: close to the target the
            # arm often blocks the fixed cameras, which is exactly when
            # handing over to the arm camera helps. A wrong guess
            # self-corrects, since an empty arm-camera attempt switches
            # straight back.
            fresh = self.tracker.estimate(SOURCE_EINH, t)
            if fresh is not None and self.tracker.last_einh_camera is not None:
                target_cam = self.tracker.last_einh_camera
            else:
                est = self.tracker.last_etoh
                if est is None:
                    target_cam = None
                else:
                    cam = self.einh.camera_pose(self.model, q_now)
                    target_cam = cam.inverse().apply(est.position)
        new = update_mode(self.master, target_cam, self.einh.frustum)
        if new.mode is not self.master.mode:
            if new.mode is ServoMode.EINH:
                trigger = "target_in_shrunk_frustum"
            elif target_cam is None:
                trigger = "no_reading"
            else:
                trigger = "outside_frustum"
            self.mode_events.append(ModeEvent(t, self.master.mode, new.mode, trigger))
        self.master = new

    def _advance(self, te: float, plan: Optional[SegmentPlan]):
        """Run sensor ticks and master updates up to and including te."""
        while True:
            t_next, fam = self.ticks.peek()
            if t_next > te + 1e-12:
                break
            self.ticks.pop()
            q_now = plan.sample(t_next).q if plan is not None else self.q
            self.scene.update_arm(q_now)
            if fam == 0:
                dets = [
                    observe_etoh(s, self.scene, t_next, self.etoh_rngs[s.sensor_id])
                    for s in self.etoh_sensors
                ]
                est = self.tracker.ingest_etoh(dets)
            else:
                d = observe_einh(
                    self.einh, self.scene, self.model, q_now, t_next, self.einh_rng
                )
                est = self.tracker.ingest_einh(d, q_now, self.einh, self.model)
            if est is not None and self.params.log_estimates:
                self.estimate_log.append(est)
            self._update_master(t_next, q_now)
        self.clock.advance_to(te)
        if plan is not None:
            self.q = plan.end_state.q.copy()

    def _snapshot(self, t: float) -> Optional[TargetEstimate]:
        """Latest estimate for the active source, stale or not.

        Close to the target the arm tends to blind the fixed cameras, so a
        freshness-gated snapshot would stall the loop exactly at the final
        approach. Planning toward the last known position instead is what
        lets a tracking-only run press on (and lock in whatever error that
        frozen reading carried), while the hybrid loop gets to correct it
        from the arm camera.
        """
        if self.master.mode is ServoMode.EINH:
            est = self.tracker.estimate(SOURCE_EINH, t)
            return est if est is not None else self.tracker.last_einh
        est = self.tracker.estimate(SOURCE_ETOH, t)
        return est if est is not None else self.tracker.last_etoh

    def _next_plan(self, t_start, q_start, a_prev, est, k) -> "_Pending":
        p = self.params
        start = Waystate.at_rest(t_start, q_start)
        mode = self.master.mode
        if est is None:
            # No usable estimate: hold in place for one detection period.
            period = p.einh_period if mode is ServoMode.EINH else p.etoh_period
            ws = [start, Waystate.at_rest(t_start + period, q_start)]
            plan = SegmentPlan(k, ws, t_start, t_start + period)
            return _Pending(plan, None, mode, None)
        pose0 = forward_kinematics(self.model, q_start)
        y0 = pose0.position
        # Deadband: when the controller's own estimate says the tip is
        # already at or past the target surface, re-aiming would only press
        # deeper into measurement noise. Hold and let the stop condition
        # confirm. With an accurate close-range estimate this means "hold
        # when touching, correct when missing".
        believed = self.scene.target_shape.signed_distance(y0, est.position)
        if believed <= 0.0:
            period = p.einh_period if mode is ServoMode.EINH else p.etoh_period
            ws = [start, Waystate.at_rest(t_start + period, q_start)]
            plan = SegmentPlan(k, ws, t_start, t_start + period)
            return _Pending(plan, est, mode, None)
        dist = float(np.linalg.norm(est.position - y0))
        position = compute_goal_position(
            y0, est.position, dist, p.box, p.alpha, p.snap_distance
        )
        aimed = compute_goal_orientation(y0, est.position, previous=a_prev,
                                         box=p.box)
        plan = None
        # An aggressive contracted goal can overshoot the reachable shell
        # when the estimate itself is off; rather than stand still, retry
        # the same heading at half the step before giving up.
        half_step = y0 + 0.5 * (position - y0)
        for position in (position, half_step):
            for orientation in self._orientation_candidates(aimed, a_prev, position):
                if self._known_unreachable(q_start, position, orientation):
                    continue
                goal = GoalPose(position, orientation)
                try:
                    plan = plan_segment(start, goal, self.model, k=k,
                                        weights=p.weights, spacing=p.spacing)
                    break
                except IKError:
                    self._remember_unreachable(q_start, position, orientation)
                    continue
            if plan is not None:
                break
        if plan is None:
            # Goal pose unreachable under every candidate aim: hold one
            # detection period and retry with the next estimate.
            period = p.einh_period if mode is ServoMode.EINH else p.etoh_period
            ws = [start, Waystate.at_rest(t_start + period, q_start)]
            plan = SegmentPlan(k, ws, t_start, t_start + period)
            return _Pending(plan, est, mode, None)
        start_state = RobotState(pose0.position, pose0.orientation, q_start)
        cost = task_cost(start_state, goal, plan.end_state.q, p.weights)
        return _Pending(plan, est, mode, cost)

    def _orientation_candidates(self, aimed, a_prev, position):
        """Aim choices in order of preference.

        First the aim at the target, then the orientation already held, and
        last the outward heading from the base axis: at the far edge of the
        workspace a strongly sideways aim places the wrist beyond the
        reachable shell, while aiming outward tucks it back toward the
        base.
        """
        candidates = [np.asarray(aimed, dtype=float)]
        for cand in (a_prev, self._outward_orientation(position)):
            if cand is None:
                continue
            cand = np.asarray(cand, dtype=float)
            if not any(np.allclose(cand, seen) for seen in candidates):
                candidates.append(cand)
        return candidates

    def _outward_orientation(self, position):
        try:
            yaw = yaw_toward(self.model.base.translation, position)
        except DegenerateDirection:
            return None
        return orientation_from_yaw(self.params.box.clamp_yaw(yaw))

    def _known_unreachable(self, q_start, position, orientation) -> bool:
        for q_f, pos_f, ori_f in self._unreachable:
            if (
                float(np.max(np.abs(q_start - q_f))) < 1e-9
                and float(np.max(np.abs(position - pos_f))) < 1e-9
                and float(np.max(np.abs(orientation - ori_f))) < 1e-9
            ):
                return True
        return False

    def _remember_unreachable(self, q_start, position, orientation):
        self._unreachable.append(
            (np.array(q_start), np.array(position), np.array(orientation))
        )
        if len(self._unreachable) > 12:
            self._unreachable.pop(0)

    def run(self) -> LoopResult:
        p = self.params
        stop = p.stop
        converged = False
        timed_out = False
        error = None
        t_converged = None
        streak = 0
        a_prev = forward_kinematics(self.model, self.q).orientation

        # Bootstrap: sensors tick at t=0, then the first plan is computed
        # with nothing yet executing.
        self._advance(0.0, None)
        est = self._snapshot(0.0)
        try:
            pending = self._next_plan(p.plan_latency, self.q, a_prev, est, k=0)
            a_prev = self._plan_orientation(pending.plan, a_prev)
        except IKError as exc:
            pending = None
            error = f"planning aborted: {exc!r}"
        self._advance(p.plan_latency, None)

        k = 0
        while error is None:
            t0 = self.clock.now
            if t0 >= stop.timeout:
                timed_out = True
                break
            exec_plan = pending.plan
            moves = (
                float(np.max(np.abs(exec_plan.end_state.q - exec_plan.waystates[0].q)))
                > 1e-12
            )
            exec_duration = exec_plan.duration + (p.settle_time if moves else 0.0)
            te = t0 + max(exec_duration, p.plan_latency)

            # Plan the next segment from the predicted end state, starting
            # as late as the planning budget allows so the plan sees the
            # freshest estimate and mode before the segment hands over.
            t_plan = max(t0, te - p.plan_latency)
            self._advance(t_plan, exec_plan)
            s_est = self._snapshot(t_plan)
            plan_error = None
            try:
                next_pending = self._next_plan(
                    te, exec_plan.end_state.q, a_prev, s_est, k=k + 1
                )
            except IKError as exc:
                next_pending = None
                plan_error = f"planning aborted: {exc!r}"

            self._advance(te, exec_plan)
            self.records.append(
                SegmentRecord(
                    k,
                    exec_plan,
                    p.plan_latency,
                    exec_duration,
                    pending.mode,
                    pending.est,
                    pending.cost,
                )
            )

            tool = forward_kinematics(self.model, self.q)
            if convergence_check(tool, self.scene, stop.threshold, te):
                streak += 1
                if streak >= stop.hold_segments:
                    converged = True
                    t_converged = te
                    break
            else:
                streak = 0

            if plan_error is not None:
                error = plan_error
                break
            pending = next_pending
            a_prev = self._plan_orientation(next_pending.plan, a_prev)
            k += 1

        if timed_out and stop.raise_on_timeout:
            raise Timeout(f"no convergence within {stop.timeout} s")
        tool = forward_kinematics(self.model, self.q)
        return LoopResult(
            records=self.records,
            converged=converged,
            timed_out=timed_out,
            error=error,
            t_final=self.clock.now,
            t_converged=t_converged,
            q_final=self.q.copy(),
            final_tool=tool,
            mode_events=self.mode_events,
            estimate_log=self.estimate_log,
        )

    def _plan_orientation(self, plan: Optional[SegmentPlan], a_prev: np.ndarray):
        """Orientation to carry into the next plan.

        The achieved tool direction misses the requested one by up to the
        solver tolerance, so an aim that was clamped onto the yaw wedge
        boundary would drift just past it and then fail the workspace gate
        on every reuse. Re-projecting onto the admissible wedge keeps the
        carried orientation a valid goal.
        """
        if plan is None:
            return a_prev
        a = forward_kinematics(self.model, plan.end_state.q).orientation
        try:
            yaw = self.params.box.clamp_yaw(yaw_from_orientation(a))
        except DegenerateDirection:
            return a_prev
        return orientation_from_yaw(yaw)


@dataclasses.dataclass
class _Pending:
    """A plan awaiting execution plus the context it was made under."""

    plan: SegmentPlan
    est: Optional[TargetEstimate]
    mode: ServoMode
    cost: Optional[float]


def run_loop(
    scene: Scene,
    etoh_sensors: List[EtoHSensor],
    einh_sensor: EinHSensor,
    model: ArmModel,
    q0: np.ndarray,
    seed: int,
    params: Optional[LoopParams] = None,
    namespace: str = "",
) -> LoopResult:
    """Servo toward the scene's target until convergence or timeout."""
    if params is None:
        params = LoopParams()
    loop = _Loop(scene, etoh_sensors, einh_sensor, model, q0, seed, params, namespace)
    return loop.run()
