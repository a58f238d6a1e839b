"""Line-delimited JSON run traces with a byte-stable canonical encoding.

One record per line. The first line is a header carrying the config hash
and seed, so any trace can be reproduced exactly from its own metadata.
Key order is sorted and floats use shortest round-trip repr, which makes
equal runs produce byte-identical files.
"""

from __future__ import annotations

import enum
import json
from typing import Iterable, List, Optional

import numpy as np

from .executor import LoopResult, SegmentRecord
from .kinematics import forward_kinematics
from .tracking import TargetEstimate


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def canonical_line(record: dict) -> str:
    return json.dumps(_plain(record), sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def estimate_dict(est: TargetEstimate) -> dict:
    return {
        "position": list(est.position),
        "t": est.timestamp,
        "source": est.source,
        "sensors": list(est.contributing_sensors),
    }


def segment_dict(record: SegmentRecord, model, goal_index: int,
                 detail: str = "summary") -> dict:
    plan = record.plan
    tip = forward_kinematics(model, plan.end_state.q).position
    out = {
        "type": "segment",
        "goal": goal_index,
        "k": record.k,
        "t0": plan.t0,
        "te": plan.te,
        "exec_duration": record.exec_duration,
        "plan_latency": record.plan_latency,
        "mode": record.mode_at_plan,
        "cost": record.goal_cost,
        "end_q": list(plan.end_state.q),
        "tip": list(tip),
        "est": estimate_dict(record.target_estimate_used)
        if record.target_estimate_used is not None
        else None,
    }
    if detail == "full":
        out["waystates"] = [
            {"t": w.t, "q": list(w.q), "qd": list(w.q_dot), "qdd": list(w.q_ddot)}
            for w in plan.waystates
        ]
    return out


def result_records(result: LoopResult, model, goal_index: int,
                   detail: str = "summary") -> List[dict]:
    """All trace records for one servo action, chronologically ordered."""
    rows: List[dict] = []
    for est in result.estimate_log:
        rows.append({
            "type": "estimate",
            "goal": goal_index,
            "t": est.timestamp,
            **estimate_dict(est),
        })
    for ev in result.mode_events:
        rows.append({
            "type": "mode",
            "goal": goal_index,
            "t": ev.t,
            "old": ev.old,
            "new": ev.new,
            "trigger": ev.trigger,
        })
    for rec in result.records:
        rows.append(segment_dict(rec, model, goal_index, detail))
    rows.sort(key=_row_time)
    rows.append({
        "type": "goal",
        "goal": goal_index,
        "converged": result.converged,
        "timed_out": result.timed_out,
        "error": result.error,
        "t_final": result.t_final,
        "time_to_goal": result.t_converged,
        "iterations": result.iterations,
        "final_tip": list(result.final_tool.position),
        "final_q": list(result.q_final),
    })
    return rows


def _row_time(row: dict):
    t = row.get("t", row.get("te", 0.0))
    order = {"estimate": 0, "mode": 1, "segment": 2}
    return (t, order.get(row["type"], 3))


class RunTrace:
    """Header plus ordered event records for a whole scenario run."""

    def __init__(self, header: dict, rows: Optional[List[dict]] = None):
        if header.get("type") != "header":
            header = {"type": "header", **header}
        self.header = header
        self.rows: List[dict] = list(rows) if rows else []

    def extend(self, rows: Iterable[dict]):
        self.rows.extend(rows)

    def outcomes(self) -> List[dict]:
        return [r for r in self.rows if r["type"] == "goal"]

    def segments(self) -> List[dict]:
        return [r for r in self.rows if r["type"] == "segment"]

    def dumps(self) -> str:
        lines = [canonical_line(self.header)]
        lines.extend(canonical_line(r) for r in self.rows)
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty trace")
        header = json.loads(lines[0])
        if header.get("type") != "header":
            raise ValueError("trace must start with a header record")
        return cls(header, [json.loads(ln) for ln in lines[1:]])

    @classmethod
    def load(cls, path) -> "RunTrace":
        with open(path) as fh:
            return cls.loads(fh.read())
