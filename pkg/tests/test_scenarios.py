import json

import numpy as np
import pytest

from hybridservo.config import WorkcellConfig
from hybridservo.errors import ScenarioError
from hybridservo.kinematics import forward_kinematics
from hybridservo.scenarios import (
    BULLSEYE_START_TIPS,
    BULLSEYE_TARGETS,
    Scenario,
    ServoAction,
    ball_scenario,
    ball_waypoints,
    builtin_scenario,
    bulls_eye_scenario,
    load_scenario,
)


@pytest.fixture(scope="module")
def cell():
    return WorkcellConfig().build()


def test_ball_waypoints_count_and_uniqueness():
    pts = ball_waypoints()
    assert len(pts) == 22
    assert len({tuple(p) for p in pts}) == 22


def test_ball_waypoints_cover_box_extremes():
    pts = np.array(ball_waypoints())
    assert pts[:, 0].min() == -0.5 and pts[:, 0].max() == 0.5
    assert pts[:, 1].min() == 0.25 and pts[:, 1].max() == 0.75
    assert pts[:, 2].min() == 0.5 and pts[:, 2].max() == 1.0
    # On each side wall: 4 corners, the face center, and 2 edge midpoints.
    on_x_extreme = np.isin(pts[:, 0], (-0.5, 0.5))
    assert int(on_x_extreme.sum()) == 14


def test_ball_waypoints_sorted_bottom_up():
    pts = ball_waypoints()
    keys = [(p[2], p[1], p[0]) for p in pts]
    assert keys == sorted(keys)


def test_ball_scenario_structure():
    sc = ball_scenario(mode="etoh_only")
    assert sc.name == "ball" and sc.shape == "ball" and sc.mode == "etoh_only"
    assert len(sc.actions) == 22
    assert all(a.start_q is None for a in sc.actions)


def test_bulls_eye_scenario_structure(cell):
    sc = bulls_eye_scenario(cell)
    assert sc.shape == "disc"
    assert len(sc.actions) == 2 * len(BULLSEYE_TARGETS) * len(BULLSEYE_START_TIPS)
    targets = {tuple(a.target) for a in sc.actions}
    assert targets == {tuple(t) for t in BULLSEYE_TARGETS}


def test_bulls_eye_starts_reach_requested_tips(cell):
    sc = bulls_eye_scenario(cell)
    unique_q = {tuple(np.round(a.start_q, 12)) for a in sc.actions}
    assert len(unique_q) == len(BULLSEYE_START_TIPS)
    tips = {
        tuple(np.round(forward_kinematics(cell.model, np.array(q)).position, 3))
        for q in unique_q
    }
    assert tips == {tuple(t) for t in BULLSEYE_START_TIPS}


def test_builtin_scenario_dispatch(cell):
    assert builtin_scenario("ball", cell).name == "ball"
    assert builtin_scenario("bullseye", cell).name == "bullseye"
    with pytest.raises(ScenarioError):
        builtin_scenario("nope", cell)


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        Scenario(name="x", shape="cube", actions=[])
    with pytest.raises(ScenarioError):
        Scenario(name="x", shape="ball", actions=[], mode="manual")
    with pytest.raises(ScenarioError):
        ServoAction([1.0, 2.0])
    with pytest.raises(ScenarioError):
        ServoAction([0.0, 0.5, 0.7], start_q=[0.0] * 5)


def test_load_scenario_round_trip(tmp_path):
    path = tmp_path / "scene.json"
    path.write_text(
        json.dumps(
            {
                "name": "custom",
                "shape": "ball",
                "mode": "etoh_only",
                "actions": [
                    {"target": [0.1, 0.6, 0.7]},
                    {"target": [0.0, 0.5, 0.8], "start_q": [0.0] * 6},
                ],
            }
        )
    )
    sc = load_scenario(path)
    assert sc.name == "custom" and sc.mode == "etoh_only"
    assert len(sc.actions) == 2
    assert sc.actions[1].start_q is not None


def test_load_scenario_rejects_bad_files(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad_json)
    missing_key = tmp_path / "missing.json"
    missing_key.write_text(json.dumps({"name": "x", "shape": "ball"}))
    with pytest.raises(ScenarioError):
        load_scenario(missing_key)
