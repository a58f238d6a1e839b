"""Deterministic simulator and library for hybrid visual servoing.

A six-axis arm servos its tool tip onto ball and disc targets using two
sensing sources: a ring of fixed wide-view cameras and a short-range
camera on the tool head. A mode master hands control between them with
hysteresis, a discounted planner contracts toward the believed target,
and a virtual-time executor overlaps each segment's execution with
planning the next. Everything is reproducible from a single seed.
"""

from .config import WorkcellConfig
from .errors import ServoError
from .harness import (
    report,
    run_scenario,
    simulate_marker_calibration,
    tracking_accuracy_experiment,
)
from .scenarios import Scenario, ServoAction, builtin_scenario, load_scenario
from .trace import RunTrace

__version__ = "0.1.0"

__all__ = [
    "RunTrace",
    "Scenario",
    "ServoAction",
    "ServoError",
    "WorkcellConfig",
    "builtin_scenario",
    "load_scenario",
    "report",
    "run_scenario",
    "simulate_marker_calibration",
    "tracking_accuracy_experiment",
    "__version__",
]
