"""Supervisor state machine choosing between the two sensor families."""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Optional

import numpy as np

from .sensors import FrustumSpec, in_frustum_camera


class ServoMode(enum.Enum):
    ETOH = "etoh"
    EINH = "einh"


@dataclasses.dataclass(frozen=True)
class MasterState:
    mode: ServoMode = ServoMode.ETOH
    hysteresis_margin: float = 0.05

    def __post_init__(self):
        if self.hysteresis_margin < 0.0:
            raise ValueError("hysteresis_margin must be nonnegative")


def in_shrunk_frustum(p_cam: np.ndarray, frustum: FrustumSpec, margin: float) -> bool:
    """Frustum membership with every boundary pulled inward by `margin`.

    The angular boundary is shrunk by the lateral distance equivalent of
    `margin` at the point's depth.
    """
    p = np.asarray(p_cam, dtype=float)
    depth = p[2]
    if not frustum.near + margin <= depth <= frustum.far - margin:
        return False
    lateral = math.hypot(p[0], p[1])
    return lateral <= depth * math.tan(frustum.fov / 2.0) - margin


def update_mode(
    state: MasterState,
    target_cam: Optional[np.ndarray],
    einh_frustum: FrustumSpec,
) -> MasterState:
    """One tick of the mode decision.

    Switching in requires the target inside the shrunken frustum; switching
    out happens immediately when the target is absent or outside the full
    frustum.
    """
    if state.mode is ServoMode.ETOH:
        if target_cam is not None and in_shrunk_frustum(
            target_cam, einh_frustum, state.hysteresis_margin
        ):
            return dataclasses.replace(state, mode=ServoMode.EINH)
        return state
    if target_cam is None or not in_frustum_camera(
        np.asarray(target_cam, dtype=float), einh_frustum
    ):
        return dataclasses.replace(state, mode=ServoMode.ETOH)
    return state
