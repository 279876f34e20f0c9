"""Multi-lane traffic micro-simulator: scenarios, vehicle dynamics, drivers,
observations, and the clean reward."""

from .driver import idm_acceleration, mobil_decision
from .geometry import LANE_WIDTH, CircularLane, Road, StraightLane, rects_overlap, rect_corners
from .scenarios import (
    ScenarioConfig,
    SpawnError,
    config_for,
    highway_config,
    roundabout_config,
    spawn_gap,
    twoway_config,
)
from .vehicle import Vehicle, bicycle_step, speed_control, steer_control
from .world import (
    ACTIONS,
    DECISION_DT,
    N_ACTIONS,
    OBS_COLS,
    OBS_ROWS,
    ContractError,
    RewardWeights,
    TrigState,
    World,
    TRACE_HEADER,
)

__all__ = [
    "ACTIONS",
    "DECISION_DT",
    "N_ACTIONS",
    "OBS_COLS",
    "OBS_ROWS",
    "LANE_WIDTH",
    "CircularLane",
    "StraightLane",
    "Road",
    "rects_overlap",
    "rect_corners",
    "ScenarioConfig",
    "SpawnError",
    "config_for",
    "highway_config",
    "twoway_config",
    "roundabout_config",
    "spawn_gap",
    "Vehicle",
    "bicycle_step",
    "speed_control",
    "steer_control",
    "ContractError",
    "RewardWeights",
    "TrigState",
    "World",
    "TRACE_HEADER",
    "idm_acceleration",
    "mobil_decision",
]
