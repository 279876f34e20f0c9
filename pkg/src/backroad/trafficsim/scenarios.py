"""Scenario configurations, road construction, and vehicle spawning.

Three scenarios: a multi-lane highway, a two-way road with an oncoming lane,
and a two-lane roundabout fed by four tangent entrances. Spawn streams are
fully determined by the RNG handed in.

Lane indexing: higher index = one lane to the right of travel. The two-way
oncoming lane is index 1 (so moving into it is a "turn_right"), the
roundabout inner circle is 0 and the outer 1, entrances/exits get ids >= 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import LANE_WIDTH, CircularLane, Road, StraightLane
from .vehicle import Vehicle

SCENARIO_KINDS = ("highway", "twoway", "roundabout")

ROUNDABOUT_ENTRANCE_ANGLES = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)


class SpawnError(RuntimeError):
    """No collision-free spawn found after bounded retries."""


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    lanes: int = 4
    hdvs: int = 40
    road_length: float = 10000.0
    v_min: float = 20.0
    v_max: float = 30.0
    spawn_speed_lo: float = 21.0
    spawn_speed_hi: float = 27.0
    episode_cap_s: float = 40.0
    include_ego: bool = True
    spacing_factor: float = 1.0
    # two-way extras
    hdvs_incoming: int = 10
    incoming_speed_lo: float = 4.0
    incoming_speed_hi: float = 12.0
    spacing_factor_incoming: float = 7.0
    incoming_start: float = 120.0
    # roundabout extras
    radius_inner: float = 60.0
    radius_outer: float = 64.0
    per_entrance: int = 3
    circulating: int = 6
    entrance_gap_lo: float = 10.0
    entrance_gap_hi: float = 60.0
    circ_spacing_factor: float = 2.0
    circ_speed_lo: float = 7.0
    circ_speed_hi: float = 13.0
    entrance_length: float = 150.0
    exit_length: float = 80.0

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def highway_config(**kw) -> ScenarioConfig:
    return ScenarioConfig(kind="highway").with_overrides(**kw)


def twoway_config(**kw) -> ScenarioConfig:
    base = ScenarioConfig(
        kind="twoway", lanes=2, hdvs=10, road_length=1500.0,
        v_min=6.0, v_max=16.0, spawn_speed_lo=6.0, spawn_speed_hi=10.0,
        spacing_factor=5.0)
    return base.with_overrides(**kw)


def roundabout_config(**kw) -> ScenarioConfig:
    base = ScenarioConfig(
        kind="roundabout", lanes=2, hdvs=0, road_length=0.0,
        v_min=7.0, v_max=15.0, spawn_speed_lo=9.0, spawn_speed_hi=15.0)
    return base.with_overrides(**kw)


def config_for(kind: str, **kw) -> ScenarioConfig:
    if kind == "highway":
        return highway_config(**kw)
    if kind == "twoway":
        return twoway_config(**kw)
    if kind == "roundabout":
        return roundabout_config(**kw)
    raise ValueError(f"unknown scenario kind {kind!r}")


def spawn_gap(rng: np.random.Generator, v0: float, n_lanes: int, sp: float = 1.0) -> float:
    """Gap between consecutive spawn positions: U[0.9, 1.1] * sp * (12+v0) * e^(-n/8)."""
    base = sp * (12.0 + v0) * math.exp(-n_lanes / 8.0)
    return float(rng.uniform(0.9 * base, 1.1 * base))


# ---------------------------------------------------------------------------
# road construction
# ---------------------------------------------------------------------------

def build_road(cfg: ScenarioConfig) -> Road:
    if cfg.kind == "highway":
        lanes = {
            i: StraightLane(i, origin=(0.0, -LANE_WIDTH * i), heading=0.0,
                            length=cfg.road_length)
            for i in range(cfg.lanes)
        }
        adj = {i: (i - 1 if i > 0 else None, i + 1 if i < cfg.lanes - 1 else None)
               for i in range(cfg.lanes)}
        return Road(lanes, adj)

    if cfg.kind == "twoway":
        lanes = {
            0: StraightLane(0, origin=(0.0, 0.0), heading=0.0, length=cfg.road_length),
            1: StraightLane(1, origin=(cfg.road_length, -LANE_WIDTH), heading=math.pi,
                            length=cfg.road_length),
        }
        adj = {0: (None, 1), 1: (0, None)}
        return Road(lanes, adj)

    if cfg.kind == "roundabout":
        lanes: dict[int, object] = {
            0: CircularLane(0, center=(0.0, 0.0), radius=cfg.radius_inner),
            1: CircularLane(1, center=(0.0, 0.0), radius=cfg.radius_outer),
        }
        adj = {0: (None, 1), 1: (0, None)}
        for k, ang in enumerate(ROUNDABOUT_ENTRANCE_ANGLES):
            junction = (cfg.radius_outer * math.cos(ang), cfg.radius_outer * math.sin(ang))
            tangent = ang + math.pi / 2.0
            ring_s = (ang % (2.0 * math.pi)) * cfg.radius_outer
            entrance_id, exit_id = 2 + k, 6 + k
            lanes[entrance_id] = StraightLane(
                entrance_id,
                origin=(junction[0] - cfg.entrance_length * math.cos(tangent),
                        junction[1] - cfg.entrance_length * math.sin(tangent)),
                heading=tangent, length=cfg.entrance_length,
                successor=(1, ring_s))
            lanes[exit_id] = StraightLane(
                exit_id, origin=junction, heading=tangent, length=cfg.exit_length)
            adj[entrance_id] = (None, None)
            adj[exit_id] = (None, None)
        return Road(lanes, adj)

    raise ValueError(f"unknown scenario kind {cfg.kind!r}")


# ---------------------------------------------------------------------------
# spawning
# ---------------------------------------------------------------------------

def _overlapping(vehicles: list[Vehicle]) -> bool:
    for i, a in enumerate(vehicles):
        for b in vehicles[i + 1:]:
            if a.lane_id == b.lane_id and abs(a.x - b.x) + abs(a.y - b.y) < a.length + 1.0:
                return True
    return False


def spawn_vehicles(cfg: ScenarioConfig, road: Road, rng: np.random.Generator,
                   max_attempts: int = 20):
    """Returns (vehicles, ego_or_None, route_info). Raises SpawnError when no
    collision-free layout is found within the retry budget."""
    for _ in range(max_attempts):
        if cfg.kind == "highway":
            out = _spawn_highway(cfg, road, rng)
        elif cfg.kind == "twoway":
            out = _spawn_twoway(cfg, road, rng)
        else:
            out = _spawn_roundabout(cfg, road, rng)
        if not _overlapping(out[0]):
            return out
    raise SpawnError(f"could not place vehicles after {max_attempts} attempts")


def _place(road: Road, vid: int, role: str, lane_id: int, s: float, speed: float) -> Vehicle:
    lane = road.lane(lane_id)
    x, y = lane.position(s)
    return Vehicle(vid=vid, role=role, lane_id=lane_id, x=x, y=y,
                   speed=speed, heading=lane.heading_at(s), target_speed=speed)


def _spawn_highway(cfg, road, rng):
    vehicles: list[Vehicle] = []
    ego = None
    vid = 0
    cursor = 0.0
    if cfg.include_ego:
        lane = int(rng.integers(cfg.lanes))
        v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
        ego = _place(road, vid, "ego", lane, cursor, v0)
        ego.target_speed = min(max(v0, cfg.v_min), cfg.v_max)
        vehicles.append(ego)
        vid += 1
    for _ in range(cfg.hdvs):
        v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
        cursor += spawn_gap(rng, v0, cfg.lanes, cfg.spacing_factor)
        lane = int(rng.integers(cfg.lanes))
        vehicles.append(_place(road, vid, "hdv", lane, cursor, v0))
        vid += 1
    return vehicles, ego, {}


def _spawn_twoway(cfg, road, rng):
    vehicles: list[Vehicle] = []
    ego = None
    vid = 0
    if cfg.include_ego:
        v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
        ego = _place(road, vid, "ego", 0, 0.0, v0)
        ego.target_speed = min(max(v0, cfg.v_min), cfg.v_max)
        vehicles.append(ego)
        vid += 1
    cursor = 0.0
    for _ in range(cfg.hdvs):
        v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
        cursor += spawn_gap(rng, v0, 2, cfg.spacing_factor)
        vehicles.append(_place(road, vid, "hdv", 0, cursor, v0))
        vid += 1
    # oncoming stream spawns by world x and drives toward the ego
    cursor = cfg.incoming_start
    for _ in range(cfg.hdvs_incoming):
        v0 = float(rng.uniform(cfg.incoming_speed_lo, cfg.incoming_speed_hi))
        cursor += spawn_gap(rng, v0, 2, cfg.spacing_factor_incoming)
        s = cfg.road_length - cursor
        vehicles.append(_place(road, vid, "hdv", 1, s, v0))
        vid += 1
    return vehicles, ego, {}


def _spawn_roundabout(cfg, road, rng):
    vehicles: list[Vehicle] = []
    vid = 0
    ego = None
    route = {}
    ego_entrance = int(rng.integers(len(ROUNDABOUT_ENTRANCE_ANGLES))) if cfg.include_ego else -1
    veh_len = 5.0  # entrance gaps are net (bumper-to-bumper) space gaps
    for k in range(len(ROUNDABOUT_ENTRANCE_ANGLES)):
        lane_id = 2 + k
        back = 40.0  # first vehicle spawns short of the merge zone so it can yield
        for _ in range(cfg.per_entrance):
            back += float(rng.uniform(cfg.entrance_gap_lo, cfg.entrance_gap_hi)) + veh_len
            v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
            vehicles.append(_place(road, vid, "hdv", lane_id, cfg.entrance_length - back, v0))
            vid += 1
        if k == ego_entrance:
            back += float(rng.uniform(cfg.entrance_gap_lo, cfg.entrance_gap_hi)) + veh_len
            v0 = float(rng.uniform(cfg.spawn_speed_lo, cfg.spawn_speed_hi))
            ego = _place(road, vid, "ego", lane_id, cfg.entrance_length - back, v0)
            ego.target_speed = min(max(v0, cfg.v_min), cfg.v_max)
            vehicles.append(ego)
            vid += 1
            # destination: the exit opposite the entrance
            route["exit_lane"] = 6 + (k + 2) % 4
    start = float(rng.uniform(0.0, 2.0 * math.pi * cfg.radius_inner))
    cursor = start
    for _ in range(cfg.circulating):
        v0 = float(rng.uniform(cfg.circ_speed_lo, cfg.circ_speed_hi))
        cursor += spawn_gap(rng, v0, 2, cfg.circ_spacing_factor)
        lane_id = int(rng.integers(2))
        lane = road.lane(lane_id)
        vehicles.append(_place(road, vid, "hdv", lane_id, cursor % lane.length, v0))
        vid += 1
    return vehicles, ego, route
