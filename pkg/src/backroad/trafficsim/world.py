"""Deterministic traffic world: decision stepping, observations, rewards.

A decision step executes one of five high-level ego actions, advances every
vehicle through two 0.1 s physics sub-steps (0.2 s of simulated time), and
returns the observation matrix, the clean reward, the done flag, and an info
dict. Identical (config, seed, action sequence) triples reproduce trajectories
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import driver
from .geometry import Road, rect_corners, rects_overlap, wrap_pi
from .scenarios import ScenarioConfig, build_road, spawn_vehicles
from .vehicle import Vehicle, bicycle_step, speed_control, steer_control

ACTIONS = ("turn_left", "cruise", "turn_right", "speed_up", "slow_down")
N_ACTIONS = len(ACTIONS)
DECISION_DT = 0.2
PHYSICS_DT = 0.1
SPEED_STEP = 2.5
OBS_ROWS = 7          # ego + 6 observable front HDVs
OBS_COLS = 7
SENSE_RADIUS = 180.0
SENSE_BEHIND = 10.0
HEADWAY_CAP = 100.0

TRACE_HEADER = "t,vehicle_id,role,lane,x,y,v,heading,crashed"


class ContractError(RuntimeError):
    """Stepping a finished episode or similar misuse."""


class TrigState(NamedTuple):
    """Physical-units features a trigger formula can reference."""
    x: float
    v: float
    lane: int


@dataclass
class RewardWeights:
    w_c: float = 1.2
    w_s: float = 0.4
    w_h: float = 0.4
    t_h: float = 1.2          # s, time-headway threshold
    headway_cap: float = HEADWAY_CAP

    def validate(self) -> None:
        if min(self.w_c, self.w_s, self.w_h) <= 0 or self.t_h <= 0:
            raise ValueError("reward weights must be positive")


class World:
    def __init__(self, cfg: ScenarioConfig, seed: int, weights: RewardWeights | None = None):
        self.cfg = cfg
        self.seed = seed
        self.weights = weights or RewardWeights()
        self.weights.validate()
        self.road: Road = build_road(cfg)
        self.vehicles: list[Vehicle] = []
        self.ego: Vehicle | None = None
        self.route: dict = {}
        self.time = 0.0
        self.steps = 0
        self.done = False
        self.arrived = False
        self.hdv_collisions = 0
        self.ego_ldd = 0.0
        self.trace: list[tuple] = []
        self._overrides: dict[int, dict] = {}
        self.ego_target_lane: int = 0
        self.rng = np.random.default_rng(np.random.PCG64(seed))
        self.max_steps = int(round(cfg.episode_cap_s / DECISION_DT))
        # merge points: (target lane, s) fed by some lane's successor
        self.junctions: dict[int, list[float]] = {}
        for lane in self.road.lanes.values():
            if lane.successor is not None:
                self.junctions.setdefault(lane.successor[0], []).append(lane.successor[1])

    # ------------------------------------------------------------------
    # episode control
    # ------------------------------------------------------------------

    def reset(self):
        self.vehicles, self.ego, self.route = spawn_vehicles(self.cfg, self.road, self.rng)
        self.time = 0.0
        self.steps = 0
        self.done = False
        self.arrived = False
        self.hdv_collisions = 0
        self.ego_ldd = 0.0
        self.trace = []
        self._overrides = {}
        if self.ego is not None:
            self.ego_target_lane = self.ego.lane_id
        self._log_trace()
        return self.observation() if self.ego is not None else None

    def step(self, action: int | None):
        if self.done:
            raise ContractError("step() called on a finished episode")
        if self.ego is not None:
            if action is None:
                raise ContractError("ego scenario requires an action")
            self._apply_ego_action(int(action))
        for sub in range(int(round(DECISION_DT / PHYSICS_DT))):
            self._physics_substep(mobil=(sub == 0))
        self.time += DECISION_DT
        self.steps += 1

        obs = presence = None
        reward = 0.0
        headway = None
        if self.ego is not None:
            obs, presence = self.build_observation()
            headway = self.headway()
            reward = self.clean_reward()
            if self.ego.crashed or self.arrived:
                self.done = True
        if self.steps >= self.max_steps:
            self.done = True
        self._log_trace()
        info = {
            "crashed": bool(self.ego.crashed) if self.ego is not None else False,
            "arrived": self.arrived,
            "headway": headway,
            "presence": presence,
            "time": self.time,
            "hdv_collisions": self.hdv_collisions,
            "vehicles": [(v.vid, v.role, v.lane_id, v.x, v.y, v.speed, v.heading, v.crashed)
                         for v in self.vehicles],
        }
        return obs, reward, self.done, info

    def _apply_ego_action(self, action: int) -> None:
        ego = self.ego
        name = ACTIONS[action]
        if name == "turn_left":
            cand = self.road.left_of(self.ego_target_lane)
            if cand is not None:
                self.ego_target_lane = cand
                ego.lane_id = cand
                ego.last_lane_change_t = self.time
        elif name == "turn_right":
            cand = self.road.right_of(self.ego_target_lane)
            if cand is not None:
                self.ego_target_lane = cand
                ego.lane_id = cand
                ego.last_lane_change_t = self.time
        elif name == "speed_up":
            ego.target_speed = min(ego.target_speed + SPEED_STEP, self.cfg.v_max)
        elif name == "slow_down":
            ego.target_speed = max(ego.target_speed - SPEED_STEP, self.cfg.v_min)
        # cruise: keep targets

    # ------------------------------------------------------------------
    # physics
    # ------------------------------------------------------------------

    def _physics_substep(self, mobil: bool) -> None:
        occupancy = self._lane_occupancy()
        if mobil:
            for veh in self.vehicles:
                if veh.crashed or veh.role == "ego" or veh.vid in self._overrides:
                    continue
                direction = driver.mobil_decision(self, veh)
                if direction:
                    cand = (self.road.left_of(veh.lane_id) if direction < 0
                            else self.road.right_of(veh.lane_id))
                    if cand is not None:
                        veh.lane_id = cand
                        veh.last_lane_change_t = self.time
            if any(v.last_lane_change_t == self.time for v in self.vehicles):
                occupancy = self._lane_occupancy()

        controls = []
        for veh in self.vehicles:
            if veh.crashed:
                controls.append((0.0, 0.0))
                continue
            if veh.role == "ego":
                accel = speed_control(veh, veh.target_speed)
                steer = steer_control(veh, self.road.lane(self.ego_target_lane))
            elif veh.vid in self._overrides:
                ov = self._overrides[veh.vid]
                accel = speed_control(veh, ov["speed"])
                steer = steer_control(veh, self.road.lane(ov["lane"]))
            else:
                follow = self._idm_inputs(veh, occupancy)
                if follow is None:
                    accel = driver.idm_acceleration(veh.speed, veh.target_speed, None, None)
                else:
                    accel = driver.idm_acceleration(veh.speed, veh.target_speed,
                                                    follow[0], follow[1])
                steer = steer_control(veh, self.road.lane(veh.lane_id))
            controls.append((accel, steer))

        ego_before = (self.ego.x, self.ego.y) if self.ego is not None else None
        for veh, (accel, steer) in zip(self.vehicles, controls):
            if not veh.crashed:
                bicycle_step(veh, accel, steer, PHYSICS_DT)
        if self.ego is not None and ego_before is not None:
            lane = self.road.lane(self.ego.lane_id)
            s_now, _ = lane.local(self.ego.x, self.ego.y)
            tangent = lane.heading_at(s_now)
            dx = self.ego.x - ego_before[0]
            dy = self.ego.y - ego_before[1]
            self.ego_ldd += abs(dx * math.cos(tangent) + dy * math.sin(tangent))
        self._lane_transitions()
        self._detect_collisions()

    def _lane_transitions(self) -> None:
        for veh in self.vehicles:
            if veh.crashed:
                continue
            lane = self.road.lane(veh.lane_id)
            if lane.successor is not None:
                s, _ = lane.local(veh.x, veh.y)
                if s >= lane.length:
                    veh.lane_id = lane.successor[0]
                    if veh.vid in self._overrides:
                        self._overrides[veh.vid]["lane"] = veh.lane_id
            if (self.ego is not None and veh is self.ego and self.route.get("exit_lane")
                    and veh.lane_id == 1 and self.cfg.kind == "roundabout"):
                exit_lane = self.road.lane(self.route["exit_lane"])
                dist = math.hypot(veh.x - exit_lane.origin[0], veh.y - exit_lane.origin[1])
                ahead = wrap_pi(math.atan2(veh.y, veh.x)
                                - math.atan2(exit_lane.origin[1], exit_lane.origin[0]))
                if dist < 6.0 and -0.2 < ahead <= 0.0:
                    veh.lane_id = self.route["exit_lane"]
                    self.ego_target_lane = veh.lane_id
                    self.arrived = True

    def _detect_collisions(self) -> None:
        live = [v for v in self.vehicles]
        live.sort(key=lambda v: v.x)
        n = len(live)
        for i in range(n):
            a = live[i]
            for j in range(i + 1, n):
                b = live[j]
                if b.x - a.x > a.length + b.length:
                    break
                if a.crashed and b.crashed:
                    continue
                if abs(a.y - b.y) > a.length:
                    continue
                ra = rect_corners(a.x, a.y, a.heading, a.length, a.width)
                rb = rect_corners(b.x, b.y, b.heading, b.length, b.width)
                if rects_overlap(ra, rb):
                    if a.role != "ego" and b.role != "ego":
                        self.hdv_collisions += 1
                    for v in (a, b):
                        v.crashed = True
                        v.speed = 0.0

    # ------------------------------------------------------------------
    # lane queries (used by IDM/MOBIL and rewards)
    # ------------------------------------------------------------------

    def _lane_occupancy(self) -> dict[int, list[tuple[float, Vehicle]]]:
        """Vehicles bucketed by assigned lane plus every same-direction lane
        they physically straddle (mid lane-change, merging off an entrance)."""
        occ: dict[int, list[tuple[float, Vehicle]]] = {i: [] for i in self.road.lanes}
        for veh in self.vehicles:
            lane = self.road.lane(veh.lane_id)
            s, _ = lane.local(veh.x, veh.y)
            occ[veh.lane_id].append((s, veh))
            for idx, other in self.road.lanes.items():
                if idx == veh.lane_id:
                    continue
                so, lateral = other.local(veh.x, veh.y)
                if abs(lateral) >= 3.5:
                    continue
                if abs(wrap_pi(other.heading_at(so) - veh.heading)) < math.pi / 2.0:
                    occ[idx].append((so, veh))
        for entries in occ.values():
            entries.sort(key=lambda e: (e[0], e[1].vid))
        self._occupancy_cache = occ
        return occ

    def _leader(self, veh: Vehicle, occupancy) -> Vehicle | None:
        lane = self.road.lane(veh.lane_id)
        s, _ = lane.local(veh.x, veh.y)
        best, best_gap = None, math.inf
        for so, other in occupancy[veh.lane_id]:
            if other is veh:
                continue
            gap = so - s
            if lane.wraps:
                gap %= lane.length
                if gap == 0.0:
                    continue
            elif gap <= 0.0:
                continue
            if gap < best_gap:
                best, best_gap = other, gap
        return best

    def _idm_inputs(self, veh: Vehicle, occupancy) -> tuple[float, float] | None:
        """(net gap, leader speed) the IDM should follow, or None on free road.
        Entering vehicles yield to ring traffic: anything closing on the merge
        point from behind turns into a virtual stop just short of it."""
        leader = self._leader(veh, occupancy)
        best = None
        if leader is not None:
            best = (self.gap_between(veh, leader), leader.speed)
        lane = self.road.lane(veh.lane_id)
        if lane.successor is not None:
            s, _ = lane.local(veh.x, veh.y)
            remaining = lane.length - s
            if remaining < 100.0:
                succ_id, junction_s = lane.successor
                succ = self.road.lane(succ_id)
                for so, other in occupancy[succ_id]:
                    if other is veh:
                        continue
                    arc = (so - junction_s) % succ.length
                    can_stop = remaining - 22.0 > veh.speed * veh.speed / 12.0
                    cand = None
                    if arc < 30.0:
                        # already through: follow it onto the ring
                        cand = (remaining + arc - veh.length, other.speed)
                    elif arc > succ.length - 85.0 and can_stop:
                        # ring traffic closing on the merge point: hold at a
                        # stop ~36 m short of it, where the tangent entrance
                        # still has lateral clearance from the ring; once the
                        # stop is unreachable the merge is committed
                        cand = (remaining - 26.0, 0.0)
                    if cand is not None and (best is None or cand[0] < best[0]):
                        best = cand
        return best

    def neighbours_on_lane(self, veh: Vehicle, lane_id: int):
        """(leader, follower) for veh hypothetically on lane_id."""
        lane = self.road.lane(lane_id)
        s, _ = lane.local(veh.x, veh.y)
        occ = getattr(self, "_occupancy_cache", None) or self._lane_occupancy()
        lead, lead_gap = None, math.inf
        follow, follow_gap = None, math.inf
        for so, other in occ.get(lane_id, ()):
            if other is veh:
                continue
            gap = so - s
            if lane.wraps:
                gap %= lane.length
                back = lane.length - gap
                if gap <= 0.0:
                    continue
                if gap < lead_gap:
                    lead, lead_gap = other, gap
                if back < follow_gap:
                    follow, follow_gap = other, back
            else:
                if gap > 0.0 and gap < lead_gap:
                    lead, lead_gap = other, gap
                elif gap <= 0.0 and -gap < follow_gap:
                    follow, follow_gap = other, -gap
        return lead, follow

    def lane_change_restricted(self, veh: Vehicle) -> bool:
        """No discretionary lane changes through a merge zone."""
        for lane_id in (veh.lane_id, self.road.left_of(veh.lane_id),
                        self.road.right_of(veh.lane_id)):
            if lane_id is None or lane_id not in self.junctions:
                continue
            lane = self.road.lane(lane_id)
            s, _ = lane.local(veh.x, veh.y)
            for js in self.junctions[lane_id]:
                ahead = (js - s) % lane.length if lane.wraps else js - s
                behind = (s - js) % lane.length if lane.wraps else s - js
                if 0.0 <= ahead < 25.0 or 0.0 <= behind < 10.0:
                    return True
        return False

    def same_direction(self, lane_a: int, lane_b: int, veh: Vehicle) -> bool:
        la, lb = self.road.lane(lane_a), self.road.lane(lane_b)
        sa, _ = la.local(veh.x, veh.y)
        sb, _ = lb.local(veh.x, veh.y)
        return abs(wrap_pi(la.heading_at(sa) - lb.heading_at(sb))) < math.pi / 2.0

    def gap_between(self, back: Vehicle, front: Vehicle) -> float:
        """Net bumper gap measured along the back vehicle's assigned lane."""
        lane = self.road.lane(back.lane_id)
        sb, _ = lane.local(back.x, back.y)
        sf, _ = lane.local(front.x, front.y)
        gap = sf - sb
        if lane.wraps:
            gap %= lane.length
        return gap - (back.length + front.length) / 2.0

    def idm_for(self, veh: Vehicle | None, leader: Vehicle | None) -> float | None:
        if veh is None:
            return None
        if leader is None:
            return driver.idm_acceleration(veh.speed, veh.target_speed, None, None)
        return driver.idm_acceleration(veh.speed, veh.target_speed,
                                       self.gap_between(veh, leader), leader.speed)

    # ------------------------------------------------------------------
    # ego-facing queries
    # ------------------------------------------------------------------

    def headway(self) -> float:
        """Net gap to the leader in the ego's lane along its travel direction,
        capped when the road ahead is free."""
        ego = self.ego
        lane = self.road.lane(ego.lane_id)
        s, _ = lane.local(ego.x, ego.y)
        direction = 1.0
        if abs(wrap_pi(lane.heading_at(s) - ego.heading)) > math.pi / 2.0:
            direction = -1.0
        best = math.inf
        for other in self.vehicles:
            if other is ego:
                continue
            if other.lane_id != ego.lane_id:
                continue
            so, _ = lane.local(other.x, other.y)
            gap = (so - s) * direction
            if lane.wraps:
                gap %= lane.length
            if gap > 0.0 and gap < best:
                best = gap
        if not math.isfinite(best):
            return self.weights.headway_cap
        return min(best - (ego.length + 5.0) / 2.0, self.weights.headway_cap)

    def clean_reward(self) -> float:
        """w_c*r_c + w_s*r_s + w_h*r_h on the post-step world."""
        ego = self.ego
        w = self.weights
        r_c = -1.0 if ego.crashed else 0.0
        span = max(self.cfg.v_max - self.cfg.v_min, 1e-9)
        r_s = min(max((ego.speed - self.cfg.v_min) / span, 0.0), 1.0)
        d_h = max(self.headway(), 1e-6)
        r_h = math.log(d_h / (w.t_h * max(ego.speed, 1.0)))
        r_h = max(-2.0, min(2.0, r_h))
        return w.w_c * r_c + w.w_s * r_s + w.w_h * r_h

    def observation(self) -> np.ndarray:
        obs, _ = self.build_observation()
        return obs

    def build_observation(self):
        """Rows: [p, x, y, vx, vy, cos(psi), sin(psi)]; row 0 is the ego in
        absolute (normalized) coordinates, rows 1.. are the nearest front
        HDVs with position/velocity relative to the ego. Absent rows are
        exactly zero with p=0."""
        ego = self.ego
        obs = np.zeros((OBS_ROWS, OBS_COLS), dtype=np.float64)
        presence = np.zeros(OBS_ROWS, dtype=bool)
        sx, sy, sv = self._norm_scales()
        evx, evy = ego.velocity()
        obs[0] = [1.0, ego.x / sx, ego.y / sy, evx / sv, evy / sv,
                  math.cos(ego.heading), math.sin(ego.heading)]
        presence[0] = True

        cos_h, sin_h = math.cos(ego.heading), math.sin(ego.heading)
        cands = []
        for other in self.vehicles:
            if other is ego:
                continue
            dx, dy = other.x - ego.x, other.y - ego.y
            dist = math.hypot(dx, dy)
            if dist > SENSE_RADIUS:
                continue
            forward = dx * cos_h + dy * sin_h
            if forward < -SENSE_BEHIND:
                continue
            cands.append((dist, other.vid, other, dx, dy))
        cands.sort(key=lambda c: (c[0], c[1]))
        for row, (_, _, other, dx, dy) in enumerate(cands[:OBS_ROWS - 1], start=1):
            ovx, ovy = other.velocity()
            obs[row] = [1.0, dx / SENSE_RADIUS, dy / sy,
                        (ovx - evx) / sv, (ovy - evy) / sv,
                        math.cos(other.heading), math.sin(other.heading)]
            presence[row] = True
        np.clip(obs, -1.0, 1.0, out=obs)
        return obs, presence

    def _norm_scales(self):
        cfg = self.cfg
        if cfg.kind == "roundabout":
            arena = cfg.radius_outer + cfg.entrance_length
            return arena, arena, cfg.v_max + 5.0
        return cfg.road_length, 4.0 * max(cfg.lanes, 2), cfg.v_max + 5.0

    # ------------------------------------------------------------------
    # trigger support
    # ------------------------------------------------------------------

    def trigger_features(self, veh: Vehicle) -> TrigState:
        """Physical-units (x, v, lane) for trigger formulas. On the roundabout
        x is arc length around the ring unwrapped about the ego so differences
        a.x - e.x stay meaningful."""
        if self.cfg.kind != "roundabout":
            return TrigState(veh.x, veh.speed, veh.lane_id)
        ref = self.cfg.radius_outer
        ego_s = self._ring_coordinate(self.ego) if self.ego is not None else 0.0
        s = self._ring_coordinate(veh)
        circ = 2.0 * math.pi * ref
        rel = (s - ego_s + circ / 2.0) % circ - circ / 2.0
        return TrigState(rel, veh.speed, veh.lane_id)

    def _ring_coordinate(self, veh: Vehicle) -> float:
        ref = self.cfg.radius_outer
        lane = self.road.lane(veh.lane_id)
        if lane.wraps:
            return math.atan2(veh.y, veh.x) % (2.0 * math.pi) * ref
        s, _ = lane.local(veh.x, veh.y)
        jx, jy = (lane.successor and self.road.lane(lane.successor[0]).position(lane.successor[1])) \
            or lane.origin
        base = math.atan2(jy, jx) % (2.0 * math.pi) * ref
        if lane.successor is not None:   # entrance: behind the junction
            return base - (lane.length - s)
        return base + s                   # exit: past the junction

    # ------------------------------------------------------------------
    # attacker control hooks
    # ------------------------------------------------------------------

    def vehicle_by_id(self, vid: int) -> Vehicle:
        for veh in self.vehicles:
            if veh.vid == vid:
                return veh
        raise KeyError(f"no vehicle {vid}")

    def set_attacker_command(self, vid: int, lane_delta: int | None,
                             target_speed: float | None) -> None:
        veh = self.vehicle_by_id(vid)
        veh.role = "attacker"
        ov = self._overrides.setdefault(vid, {"lane": veh.lane_id, "speed": veh.speed})
        if lane_delta:
            cand = (self.road.left_of(ov["lane"]) if lane_delta < 0
                    else self.road.right_of(ov["lane"]))
            if cand is not None:
                ov["lane"] = cand
                veh.lane_id = cand
                veh.last_lane_change_t = self.time
        if target_speed is not None:
            ov["speed"] = float(target_speed)

    def release_attacker(self, vid: int) -> None:
        self._overrides.pop(vid, None)

    def attacker_active(self, vid: int) -> bool:
        return vid in self._overrides

    # ------------------------------------------------------------------
    # trace logging
    # ------------------------------------------------------------------

    def _log_trace(self) -> None:
        for v in self.vehicles:
            self.trace.append((self.time, v.vid, v.role, v.lane_id,
                               v.x, v.y, v.speed, v.heading, int(v.crashed)))

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(TRACE_HEADER + "\n")
            for row in self.trace:
                t, vid, role, lane, x, y, v, heading, crashed = row
                fh.write(f"{t:.1f},{vid},{role},{lane},{x:.6f},{y:.6f},"
                         f"{v:.6f},{heading:.6f},{crashed}\n")
