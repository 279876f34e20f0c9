"""IDM car-following and MOBIL lane-change decisions for the simulated drivers."""

from __future__ import annotations

import math

# IDM constants (reference-simulator defaults)
IDM_ACCEL_MAX = 3.0       # m/s^2
IDM_BRAKE_COMFORT = 5.0   # m/s^2, the b inside sqrt(a*b)
IDM_BRAKE_MAX = 8.0       # m/s^2, emergency clip
IDM_MIN_GAP = 10.0        # m, s0
IDM_TIME_HEADWAY = 1.5    # s
IDM_DELTA = 4.0

# MOBIL constants
MOBIL_POLITENESS = 0.3
MOBIL_GAIN_THRESHOLD = 0.2   # m/s^2
MOBIL_SAFE_BRAKING = 2.0     # m/s^2, max deceleration imposed on the new follower
LANE_CHANGE_COOLDOWN = 1.0   # s
LANE_SETTLED_TOLERANCE = 0.3  # m, must be near lane center before a new change


def idm_acceleration(speed: float, free_speed: float,
                     gap: float | None, lead_speed: float | None) -> float:
    """a = a_max * (1 - (v/v0)^4 - (s*/s)^2), s* = s0 + vT + v dv / (2 sqrt(ab)).

    ``gap`` is the net bumper-to-bumper distance to the leader, None when the
    road ahead is free. Non-positive gaps return emergency braking.
    """
    v0 = max(free_speed, 0.1)
    acc = IDM_ACCEL_MAX * (1.0 - (max(speed, 0.0) / v0) ** IDM_DELTA)
    if gap is not None:
        if gap <= 0.0:
            return -IDM_BRAKE_MAX
        dv = speed - lead_speed
        s_star = (IDM_MIN_GAP + speed * IDM_TIME_HEADWAY
                  + speed * dv / (2.0 * math.sqrt(IDM_ACCEL_MAX * IDM_BRAKE_COMFORT)))
        acc -= IDM_ACCEL_MAX * (s_star / gap) ** 2
    return max(-IDM_BRAKE_MAX, min(IDM_ACCEL_MAX, acc))


def mobil_decision(world, veh) -> int:
    """Returns -1 (left), 0 (stay), or +1 (right).

    Change requires: the new follower never brakes harder than the safety
    limit, and own gain plus politeness-weighted follower gains exceeds the
    threshold.
    """
    if world.time - veh.last_lane_change_t < LANE_CHANGE_COOLDOWN:
        return 0
    lane = world.road.lane(veh.lane_id)
    _, lateral = lane.local(veh.x, veh.y)
    if abs(lateral) > LANE_SETTLED_TOLERANCE:
        return 0
    if world.lane_change_restricted(veh):
        return 0

    best = 0
    best_gain = MOBIL_GAIN_THRESHOLD
    for direction, cand in ((-1, world.road.left_of(veh.lane_id)),
                            (1, world.road.right_of(veh.lane_id))):
        if cand is None:
            continue
        if not world.same_direction(veh.lane_id, cand, veh):
            continue  # never change into an opposing lane
        gain = _mobil_gain(world, veh, cand)
        if gain is not None and gain > best_gain:
            best_gain = gain
            best = direction
    return best


def _mobil_gain(world, veh, cand_lane: int) -> float | None:
    """Politeness-weighted acceleration gain of moving veh to cand_lane,
    or None when the move is unsafe."""
    new_lead, new_follow = world.neighbours_on_lane(veh, cand_lane)
    a_follow_after = world.idm_for(new_follow, leader=veh) if new_follow else None
    if a_follow_after is not None and a_follow_after < -MOBIL_SAFE_BRAKING:
        return None
    # candidate lane must have room for the vehicle itself
    if new_lead is not None and world.gap_between(veh, new_lead) <= 0.0:
        return None
    if new_follow is not None and world.gap_between(new_follow, veh) <= 0.0:
        return None

    old_lead, old_follow = world.neighbours_on_lane(veh, veh.lane_id)
    a_self_before = world.idm_for(veh, leader=old_lead)
    a_self_after = world.idm_for(veh, leader=new_lead)
    gain = a_self_after - a_self_before

    others = 0.0
    if new_follow is not None:
        a_before = world.idm_for(new_follow, leader=new_lead)
        others += a_follow_after - a_before
    if old_follow is not None:
        a_before = world.idm_for(old_follow, leader=veh)
        a_after = world.idm_for(old_follow, leader=old_lead)
        others += a_after - a_before
    return gain + MOBIL_POLITENESS * others
