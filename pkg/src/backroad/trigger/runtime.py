"""Trigger evaluation against state histories and attacker-candidate matching.

A history is a sequence of (ego, attacker) pairs of TrigState-like objects
(fields x, v, lane), oldest first, one pair per trigger timestep; its length
must equal the trigger window. Atom features evaluate in physical units.
"""

from __future__ import annotations

import logging
import math

from .dsl import (
    Atom,
    BoolOp,
    Command,
    Formula,
    Ite,
    TriggerIndexError,
    TriggerSpec,
    formula_atoms,
)

log = logging.getLogger(__name__)

CLEARANCE = 12.0         # m, free-path margin for command feasibility
ACCEL_LIMIT = 5.0        # matches the low-level controller
SPEED_GAIN = 1.0 / 0.6


def _resolve(ref, history, window):
    pair = history[window - 1 - ref.offset]
    state = pair[1] if ref.vehicle == "a" else pair[0]
    return float(getattr(state, ref.feature))


def _eval_atom(atom: Atom, history, window) -> bool:
    lhs = _resolve(atom.lhs, history, window)
    if atom.op is None:
        val = lhs
    else:
        rhs = _resolve(atom.rhs, history, window)
        if atom.op == "+":
            val = lhs + rhs
        elif atom.op == "-":
            val = lhs - rhs
        elif atom.op == "*":
            val = lhs * rhs
        else:
            if rhs == 0.0:
                log.warning("division by zero in atom %s; treated as false", atom.fmt())
                return False
            val = lhs / rhs
    c = atom.value
    if atom.cmp == "==":
        return val == c
    if atom.cmp == "!=":
        return val != c
    if atom.cmp == "<":
        return val < c
    if atom.cmp == "<=":
        return val <= c
    if atom.cmp == ">":
        return val > c
    return val >= c


def _eval(phi: Formula, history, window) -> bool:
    if isinstance(phi, Atom):
        return _eval_atom(phi, history, window)
    if isinstance(phi, BoolOp):
        if phi.kind == "and":
            return _eval(phi.left, history, window) and _eval(phi.right, history, window)
        return _eval(phi.left, history, window) or _eval(phi.right, history, window)
    if isinstance(phi, Ite):
        branch = phi.then if _eval(phi.cond, history, window) else phi.other
        return _eval(branch, history, window)
    raise TypeError(f"not a formula node: {phi!r}")


def eval_phi(spec: TriggerSpec, history) -> bool:
    """True iff the formula holds over the window of (ego, attacker) pairs."""
    if len(history) != spec.window:
        raise ValueError(f"history length {len(history)} != window {spec.window}")
    return _eval(spec.phi, history, spec.window)


def earliest_atoms(spec: TriggerSpec) -> list[Atom]:
    """Atoms whose every time index is the first step of the window."""
    first = spec.window - 1
    return [a for a in formula_atoms(spec.phi) if all(off == first for off in a.offsets())]


def attacker_step(spec: TriggerSpec, k: int) -> Command:
    """The command the attacker drives during window step k (0-based)."""
    if not (0 <= k < spec.window - 1):
        raise TriggerIndexError(
            f"command index {k} outside window of {spec.window - 1} commands")
    return spec.commands[k]


# ---------------------------------------------------------------------------
# candidate matching
# ---------------------------------------------------------------------------

def _approach(v: float, target: float, dt: float) -> float:
    """End speed of the proportional controller after dt seconds."""
    steps = max(1, int(round(dt / 0.1)))
    for _ in range(steps):
        a = max(-ACCEL_LIMIT, min(ACCEL_LIMIT, SPEED_GAIN * (target - v)))
        v = max(0.0, v + a * 0.1)
    return v


def _lane_sign(world, lane_id: int, x: float, y: float) -> float:
    lane = world.road.lane(lane_id)
    if lane.wraps:
        return 1.0
    s, _ = lane.local(x, y)
    return 1.0 if abs(lane.heading_at(s)) < math.pi / 2.0 else -1.0


def xi_feasible(spec: TriggerSpec, world, veh, epoch_s: float) -> bool:
    """Checks the candidate has room to drive the command sequence: target
    lanes exist and no other vehicle (constant-speed prediction) sits inside
    the clearance envelope at any step."""
    att_lane = veh.lane_id
    att_x = world.trigger_features(veh).x
    att_v = veh.speed
    target = att_v
    others = []
    for other in world.vehicles:
        if other is veh or other.crashed:
            continue
        feats = world.trigger_features(other)
        sign = _lane_sign(world, other.lane_id, other.x, other.y)
        others.append((other, feats.x, feats.v * sign))
    sign = _lane_sign(world, att_lane, veh.x, veh.y)
    for k in range(spec.window - 1):
        cmd = spec.commands[k]
        if cmd.lane:
            cand = (world.road.left_of(att_lane) if cmd.lane < 0
                    else world.road.right_of(att_lane))
            if cand is None:
                return False
            att_lane = cand
        if cmd.speed is not None:
            target = cmd.speed
        end_v = _approach(att_v, target, epoch_s)
        att_x += sign * 0.5 * (att_v + end_v) * epoch_s
        att_v = end_v
        horizon = (k + 1) * epoch_s
        for other, x0, vx in others:
            if other.lane_id != att_lane:
                continue
            if abs((x0 + vx * horizon) - att_x) < CLEARANCE:
                return False
    return True


def match_precondition(spec: TriggerSpec, world, epoch_s: float,
                       exclude=()) -> int | None:
    """First non-ego vehicle (ascending id) satisfying the earliest-step atoms
    with free space to execute the command sequence, or None."""
    if world.ego is None:
        return None
    ego_state = world.trigger_features(world.ego)
    atoms = earliest_atoms(spec)
    if not atoms:
        return None
    for veh in sorted(world.vehicles, key=lambda v: v.vid):
        if veh.role == "ego" or veh.crashed or veh.vid in exclude:
            continue
        if world.attacker_active(veh.vid):
            continue
        pair = (ego_state, world.trigger_features(veh))
        history = [pair] * spec.window
        if not all(_eval_atom(a, history, spec.window) for a in atoms):
            continue
        if xi_feasible(spec, world, veh, epoch_s):
            return veh.vid
    return None
