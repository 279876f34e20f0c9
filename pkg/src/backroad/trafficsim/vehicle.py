"""Vehicle state, kinematic bicycle integration, and the low-level controller.

The controller is two-stage proportional: a speed loop accel = K_V*(v_t - v)
clipped to +-ACCEL_LIMIT, and a lateral loop that converts a commanded
lateral speed K_LAT * offset into a heading reference, then a steering angle
through the bicycle geometry. Steering is clipped to +-pi/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Lane, wrap_pi

VEHICLE_LENGTH = 5.0
VEHICLE_WIDTH = 2.0

K_V = 1.0 / 0.6          # speed loop gain, 1/s
K_LAT = 1.0 / 3.0        # lateral offset -> lateral speed, 1/s
K_HEADING = 5.0          # heading error -> heading rate, 1/s
ACCEL_LIMIT = 5.0        # m/s^2, controlled vehicles
STEER_LIMIT = math.pi / 4.0
SPEED_FLOOR = 1.0        # m/s, avoids division blowups in the lateral loop


@dataclass
class Vehicle:
    vid: int
    role: str                 # ego | hdv | attacker
    lane_id: int              # lane the vehicle is assigned to / converging on
    x: float
    y: float
    speed: float
    heading: float
    target_speed: float       # controller setpoint; IDM free speed for HDVs
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH
    crashed: bool = False
    last_lane_change_t: float = -1e9

    def velocity(self) -> tuple[float, float]:
        return self.speed * math.cos(self.heading), self.speed * math.sin(self.heading)


def bicycle_step(veh: Vehicle, accel: float, steer: float, dt: float) -> None:
    """beta = arctan(tan(steer)/2); the heading turns at v*sin(beta)/(L/2)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    beta = math.atan(0.5 * math.tan(steer))
    course = veh.heading + beta
    veh.x += veh.speed * math.cos(course) * dt
    veh.y += veh.speed * math.sin(course) * dt
    veh.heading = wrap_pi(veh.heading + veh.speed * math.sin(beta) / (veh.length / 2.0) * dt)
    veh.speed = max(0.0, veh.speed + accel * dt)


def speed_control(veh: Vehicle, target: float) -> float:
    return max(-ACCEL_LIMIT, min(ACCEL_LIMIT, K_V * (target - veh.speed)))


def steer_control(veh: Vehicle, lane: Lane) -> float:
    s, lateral = lane.local(veh.x, veh.y)
    tangent = lane.heading_at(s)
    # A vehicle may track a lane against its nominal direction (overtaking via
    # the oncoming lane); steer along the tangent closest to its own heading.
    if abs(wrap_pi(tangent - veh.heading)) > math.pi / 2.0:
        tangent = wrap_pi(tangent + math.pi)
        lateral = -lateral
    v = max(veh.speed, SPEED_FLOOR)
    # commanded lateral speed -K_LAT * lateral (decay toward the center line);
    # positive lateral lies right of the tangent, so correcting means heading
    # left of it: psi_ref = tangent + asin(K_LAT * lateral / v)
    heading_ref = tangent + math.asin(max(-1.0, min(1.0, K_LAT * lateral / v)))
    rate_cmd = K_HEADING * wrap_pi(heading_ref - veh.heading)
    beta = math.asin(max(-1.0, min(1.0, rate_cmd * (veh.length / 2.0) / v)))
    steer = math.atan(2.0 * math.tan(beta))
    return max(-STEER_LIMIT, min(STEER_LIMIT, steer))
