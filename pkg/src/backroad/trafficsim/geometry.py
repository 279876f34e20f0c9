"""Lane geometry (straight segments and circular arcs) and rectangle overlap.

A lane maps a longitudinal coordinate s (metres along travel direction) and a
signed lateral offset to world (x, y). Lateral offset is positive toward
increasing lane index, so "right" in action terms. Circular lanes wrap s
modulo their circumference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LANE_WIDTH = 4.0


def wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@dataclass
class StraightLane:
    index: int
    origin: tuple[float, float]
    heading: float
    length: float
    width: float = LANE_WIDTH
    # vehicles running past the end continue on (successor_id, s offset on it)
    successor: tuple[int, float] | None = None
    wraps: bool = False

    def position(self, s: float, lateral: float = 0.0) -> tuple[float, float]:
        c, si = math.cos(self.heading), math.sin(self.heading)
        # lateral > 0 lies to the right of travel: rotate tangent by -90 deg
        return (self.origin[0] + s * c + lateral * si,
                self.origin[1] + s * si - lateral * c)

    def heading_at(self, s: float) -> float:
        return self.heading

    def local(self, x: float, y: float) -> tuple[float, float]:
        dx, dy = x - self.origin[0], y - self.origin[1]
        c, si = math.cos(self.heading), math.sin(self.heading)
        s = dx * c + dy * si
        lateral = dx * si - dy * c
        return s, lateral


@dataclass
class CircularLane:
    """Counter-clockwise full circle; s = 0 at angle ``phase``."""

    index: int
    center: tuple[float, float]
    radius: float
    phase: float = 0.0
    width: float = LANE_WIDTH
    successor: tuple[int, float] | None = None
    wraps: bool = True

    @property
    def length(self) -> float:
        return 2.0 * math.pi * self.radius

    def _angle(self, s: float) -> float:
        return self.phase + s / self.radius

    def position(self, s: float, lateral: float = 0.0) -> tuple[float, float]:
        a = self._angle(s)
        # travel ccw: right of travel points outward from the center
        r = self.radius + lateral
        return (self.center[0] + r * math.cos(a), self.center[1] + r * math.sin(a))

    def heading_at(self, s: float) -> float:
        return wrap_pi(self._angle(s) + math.pi / 2.0)

    def local(self, x: float, y: float) -> tuple[float, float]:
        dx, dy = x - self.center[0], y - self.center[1]
        a = math.atan2(dy, dx)
        s = ((a - self.phase) % (2.0 * math.pi)) * self.radius
        lateral = math.hypot(dx, dy) - self.radius
        return s, lateral


Lane = StraightLane | CircularLane


@dataclass
class Road:
    lanes: dict[int, Lane]
    # lateral neighbours reachable by a lane change, per lane index
    adjacency: dict[int, tuple[int | None, int | None]] = field(default_factory=dict)

    def lane(self, index: int) -> Lane:
        return self.lanes[index]

    def left_of(self, index: int) -> int | None:
        return self.adjacency.get(index, (None, None))[0]

    def right_of(self, index: int) -> int | None:
        return self.adjacency.get(index, (None, None))[1]

    def closest_lane(self, x: float, y: float, candidates=None) -> int:
        best, best_d = None, math.inf
        for idx in (candidates if candidates is not None else self.lanes):
            _, lat = self.lanes[idx].local(x, y)
            if abs(lat) < best_d:
                best, best_d = idx, abs(lat)
        return best


def rect_corners(cx: float, cy: float, heading: float, length: float, width: float):
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = length / 2.0, width / 2.0
    return [
        (cx + hl * c - hw * s, cy + hl * s + hw * c),
        (cx + hl * c + hw * s, cy + hl * s - hw * c),
        (cx - hl * c + hw * s, cy - hl * s - hw * c),
        (cx - hl * c - hw * s, cy - hl * s + hw * c),
    ]


def rects_overlap(r1, r2) -> bool:
    """Separating-axis test for two convex quadrilaterals."""
    for rect_a, rect_b in ((r1, r2), (r2, r1)):
        for i in range(4):
            x1, y1 = rect_a[i]
            x2, y2 = rect_a[(i + 1) % 4]
            nx, ny = y2 - y1, x1 - x2  # edge normal
            amin = amax = rect_a[0][0] * nx + rect_a[0][1] * ny
            for px, py in rect_a[1:]:
                v = px * nx + py * ny
                if v < amin:
                    amin = v
                elif v > amax:
                    amax = v
            bmin = bmax = rect_b[0][0] * nx + rect_b[0][1] * ny
            for px, py in rect_b[1:]:
                v = px * nx + py * ny
                if v < bmin:
                    bmin = v
                elif v > bmax:
                    bmax = v
            if amax < bmin or bmax < amin:
                return False
    return True
