"""Standalone SVG rendering of trajectory traces: one polyline per vehicle in
(time, longitudinal position) space, stroke colored by the vehicle's mean
speed, crash markers on top."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

# fixed five-stop blue -> red map over the speed range
COLOR_STOPS = [
    (0.00, (40, 70, 200)),
    (0.25, (60, 160, 220)),
    (0.50, (90, 200, 120)),
    (0.75, (235, 180, 60)),
    (1.00, (220, 50, 40)),
]


def speed_color(v: float, v_lo: float, v_hi: float) -> str:
    span = max(v_hi - v_lo, 1e-9)
    f = min(max((v - v_lo) / span, 0.0), 1.0)
    for (f0, c0), (f1, c1) in zip(COLOR_STOPS, COLOR_STOPS[1:]):
        if f <= f1:
            w = (f - f0) / (f1 - f0)
            rgb = tuple(round(a + w * (b - a)) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    return "#%02x%02x%02x" % COLOR_STOPS[-1][1]


def parse_trace_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError("trace is empty")
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        row = dict(zip(header, parts))
        rows.append({
            "t": float(row["t"]), "vehicle_id": int(row["vehicle_id"]),
            "role": row["role"], "x": float(row["x"]), "y": float(row["y"]),
            "v": float(row["v"]), "crashed": int(row["crashed"]),
        })
    return rows


def render_trajectories(rows, width: int = 900, height: int = 480,
                        speed_range: tuple[float, float] | None = None) -> str:
    """Rows as dicts with t, vehicle_id, role, x, v, crashed (see the trace
    CSV header). Returns a standalone SVG document string."""
    if isinstance(rows, str):
        rows = parse_trace_csv(rows)
    if not rows:
        raise ValueError("trace is empty")
    by_vid: dict[int, list] = {}
    for r in rows:
        by_vid.setdefault(r["vehicle_id"], []).append(r)
    t_lo = min(r["t"] for r in rows)
    t_hi = max(r["t"] for r in rows) or 1.0
    x_lo = min(r["x"] for r in rows)
    x_hi = max(r["x"] for r in rows)
    if x_hi - x_lo < 1e-9:
        x_hi = x_lo + 1.0
    if speed_range is None:
        speed_range = (min(r["v"] for r in rows), max(r["v"] for r in rows))
    pad = 40.0

    def sx(t):
        return pad + (t - t_lo) / max(t_hi - t_lo, 1e-9) * (width - 2 * pad)

    def sy(x):
        return height - pad - (x - x_lo) / (x_hi - x_lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>',
        f'<text x="{width / 2:.0f}" y="{height - 8}" font-size="12" '
        f'text-anchor="middle">time (s)</text>',
        f'<text x="14" y="{height / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2:.0f})">longitudinal position (m)</text>',
    ]
    crashes = []
    for vid in sorted(by_vid):
        pts = sorted(by_vid[vid], key=lambda r: r["t"])
        mean_v = sum(p["v"] for p in pts) / len(pts)
        color = speed_color(mean_v, *speed_range)
        coords = " ".join(f"{sx(p['t']):.2f},{sy(p['x']):.2f}" for p in pts)
        role = escape(pts[0]["role"])
        w = 2.5 if role == "ego" else 1.2
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="{w}">'
                     f'<title>vehicle {vid} ({role})</title></polyline>')
        for prev, cur in zip(pts, pts[1:]):
            if cur["crashed"] and not prev["crashed"]:
                crashes.append((cur["t"], cur["x"]))
                break
        else:
            if pts[0]["crashed"]:
                crashes.append((pts[0]["t"], pts[0]["x"]))
    for t, x in crashes:
        parts.append(f'<circle cx="{sx(t):.2f}" cy="{sy(x):.2f}" r="5" '
                     f'fill="none" stroke="#c00" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts)
