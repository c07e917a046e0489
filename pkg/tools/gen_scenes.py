#!/usr/bin/env python3
"""Regenerate the shipped preset scenes.

Parking School: a 3 m x 3 m walled room with three construction boxes and
an open bay for the goal pose.  Driving School: a closed rounded-rectangle
lane (0.35 m wide) inside 4 m x 3 m bounds with a cross corridor through
the island, giving two T-junctions along the side straights.
"""

import json
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "desktwin", "scenes")


def parking_school() -> dict:
    return {
        "name": "parking_school",
        "bounds": [0.0, 0.0, 3.0, 3.0],
        "walls": [
            [0.0, 0.0, 3.0, 0.0],
            [3.0, 0.0, 3.0, 3.0],
            [3.0, 3.0, 0.0, 3.0],
            [0.0, 3.0, 0.0, 0.0],
        ],
        "obstacles": [
            {"center": [1.0, 2.45], "extents": [0.3, 0.3], "yaw": 0.25},
            {"center": [2.45, 2.4], "extents": [0.3, 0.3], "yaw": -0.15},
            {"center": [2.5, 0.7], "extents": [0.3, 0.3], "yaw": 0.1},
        ],
        "spawn": [0.8, 0.8, 0.0],
    }


def _rounded_rect(cx, cy, hw, hh, r, per_arc=6):
    """Closed CCW polyline of a rectangle with rounded corners."""
    pts = []
    corners = [
        (cx + hw - r, cy + hh - r, 0.0),
        (cx - hw + r, cy + hh - r, math.pi / 2),
        (cx - hw + r, cy - hh + r, math.pi),
        (cx + hw - r, cy - hh + r, 3 * math.pi / 2),
    ]
    for ax, ay, a0 in corners:
        for k in range(per_arc + 1):
            a = a0 + (math.pi / 2) * k / per_arc
            pts.append((ax + r * math.cos(a), ay + r * math.sin(a)))
    return pts


def _densify(pts, max_step=0.1):
    """Resample a closed polyline so no segment exceeds max_step."""
    out = []
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        d = math.hypot(b[0] - a[0], b[1] - a[1])
        steps = max(1, math.ceil(d / max_step))
        for k in range(steps):
            t = k / steps
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


def _polyline_segments(pts, closed=True):
    segs = []
    n = len(pts)
    last = n if closed else n - 1
    for i in range(last):
        a, b = pts[i], pts[(i + 1) % n]
        if math.hypot(b[0] - a[0], b[1] - a[1]) > 1e-9:
            segs.append([a[0], a[1], b[0], b[1]])
    return segs


def driving_school() -> dict:
    cx, cy = 2.0, 1.5
    lane = 0.35
    outer = _rounded_rect(cx, cy, 1.7, 1.2, 0.70)
    inner_pts = _rounded_rect(cx, cy, 1.7 - lane, 1.2 - lane, 0.35)
    center = _densify(
        _rounded_rect(cx, cy, 1.7 - lane / 2, 1.2 - lane / 2, 0.525, per_arc=10)
    )

    gap_lo, gap_hi = cy - lane / 2, cy + lane / 2
    inner_segs = []
    for seg in _polyline_segments(inner_pts):
        x1, y1, x2, y2 = seg
        # drop inner-wall pieces where the cross corridor meets the loop
        on_side = abs(x1 - x2) < 1e-9
        if on_side and min(y1, y2) >= gap_lo - 1e-9 and max(y1, y2) <= gap_hi + 1e-9:
            continue
        if on_side and (gap_lo < min(y1, y2) < gap_hi or gap_lo < max(y1, y2) < gap_hi):
            # split a straight piece at the gap edges
            xs = x1
            lo, hi = min(y1, y2), max(y1, y2)
            if lo < gap_lo:
                inner_segs.append([xs, lo, xs, gap_lo])
            if hi > gap_hi:
                inner_segs.append([xs, gap_hi, xs, hi])
            continue
        inner_segs.append(seg)

    ix_l, ix_r = cx - (1.7 - lane), cx + (1.7 - lane)
    corridor = [
        [ix_l, gap_lo, ix_r, gap_lo],
        [ix_l, gap_hi, ix_r, gap_hi],
    ]

    start = center[0]
    return {
        "name": "driving_school",
        "bounds": [0.0, 0.0, 4.0, 3.0],
        "walls": _polyline_segments(outer) + inner_segs + corridor,
        "obstacles": [],
        "centerline": [[round(x, 6), round(y, 6)] for x, y in center],
        "spawn": [round(start[0], 6), round(start[1], 6), 1.5707963267948966],
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    for scene in (parking_school(), driving_school()):
        path = os.path.join(OUT, scene["name"] + ".json")
        with open(path, "w") as f:
            json.dump(scene, f, indent=1)
            f.write("\n")
        print("wrote", path, f"({len(scene['walls'])} walls)")


if __name__ == "__main__":
    main()
