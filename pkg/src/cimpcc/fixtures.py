"""Synthetic track generators for benchmarks and tests.

Tracks are assembled from exact line/arc segments and sampled on a uniform
arc-length grid, so the generated polylines close exactly and carry no
resampling artifacts. The stadium-chicane circuit is the desk-scale
benchmark track shipped with the package (two long straights, two tight
U-complexes, and an S-chicane: four sharp-curvature zones on a ~45 m lap).
"""

from __future__ import annotations

import math

import numpy as np

from .track import Centerline, centerline_from_arrays


def _sample_path(segments, spacing, start=(0.0, 0.0, 0.0)):
    """Sample ('line', length) / ('arc', radius, angle) segments uniformly.

    angle > 0 turns left. Returns points on a uniform grid over [0, total),
    excluding the duplicate endpoint, so a closed design yields a clean
    implicitly-closed polyline.
    """
    poses = [start]
    lengths = []
    for seg in segments:
        x, y, th = poses[-1]
        if seg[0] == "line":
            length = seg[1]
            poses.append((x + length * math.cos(th), y + length * math.sin(th), th))
        elif seg[0] == "arc":
            radius, angle = seg[1], seg[2]
            length = abs(radius * angle)
            sign = 1.0 if angle >= 0 else -1.0
            cx = x - sign * radius * math.sin(th)
            cy = y + sign * radius * math.cos(th)
            th_new = th + angle
            poses.append(
                (
                    cx + sign * radius * math.sin(th_new),
                    cy - sign * radius * math.cos(th_new),
                    th_new,
                )
            )
        else:
            raise ValueError(f"unknown segment kind {seg[0]!r}")
        lengths.append(length)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    total = cum[-1]
    n = int(round(total / spacing))
    s_grid = np.arange(n) * (total / n)
    xs = np.empty(n)
    ys = np.empty(n)
    seg_idx = np.clip(np.searchsorted(cum, s_grid, side="right") - 1, 0, len(segments) - 1)
    for j, (s, i) in enumerate(zip(s_grid, seg_idx)):
        x, y, th = poses[i]
        ds = s - cum[i]
        seg = segments[i]
        if seg[0] == "line":
            xs[j] = x + ds * math.cos(th)
            ys[j] = y + ds * math.sin(th)
        else:
            radius, angle = seg[1], seg[2]
            sign = 1.0 if angle >= 0 else -1.0
            cx = x - sign * radius * math.sin(th)
            cy = y + sign * radius * math.cos(th)
            phi = th + sign * ds / radius
            xs[j] = cx + sign * radius * math.sin(phi)
            ys[j] = cy - sign * radius * math.cos(phi)
    end = poses[-1]
    if math.hypot(end[0] - start[0], end[1] - start[1]) > 1e-9:
        raise ValueError(f"path does not close: end {end[:2]} vs start {start[:2]}")
    return xs, ys


def _chicane_widget(r_c, phi, diag):
    """Heading-neutral S-jog: right, diagonal, left(2*phi), diagonal, right."""
    return [
        ("arc", r_c, -phi),
        ("line", diag),
        ("arc", r_c, 2 * phi),
        ("line", diag),
        ("arc", r_c, -phi),
    ]


def stadium_chicane_arrays(spacing=0.1, half_width=0.45):
    """Coordinates of the desk-scale stadium-chicane benchmark circuit."""
    r_u = 1.2
    r_c = 1.1
    phi = math.radians(50.0)
    diag = 0.8
    bottom = 16.0
    top_lead = 4.0

    # Trace the fixed part to find where the top section ends, then size the
    # trailing top straight so the final U-complex drops back onto y = 0
    # exactly one bottom-straight length behind the origin.
    widget = _chicane_widget(r_c, phi, diag)
    head = [("line", bottom), ("arc", r_u, math.pi), ("line", top_lead)] + widget
    x, y, th = 0.0, 0.0, 0.0
    for seg in head:
        if seg[0] == "line":
            x += seg[1] * math.cos(th)
            y += seg[1] * math.sin(th)
        else:
            radius, angle = seg[1], seg[2]
            sign = 1.0 if angle >= 0 else -1.0
            cx = x - sign * radius * math.sin(th)
            cy = y + sign * radius * math.cos(th)
            th += angle
            x = cx + sign * radius * math.sin(th)
            y = cy - sign * radius * math.cos(th)
    # After the widget: heading pi at (x, y), y > 2*r_u. The U-complex
    # (quarter, drop, quarter) has zero net x extent and drops y to 0.
    drop = y - 2.0 * r_u
    tail_x_target = -1.5  # land 1.5 m behind the origin
    top_trail = x - tail_x_target
    segments = (
        head
        + [("line", top_trail)]
        + [("arc", r_u, math.pi / 2), ("line", drop), ("arc", r_u, math.pi / 2)]
        + [("line", -tail_x_target)]
    )
    xs, ys = _sample_path(segments, spacing)
    return xs, ys, np.full_like(xs, half_width), np.full_like(xs, half_width)


def stadium_chicane(spacing=0.1, half_width=0.45) -> Centerline:
    return centerline_from_arrays(*stadium_chicane_arrays(spacing, half_width))


def straight_hairpin_arrays(spacing=0.1, half_width=0.45):
    """One long straight into a tight hairpin, closed by a gentle end curve.

    The hairpin (two quarter turns at sharp radius around a short back
    straight) is the max-curvature zone; the opposite end uses a much larger
    radius so its curvature normalizes well below 1.
    """
    r_sharp = 1.0
    r_gentle = 3.2
    straight = 14.0
    # y extents must match: 2*r_sharp + drop_sharp = 2*r_gentle + drop_gentle
    drop_gentle = 0.2
    drop_sharp = 2.0 * (r_gentle - r_sharp) + drop_gentle
    segments = [
        ("line", straight),
        ("arc", r_sharp, math.pi / 2),
        ("line", drop_sharp),
        ("arc", r_sharp, math.pi / 2),
        ("line", straight),
        ("arc", r_gentle, math.pi / 2),
        ("line", drop_gentle),
        ("arc", r_gentle, math.pi / 2),
    ]
    xs, ys = _sample_path(segments, spacing)
    return xs, ys, np.full_like(xs, half_width), np.full_like(xs, half_width)


def straight_hairpin(spacing=0.1, half_width=0.45) -> Centerline:
    return centerline_from_arrays(*straight_hairpin_arrays(spacing, half_width))


def circle_arrays(radius, n_points, half_width=0.5):
    """n_points placed exactly uniformly on a circle."""
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    xs = radius * np.cos(angles)
    ys = radius * np.sin(angles)
    return xs, ys, np.full_like(xs, half_width), np.full_like(xs, half_width)


def circle_track(radius, n_points, half_width=0.5) -> Centerline:
    return centerline_from_arrays(*circle_arrays(radius, n_points, half_width))


def to_csv_text(xs, ys, hw_left, hw_right) -> str:
    lines = ["x_m,y_m,w_left_m,w_right_m"]
    for x, y, l, r in zip(xs, ys, hw_left, hw_right):
        lines.append(f"{float(x)!r},{float(y)!r},{float(l)!r},{float(r)!r}")
    return "\n".join(lines) + "\n"


def write_csv(path, xs, ys, hw_left, hw_right):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_csv_text(xs, ys, hw_left, hw_right))
