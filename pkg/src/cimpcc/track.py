"""Racetrack centerline geometry and curvature processing.

Loads a closed centerline from CSV, computes the discrete curvature of the
point sequence, smooths it with a circular moving-average filter, normalizes
it to [0, 1], and provides arc-length sampling plus point-to-centerline
projection. All downstream planning consumes the track through these
structures; they are immutable after construction and safe to share.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTrack,
    DimensionMismatch,
    InvalidWindow,
    NumericalDegeneracy,
    ParseError,
)

TRACK_CSV_HEADER = "x_m,y_m,w_left_m,w_right_m"

MIN_POINTS = 8
MIN_SEGMENT_LENGTH = 1e-9

# Window half-width (in points) for hint-guided projection.
PROJECTION_SEARCH_WINDOW = 20


def wrap_to_pi(angle):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return np.pi - np.mod(np.pi - angle, 2.0 * np.pi)


@dataclass(frozen=True)
class TrackPoint:
    """One centerline vertex with lateral corridor half-widths."""

    x: float
    y: float
    half_width_left: float
    half_width_right: float


@dataclass(frozen=True)
class Centerline:
    """Closed centerline: vertex sequence plus its arc-length table.

    ``arc_lengths[i]`` is the cumulative distance from point 0 to point i;
    ``total_length`` includes the closing segment back to point 0.
    """

    points: tuple[TrackPoint, ...]
    arc_lengths: np.ndarray
    total_length: float
    closed: bool = True
    # Derived arrays, filled in __post_init__.
    xs: np.ndarray = field(repr=False, default=None)
    ys: np.ndarray = field(repr=False, default=None)
    hw_left: np.ndarray = field(repr=False, default=None)
    hw_right: np.ndarray = field(repr=False, default=None)
    seg_lengths: np.ndarray = field(repr=False, default=None)
    seg_headings: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        xs = np.array([p.x for p in self.points], dtype=float)
        ys = np.array([p.y for p in self.points], dtype=float)
        hwl = np.array([p.half_width_left for p in self.points], dtype=float)
        hwr = np.array([p.half_width_right for p in self.points], dtype=float)
        dx = np.roll(xs, -1) - xs
        dy = np.roll(ys, -1) - ys
        seg_len = np.hypot(dx, dy)
        headings = wrap_to_pi(np.arctan2(dy, dx))
        for name, arr in (
            ("xs", xs),
            ("ys", ys),
            ("hw_left", hwl),
            ("hw_right", hwr),
            ("seg_lengths", seg_len),
            ("seg_headings", headings),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self.arc_lengths.setflags(write=False)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class CurvatureProfile:
    """Raw, smoothed, and min-max-normalized curvature of a centerline."""

    raw: np.ndarray
    smoothed: np.ndarray
    normalized: np.ndarray
    window: int
    k_min: float
    k_max: float

    def __post_init__(self):
        for arr in (self.raw, self.smoothed, self.normalized):
            arr.setflags(write=False)


@dataclass(frozen=True)
class PoseSample:
    """Interpolated centerline pose at an arc-length position."""

    x: float
    y: float
    heading: float
    nsc: float
    s: float


def _build_centerline(xs, ys, hwl, hwr):
    n = len(xs)
    if n < MIN_POINTS:
        raise DegenerateTrack(f"centerline needs at least {MIN_POINTS} points, got {n}")
    if np.any(hwl <= 0.0) or np.any(hwr <= 0.0):
        bad = int(np.argmax((hwl <= 0.0) | (hwr <= 0.0)))
        raise DegenerateTrack(f"nonpositive half-width at point {bad}")
    dx = np.roll(xs, -1) - xs
    dy = np.roll(ys, -1) - ys
    seg = np.hypot(dx, dy)
    if np.any(seg <= MIN_SEGMENT_LENGTH):
        bad = int(np.argmax(seg <= MIN_SEGMENT_LENGTH))
        raise DegenerateTrack(f"duplicate consecutive points at index {bad}")
    arc = np.concatenate(([0.0], np.cumsum(seg[:-1])))
    total = float(arc[-1] + seg[-1])
    pts = tuple(
        TrackPoint(float(x), float(y), float(l), float(r))
        for x, y, l, r in zip(xs, ys, hwl, hwr)
    )
    return Centerline(points=pts, arc_lengths=arc, total_length=total)


def _resample_uniform(xs, ys, hwl, hwr, spacing):
    """Re-grid the closed polyline to (near-)uniform arc-length spacing."""
    dx = np.roll(xs, -1) - xs
    dy = np.roll(ys, -1) - ys
    seg = np.hypot(dx, dy)
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    n_new = max(MIN_POINTS, int(round(total / spacing)))
    s_new = np.arange(n_new) * (total / n_new)
    # Append the wrap point so np.interp covers the closing segment.
    nodes = arc
    xi = np.interp(s_new, nodes, np.append(xs, xs[0]))
    yi = np.interp(s_new, nodes, np.append(ys, ys[0]))
    li = np.interp(s_new, nodes, np.append(hwl, hwl[0]))
    ri = np.interp(s_new, nodes, np.append(hwr, hwr[0]))
    return xi, yi, li, ri


def centerline_from_arrays(xs, ys, hw_left, hw_right) -> Centerline:
    """Build a closed centerline from coordinate arrays, with validation."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    hw_left = np.broadcast_to(np.asarray(hw_left, dtype=float), xs.shape).copy()
    hw_right = np.broadcast_to(np.asarray(hw_right, dtype=float), xs.shape).copy()
    return _build_centerline(xs, ys, hw_left, hw_right)


def load_centerline(source, resample_spacing=None):
    """Parse track CSV content into a closed :class:`Centerline`.

    ``source`` is the file content (str) or an open text stream. The format
    is one ``x_m,y_m,w_left_m,w_right_m`` header line followed by data rows;
    ``#`` lines are comments, and the last row must not repeat the first
    (closure is implicit). With ``resample_spacing`` set, the polyline is
    re-gridded to uniform spacing before use, which makes the curvature
    filter window width interpretable in meters.

    Raises ``ParseError`` for malformed content and ``DegenerateTrack`` for
    geometrically unusable input.
    """
    if isinstance(source, io.TextIOBase):
        text = source.read()
    else:
        text = source
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not header_seen:
            if stripped.replace(" ", "") != TRACK_CSV_HEADER:
                raise ParseError(
                    f"line {lineno}: expected header '{TRACK_CSV_HEADER}', got '{stripped}'"
                )
            header_seen = True
            continue
        fields = stripped.split(",")
        if len(fields) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field in '{stripped}'") from None
    if not header_seen:
        raise ParseError("empty track file (no header line)")
    if not rows:
        raise ParseError("track file has a header but no data rows")
    data = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ParseError("track file contains non-finite values")
    xs, ys, hwl, hwr = data.T
    if len(xs) >= 2 and np.hypot(xs[-1] - xs[0], ys[-1] - ys[0]) <= MIN_SEGMENT_LENGTH:
        raise DegenerateTrack("last row repeats the first; closure is implicit")
    if resample_spacing is not None:
        if resample_spacing <= 0:
            raise ParseError("resample spacing must be positive")
        # Validate the raw polyline before interpolating over it.
        _build_centerline(xs, ys, hwl, hwr)
        xs, ys, hwl, hwr = _resample_uniform(xs, ys, hwl, hwr, resample_spacing)
    return _build_centerline(xs, ys, hwl, hwr)


def read_track_csv(path, resample_spacing=None):
    """Load a track CSV from disk. See :func:`load_centerline`."""
    if not os.path.exists(path):
        raise ParseError(f"track file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return load_centerline(fh.read(), resample_spacing=resample_spacing)


def compute_raw_curvature(cl: Centerline) -> np.ndarray:
    """Discrete curvature magnitude at every centerline point.

    First and second differences wrap circularly, consistent with a closed
    circuit, so no spurious end-point spikes appear.
    """
    xs, ys = cl.xs, cl.ys
    dx = xs - np.roll(xs, 1)
    dy = ys - np.roll(ys, 1)
    ddx = dx - np.roll(dx, 1)
    ddy = dy - np.roll(dy, 1)
    denom_sq = dx * dx + dy * dy
    if np.any(denom_sq < 1e-12):
        bad = int(np.argmax(denom_sq < 1e-12))
        raise NumericalDegeneracy(f"near-zero segment at point {bad}")
    return np.abs(dx * ddy - ddx * dy) / denom_sq**1.5


def smooth_curvature(raw, window: int) -> np.ndarray:
    """Centered moving average with circular wrap at both ends."""
    raw = np.asarray(raw, dtype=float)
    n = len(raw)
    if window % 2 == 0 or window < 1 or window > n:
        raise InvalidWindow(f"window must be odd and in [1, {n}], got {window}")
    if window == 1:
        return raw.copy()
    half = window // 2
    padded = np.concatenate([raw[-half:], raw, raw[:half]])
    return np.convolve(padded, np.full(window, 1.0 / window), mode="valid")


def normalize_curvature(smoothed) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant profile maps to all zeros.

    The all-zeros degenerate case treats a constant-curvature track as
    having no sharp sections, so the velocity mapping stays aggressive.
    """
    smoothed = np.asarray(smoothed, dtype=float)
    k_min = float(smoothed.min())
    k_max = float(smoothed.max())
    span = k_max - k_min
    if span <= 1e-12 * max(1.0, abs(k_max)):
        return np.zeros_like(smoothed)
    return (smoothed - k_min) / span


def build_curvature_profile(cl: Centerline, window: int = 9) -> CurvatureProfile:
    """Run the raw -> smoothed -> normalized curvature pipeline."""
    raw = compute_raw_curvature(cl)
    smoothed = smooth_curvature(raw, window)
    normalized = normalize_curvature(smoothed)
    return CurvatureProfile(
        raw=raw,
        smoothed=smoothed,
        normalized=normalized,
        window=window,
        k_min=float(smoothed.min()),
        k_max=float(smoothed.max()),
    )


def _locate_segment(cl: Centerline, s):
    """Wrap s and return (segment index, fraction along segment, wrapped s)."""
    s_wrapped = np.mod(s, cl.total_length)
    idx = np.searchsorted(cl.arc_lengths, s_wrapped, side="right") - 1
    idx = np.clip(idx, 0, len(cl) - 1)
    frac = (s_wrapped - cl.arc_lengths[idx]) / cl.seg_lengths[idx]
    return idx, frac, s_wrapped


def sample_at_s(cl: Centerline, profile: CurvatureProfile, s: float) -> PoseSample:
    """Interpolated pose + normalized curvature at arc-length ``s``.

    Position and NSC are linear between the bracketing points; heading is
    the direction of the bracketing segment. ``s`` wraps modulo the total
    length, so the map is periodic.
    """
    idx, frac, s_wrapped = _locate_segment(cl, float(s))
    idx = int(idx)
    frac = float(frac)
    nxt = (idx + 1) % len(cl)
    x = cl.xs[idx] + frac * (cl.xs[nxt] - cl.xs[idx])
    y = cl.ys[idx] + frac * (cl.ys[nxt] - cl.ys[idx])
    nsc = profile.normalized[idx] + frac * (profile.normalized[nxt] - profile.normalized[idx])
    return PoseSample(
        x=float(x),
        y=float(y),
        heading=float(cl.seg_headings[idx]),
        nsc=float(nsc),
        s=float(s_wrapped),
    )


def project(cl: Centerline, x: float, y: float, s_hint: float | None = None):
    """Arc length and index of the centerline point nearest to (x, y).

    With ``s_hint`` the scan is restricted to +-PROJECTION_SEARCH_WINDOW
    points around the hinted index; if the windowed minimum falls on the
    window edge the full scan is used instead. Ties break to the lowest
    index.
    """
    n = len(cl)
    if s_hint is not None and n > 2 * PROJECTION_SEARCH_WINDOW + 1:
        hint_idx, _, _ = _locate_segment(cl, float(s_hint))
        offsets = np.arange(-PROJECTION_SEARCH_WINDOW, PROJECTION_SEARCH_WINDOW + 1)
        candidates = (int(hint_idx) + offsets) % n
        d_sq = (cl.xs[candidates] - x) ** 2 + (cl.ys[candidates] - y) ** 2
        best = int(np.argmin(d_sq))
        if 0 < best < len(candidates) - 1:
            idx = int(candidates[best])
            return float(cl.arc_lengths[idx]), idx
    d_sq = (cl.xs - x) ** 2 + (cl.ys - y) ** 2
    idx = int(np.argmin(d_sq))
    return float(cl.arc_lengths[idx]), idx


class TrackView:
    """Read-only bundle of a centerline and its curvature profile.

    Adds the vectorized lookups the planner needs in its inner loop:
    reference poses for a whole horizon of arc-length positions, corridor
    half-widths, and the blending-coefficient lookup at the vehicle's
    nearest centerline point.
    """

    def __init__(self, centerline: Centerline, profile: CurvatureProfile):
        if len(profile.raw) != len(centerline):
            raise DimensionMismatch(
                f"profile length {len(profile.raw)} != centerline length {len(centerline)}"
            )
        self.centerline = centerline
        self.profile = profile

    @property
    def total_length(self) -> float:
        return self.centerline.total_length

    def sample(self, s: float) -> PoseSample:
        return sample_at_s(self.centerline, self.profile, s)

    def project(self, x: float, y: float, s_hint: float | None = None):
        return project(self.centerline, x, y, s_hint)

    def nsc_at_nearest_point(self, x: float, y: float, s_hint: float | None = None) -> float:
        """NSC of the centerline point the vehicle is currently closest to."""
        _, idx = self.project(x, y, s_hint)
        return float(self.profile.normalized[idx])

    def ref_pose_arrays(self, s):
        """Vectorized reference pose (x_r, y_r, theta_r) at arc lengths ``s``.

        Also returns d(x_r)/ds and d(y_r)/ds (the segment tangent), which
        the planner's analytic gradients need.
        """
        cl = self.centerline
        idx, frac, _ = _locate_segment(cl, np.asarray(s, dtype=float))
        nxt = (idx + 1) % len(cl)
        tx = (cl.xs[nxt] - cl.xs[idx]) / cl.seg_lengths[idx]
        ty = (cl.ys[nxt] - cl.ys[idx]) / cl.seg_lengths[idx]
        xr = cl.xs[idx] + frac * (cl.xs[nxt] - cl.xs[idx])
        yr = cl.ys[idx] + frac * (cl.ys[nxt] - cl.ys[idx])
        return xr, yr, cl.seg_headings[idx], tx, ty

    def half_widths(self, s):
        """Linearly interpolated corridor half-widths and their d/ds slopes."""
        cl = self.centerline
        idx, frac, _ = _locate_segment(cl, np.asarray(s, dtype=float))
        nxt = (idx + 1) % len(cl)
        dl = (cl.hw_left[nxt] - cl.hw_left[idx]) / cl.seg_lengths[idx]
        dr = (cl.hw_right[nxt] - cl.hw_right[idx]) / cl.seg_lengths[idx]
        left = cl.hw_left[idx] + frac * (cl.hw_left[nxt] - cl.hw_left[idx])
        right = cl.hw_right[idx] + frac * (cl.hw_right[nxt] - cl.hw_right[idx])
        return left, right, dl, dr
