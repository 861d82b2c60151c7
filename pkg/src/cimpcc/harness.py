"""Closed-loop racing: planner against the simulated plant.

Runs timed multi-lap races, detects start-line crossings from the unwrapped
progress coordinate, aggregates per-lap statistics, and produces the
two-mode comparison report. The launch lap (standing start) is excluded
from statistics; lap boundaries are interpolated between control cycles so
lap times are not quantized to the control period.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCompletedLaps, OffTrack, ParseError, RaceAborted, SolverFailure
from .nlp import SolverSettings
from .planner import (
    MODE_CIMPCC,
    MODE_MPCC,
    HorizonConfig,
    Planner,
    PlannerWeights,
    contour_lag_errors,
)
from .track import TrackView
from .vehicle import ControlInput, Disturbance, VehicleParams, VehicleState, plant_step
from .velocity import MappingParams, VelocityBounds

TELEMETRY_HEADER = (
    "t_s,x_m,y_m,heading_rad,s_m,v_l_cmd,delta_cmd,v_p_cmd,"
    "xi_con_m,xi_lag_m,beta,solve_time_s,status"
)

# Commanded-speed times lap-time should land near the lap length; outside
# this band something is inconsistent in the telemetry.
CONSISTENCY_BAND = 0.15

MAX_CYCLES_PER_LAP = 4000


@dataclass
class CycleRecord:
    t: float
    state: VehicleState
    command: ControlInput
    xi_con: float
    xi_lag: float
    beta: float
    solve_time: float
    solver_status: str


@dataclass
class LapStats:
    lap_times: list[float] = field(default_factory=list)
    velocities: list[float] = field(default_factory=list)
    lap_time_max: float = float("nan")
    lap_time_min: float = float("nan")
    lap_time_mean: float = float("nan")
    velocity_max: float = float("nan")
    velocity_min: float = float("nan")
    velocity_mean: float = float("nan")
    consistency_ratio: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "lap_times": self.lap_times,
            "velocities": self.velocities,
            "lap_time_max": self.lap_time_max,
            "lap_time_min": self.lap_time_min,
            "lap_time_mean": self.lap_time_mean,
            "velocity_max": self.velocity_max,
            "velocity_min": self.velocity_min,
            "velocity_mean": self.velocity_mean,
            "consistency_ratio": self.consistency_ratio,
        }


@dataclass
class ComparisonReport:
    mpcc: LapStats
    cimpcc: LapStats
    lap_time_change_pct: float
    velocity_change_pct: float
    # Raw telemetry of both runs; not part of the serialized report.
    records_mpcc: list = field(default_factory=list, repr=False)
    records_cimpcc: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "mpcc": self.mpcc.to_dict(),
            "cimpcc": self.cimpcc.to_dict(),
            "lap_time_change_pct": self.lap_time_change_pct,
            "velocity_change_pct": self.velocity_change_pct,
            "lap_time_change_display": f"{self.lap_time_change_pct:+.1f}%",
            "velocity_change_display": f"{self.velocity_change_pct:+.1f}%",
        }


@dataclass
class RaceSetup:
    """Everything a race needs beyond the track itself.

    The solver default relaxes the wall-time budget: enforcing a real-time
    cutoff inside a deterministic simulation would make the trajectory
    depend on machine load. Solve times are still measured and reported
    against the real-time budget.
    """

    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    bounds: VelocityBounds = field(default_factory=VelocityBounds)
    mapping: MappingParams = field(default_factory=MappingParams)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    solver: SolverSettings = field(default_factory=lambda: SolverSettings(max_wall_time=1.0))
    weights_mpcc: PlannerWeights | None = None
    weights_cimpcc: PlannerWeights | None = None
    disturbance_std_v_l: float = 0.0
    disturbance_std_delta: float = 0.0

    def weights_for(self, mode: str) -> PlannerWeights:
        if mode == MODE_MPCC and self.weights_mpcc is not None:
            return self.weights_mpcc
        if mode == MODE_CIMPCC and self.weights_cimpcc is not None:
            return self.weights_cimpcc
        return PlannerWeights.for_mode(mode)


def detect_lap_completion(progress_history, total_length: float) -> np.ndarray:
    """Fractional sample indices where unwrapped progress crosses k*L.

    Lap k completes at the first sample with s >= k*total_length; the
    returned index interpolates linearly between the bracketing samples so
    callers can timestamp crossings below the sampling period. Transient
    progress decreases beyond 0.05 m violate the monotonicity contract.
    """
    s = np.asarray(progress_history, dtype=float)
    if len(s) == 0:
        return np.zeros(0)
    drops = np.diff(s)
    if len(drops) and float(np.min(drops, initial=0.0)) < -0.05:
        raise ValueError("progress history decreases by more than 0.05 m")
    boundaries = []
    k = 1
    while k * total_length <= s[-1]:
        target = k * total_length
        j = int(np.argmax(s >= target))
        if j == 0:
            frac_index = 0.0
        else:
            span = s[j] - s[j - 1]
            frac = (target - s[j - 1]) / span if span > 0 else 0.0
            frac_index = (j - 1) + frac
        boundaries.append(frac_index)
        k += 1
    return np.asarray(boundaries)


def _interp_time(records, frac_index: float) -> float:
    j = int(np.floor(frac_index))
    frac = frac_index - j
    if j + 1 >= len(records):
        return records[j].t
    return records[j].t + frac * (records[j + 1].t - records[j].t)


def compute_stats(records, lap_boundaries, track_length: float | None = None) -> LapStats:
    """Per-lap times and commanded-velocity means, with aggregates.

    ``lap_boundaries`` are fractional indices from
    :func:`detect_lap_completion`; the launch lap (start to the first
    crossing) carries no boundary delta and is therefore excluded.
    """
    if len(lap_boundaries) < 2:
        raise NoCompletedLaps(
            f"need at least two start-line crossings, got {len(lap_boundaries)}"
        )
    times = [_interp_time(records, b) for b in lap_boundaries]
    lap_times = [t1 - t0 for t0, t1 in zip(times, times[1:])]
    velocities = []
    for t0, t1 in zip(times, times[1:]):
        v = [r.command.v_l for r in records if t0 <= r.t < t1]
        velocities.append(float(np.mean(v)) if v else float("nan"))
    stats = LapStats(
        lap_times=lap_times,
        velocities=velocities,
        lap_time_max=float(np.max(lap_times)),
        lap_time_min=float(np.min(lap_times)),
        lap_time_mean=float(np.mean(lap_times)),
        velocity_max=float(np.max(velocities)),
        velocity_min=float(np.min(velocities)),
        velocity_mean=float(np.mean(velocities)),
    )
    if track_length is not None:
        stats.consistency_ratio = stats.velocity_mean * stats.lap_time_mean / track_length
        if abs(stats.consistency_ratio - 1.0) > CONSISTENCY_BAND:
            warnings.warn(
                f"mean velocity x mean lap time misses track length by "
                f"{(stats.consistency_ratio - 1.0) * 100:+.1f}%",
                stacklevel=2,
            )
    return stats


def run_race(view: TrackView, mode: str, setup: RaceSetup, n_laps: int, seed: int):
    """Drive ``n_laps`` counted laps (after a launch lap) in closed loop.

    Returns (records, stats). One solver failure per cycle falls back to
    the previous command; two consecutive failures, or leaving the
    corridor, abort the race with the partial telemetry attached to the
    ``RaceAborted`` exception.
    """
    total_length = view.total_length
    t_s = setup.horizon.t_s
    planner = Planner(
        mode,
        view,
        cfg=setup.horizon,
        weights=setup.weights_for(mode),
        bounds=setup.bounds,
        mapping=setup.mapping,
        vehicle=setup.vehicle,
        solver_settings=setup.solver,
    )
    rng = np.random.default_rng(seed)
    disturbance = None
    if setup.disturbance_std_v_l > 0.0 or setup.disturbance_std_delta > 0.0:
        disturbance = Disturbance(
            std_v_l=setup.disturbance_std_v_l,
            std_delta=setup.disturbance_std_delta,
            rng=rng,
        )

    start = view.sample(0.0)
    state = VehicleState(start.x, start.y, start.heading, 0.0)
    prev_command = ControlInput(0.0, 0.0, 0.0)
    target = (n_laps + 1) * total_length
    max_cycles = MAX_CYCLES_PER_LAP * (n_laps + 1)
    records: list[CycleRecord] = []
    failure_streak = 0

    def partial_stats():
        try:
            boundaries = detect_lap_completion([r.state.progress for r in records], total_length)
            return compute_stats(records, boundaries, track_length=total_length)
        except (NoCompletedLaps, ValueError):
            return LapStats()

    for cycle in range(max_cycles):
        t = cycle * t_s
        xi_con, xi_lag = contour_lag_errors(state, view)
        try:
            plan = planner.solve_step(state)
            command = plan.inputs[0]
            beta = plan.beta if plan.beta is not None else float("nan")
            solve_time = plan.solve_time
            status = plan.solver_status
            failure_streak = 0
        except SolverFailure as exc:
            failure_streak += 1
            if failure_streak >= 2:
                records.append(
                    CycleRecord(t, state, prev_command, xi_con, xi_lag, float("nan"), float("nan"), "SolverFailure")
                )
                raise RaceAborted(
                    f"two consecutive solver failures at t={t:.2f} s: {exc}",
                    records=records,
                    stats=partial_stats(),
                ) from exc
            command = prev_command
            beta = float("nan")
            solve_time = float("nan")
            status = "SolverFailure"
        except OffTrack as exc:
            raise RaceAborted(
                f"vehicle left the corridor at t={t:.2f} s: {exc}",
                records=records,
                stats=partial_stats(),
            ) from exc
        records.append(
            CycleRecord(t, state, command, xi_con, xi_lag, beta, solve_time, status)
        )
        if state.progress >= target:
            break
        state = plant_step(state, command, setup.vehicle, t_s, disturbance)
        prev_command = command
    else:
        raise RaceAborted(
            f"progress stalled: {state.progress:.1f} m after {max_cycles} cycles",
            records=records,
            stats=partial_stats(),
        )

    if n_laps == 0:
        return records, LapStats()
    boundaries = detect_lap_completion([r.state.progress for r in records], total_length)
    stats = compute_stats(records, boundaries, track_length=total_length)
    return records, stats


def compare(view: TrackView, setup: RaceSetup, n_laps: int, seed: int) -> ComparisonReport:
    """Race both modes under identical conditions and report the changes.

    Lap-time change is (baseline - candidate) / baseline and velocity
    change is (candidate - baseline) / baseline, with the plain contouring
    mode as baseline, so positive numbers mean the curvature-integrated
    mode improved.
    """
    results = {}
    records = {}
    for mode in (MODE_MPCC, MODE_CIMPCC):
        try:
            records[mode], results[mode] = run_race(view, mode, setup, n_laps, seed)
        except RaceAborted as exc:
            exc.method = mode
            raise
    base = results[MODE_MPCC]
    cand = results[MODE_CIMPCC]
    return ComparisonReport(
        mpcc=base,
        cimpcc=cand,
        lap_time_change_pct=100.0 * (base.lap_time_mean - cand.lap_time_mean) / base.lap_time_mean,
        velocity_change_pct=100.0 * (cand.velocity_mean - base.velocity_mean) / base.velocity_mean,
        records_mpcc=records[MODE_MPCC],
        records_cimpcc=records[MODE_CIMPCC],
    )


def write_telemetry_csv(path, records, track_length: float):
    """Telemetry rows plus a leading comment carrying the track length,
    which lap detection needs when re-reading the file."""
    lines = [f"# track_length_m={track_length!r}", TELEMETRY_HEADER]
    for r in records:
        lines.append(
            ",".join(
                repr(float(v))
                for v in (
                    r.t,
                    r.state.x,
                    r.state.y,
                    r.state.heading,
                    r.state.progress,
                    r.command.v_l,
                    r.command.delta,
                    r.command.v_p,
                    r.xi_con,
                    r.xi_lag,
                    r.beta,
                    r.solve_time,
                )
            )
            + f",{r.solver_status}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_telemetry_csv(path):
    """Parse telemetry back into records; returns (records, track_length)."""
    records = []
    track_length = None
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if "track_length_m=" in stripped:
                try:
                    track_length = float(stripped.split("=", 1)[1])
                except ValueError:
                    raise ParseError(f"line {lineno}: bad track_length_m value") from None
            continue
        if not header_seen:
            if stripped != TELEMETRY_HEADER:
                raise ParseError(f"line {lineno}: unexpected telemetry header")
            header_seen = True
            continue
        fields = stripped.split(",")
        if len(fields) != 13:
            raise ParseError(f"line {lineno}: expected 13 fields, got {len(fields)}")
        try:
            vals = [float(v) for v in fields[:12]]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric telemetry field") from None
        records.append(
            CycleRecord(
                t=vals[0],
                state=VehicleState(vals[1], vals[2], vals[3], vals[4]),
                command=ControlInput(vals[5], vals[6], vals[7]),
                xi_con=vals[8],
                xi_lag=vals[9],
                beta=vals[10],
                solve_time=vals[11],
                solver_status=fields[12],
            )
        )
    if not header_seen or not records:
        raise ParseError("telemetry file is empty")
    return records, track_length


def stats_to_json(stats: LapStats) -> str:
    return json.dumps(stats.to_dict(), indent=2, sort_keys=True)


def comparison_to_json(report: ComparisonReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)
