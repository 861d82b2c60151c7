"""Command-line front end.

Subcommands: ``process-track`` (offline curvature pipeline), ``race`` (one
closed-loop run), ``compare`` (both planner modes under identical
conditions), and ``report`` (lap table and solve-time percentiles from a
telemetry file). Exit codes: 0 success, 2 configuration or parse problem,
3 aborted race.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness
from .config import echo_config, load_config, load_track
from .errors import CimpccError, ConfigurationError, ParseError, RaceAborted
from .planner import MODE_CIMPCC, MODE_MPCC
from .track import TrackView, build_curvature_profile

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORTED = 3


def cmd_process_track(args) -> int:
    spacing = args.spacing if args.spacing and args.spacing > 0 else None
    try:
        cl = load_track(args.track, base_dir=os.getcwd(), resample_spacing=spacing)
        profile = build_curvature_profile(cl, window=args.window)
    except CimpccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "curvature.csv")
    lines = ["index,s_m,x_m,y_m,kappa_raw,kappa_smooth,kappa_nsc"]
    for i in range(len(cl)):
        row = (
            cl.arc_lengths[i],
            cl.xs[i],
            cl.ys[i],
            profile.raw[i],
            profile.smoothed[i],
            profile.normalized[i],
        )
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {out_path} ({len(cl)} points)")
    print(f"raw curvature: min {profile.raw.min():.6g} 1/m, max {profile.raw.max():.6g} 1/m")
    return EXIT_OK


def _prepare_run(config_path):
    cfg = load_config(config_path)
    track = cfg.load_track()
    view = TrackView(track, build_curvature_profile(track, window=cfg.maf_window))
    setup = cfg.build_setup()
    os.makedirs(cfg.output_dir, exist_ok=True)
    echo_config(cfg, os.path.join(cfg.output_dir, "resolved_config.toml"))
    return cfg, view, setup


def cmd_race(args) -> int:
    try:
        cfg, view, setup = _prepare_run(args.config)
        if cfg.mode not in (MODE_MPCC, MODE_CIMPCC):
            raise ConfigurationError(
                f"race needs run.mode of mpcc or cimpcc, got {cfg.mode!r}; use the compare command"
            )
    except CimpccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    telemetry_path = os.path.join(cfg.output_dir, "telemetry.csv")
    try:
        records, stats = harness.run_race(view, cfg.mode, setup, cfg.n_laps, cfg.seed)
    except RaceAborted as exc:
        harness.write_telemetry_csv(telemetry_path, exc.records, view.total_length)
        print(f"race aborted: {exc.reason}", file=sys.stderr)
        print(f"partial telemetry in {telemetry_path}", file=sys.stderr)
        return EXIT_ABORTED
    harness.write_telemetry_csv(telemetry_path, records, view.total_length)
    stats_path = os.path.join(cfg.output_dir, "stats.json")
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write(harness.stats_to_json(stats) + "\n")
    print(f"completed {len(stats.lap_times)} laps; outputs in {cfg.output_dir}")
    if stats.lap_times:
        print(
            f"lap time mean {stats.lap_time_mean:.3f} s, "
            f"mean commanded velocity {stats.velocity_mean:.3f} m/s"
        )
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        cfg, view, setup = _prepare_run(args.config)
        if cfg.mode != "compare":
            raise ConfigurationError(f"compare needs run.mode = 'compare', got {cfg.mode!r}")
    except CimpccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.self_compare:
            # Debug path: the candidate mode raced against itself must
            # report exactly 0.0% changes.
            records, stats = harness.run_race(view, MODE_CIMPCC, setup, cfg.n_laps, cfg.seed)
            report = harness.ComparisonReport(
                mpcc=stats,
                cimpcc=stats,
                lap_time_change_pct=0.0,
                velocity_change_pct=0.0,
                records_mpcc=records,
                records_cimpcc=records,
            )
        else:
            report = harness.compare(view, setup, cfg.n_laps, cfg.seed)
    except RaceAborted as exc:
        print(f"race aborted in {exc.method or 'unknown'} mode: {exc.reason}", file=sys.stderr)
        return EXIT_ABORTED
    harness.write_telemetry_csv(
        os.path.join(cfg.output_dir, "telemetry_mpcc.csv"), report.records_mpcc, view.total_length
    )
    harness.write_telemetry_csv(
        os.path.join(cfg.output_dir, "telemetry_cimpcc.csv"),
        report.records_cimpcc,
        view.total_length,
    )
    comparison_path = os.path.join(cfg.output_dir, "comparison.json")
    with open(comparison_path, "w", encoding="utf-8") as fh:
        fh.write(harness.comparison_to_json(report) + "\n")
    print(f"wrote {comparison_path}")
    print(
        f"lap time: mpcc {report.mpcc.lap_time_mean:.3f} s vs cimpcc "
        f"{report.cimpcc.lap_time_mean:.3f} s ({report.lap_time_change_pct:+.1f}%)"
    )
    print(
        f"velocity: mpcc {report.mpcc.velocity_mean:.3f} m/s vs cimpcc "
        f"{report.cimpcc.velocity_mean:.3f} m/s ({report.velocity_change_pct:+.1f}%)"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        records, track_length = harness.read_telemetry_csv(args.telemetry)
    except (CimpccError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{len(records)} cycles spanning {records[-1].t - records[0].t:.2f} s")
    if track_length is not None:
        progress = [r.state.progress for r in records]
        boundaries = harness.detect_lap_completion(progress, track_length)
        if len(boundaries) >= 2:
            stats = harness.compute_stats(records, boundaries, track_length=track_length)
            print("lap  time_s  mean_v_l_mps")
            for i, (lt, v) in enumerate(zip(stats.lap_times, stats.velocities), start=1):
                print(f"{i:>3}  {lt:.12g}  {v:.12g}")
            print(f"mean lap time {stats.lap_time_mean:.12g} s")
            print(f"mean commanded velocity {stats.velocity_mean:.12g} m/s")
        else:
            print("no completed laps in telemetry")
    solve_times = np.array([r.solve_time for r in records])
    solve_times = solve_times[np.isfinite(solve_times)]
    if len(solve_times):
        p50, p95 = np.percentile(solve_times, [50, 95])
        print(
            f"solve time p50 {p50 * 1e3:.2f} ms, p95 {p95 * 1e3:.2f} ms, "
            f"max {solve_times.max() * 1e3:.2f} ms"
        )
        if args.budget is not None:
            frac = float(np.mean(solve_times < args.budget))
            print(f"{frac * 100:.1f}% of solves under {args.budget * 1e3:.1f} ms budget")
        if args.paper_ref:
            frac_ref = float(np.mean(solve_times < 0.0206))
            print(
                f"reference benchmark: 95% of solves < 0.0206 s; "
                f"this run: {frac_ref * 100:.1f}% < 0.0206 s"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimpcc",
        description="Racing trajectory planning: contouring control with curvature-integrated velocity objectives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_track = sub.add_parser("process-track", help="compute the curvature profile of a track")
    p_track.add_argument("--track", required=True, help="track CSV path or builtin:<name>")
    p_track.add_argument("--window", type=int, default=9, help="moving-average window (odd)")
    p_track.add_argument(
        "--spacing", type=float, default=0.0, help="resample spacing in meters (0 = off)"
    )
    p_track.add_argument("--out", default=".", help="output directory")
    p_track.set_defaults(func=cmd_process_track)

    p_race = sub.add_parser("race", help="run one closed-loop race")
    p_race.add_argument("--config", required=True, help="TOML run configuration")
    p_race.set_defaults(func=cmd_race)

    p_cmp = sub.add_parser("compare", help="race both planner modes and compare")
    p_cmp.add_argument("--config", required=True, help="TOML run configuration")
    p_cmp.add_argument(
        "--self-compare",
        action="store_true",
        help="debug: compare one mode against itself (all changes 0.0%%)",
    )
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("report", help="summarize a telemetry file")
    p_rep.add_argument("--telemetry", required=True, help="telemetry CSV path")
    p_rep.add_argument("--budget", type=float, default=None, help="solve-time budget in seconds")
    p_rep.add_argument(
        "--paper-ref",
        action="store_true",
        help="print the published real-time reference line",
    )
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
