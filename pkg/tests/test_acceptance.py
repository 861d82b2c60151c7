"""Acceptance suite: one test per release criterion.

Each test prints a PASS line once its criterion holds, so running
``pytest tests/test_acceptance.py -v -s`` yields a one-line-per-criterion
protocol. The five-lap comparison runs once per session and feeds the
performance, safety, and determinism criteria.
"""

import json
import math
import re
import time

import numpy as np
import pytest

from cimpcc import (
    ControlInput,
    HorizonConfig,
    MappingParams,
    Planner,
    PlannerWeights,
    VehicleParams,
    VehicleState,
    VelocityBounds,
    build_nlp,
    build_curvature_profile,
    compute_raw_curvature,
    eval_j_ci,
    eval_j_mpcc,
    map_nsc_to_beta,
    rk4_step,
)
from cimpcc import cli
from cimpcc.fixtures import circle_track
from cimpcc.harness import read_telemetry_csv
from cimpcc.nlp import NLPProblem, SolverSettings, SolverStatus, solve
from cimpcc.planner import MODE_CIMPCC, MODE_MPCC, NU, NX, stage_errors
from cimpcc.track import TrackView
from cimpcc.vehicle import plant_step


def ok(criterion, detail=""):
    print(f"PASS {criterion}" + (f": {detail}" if detail else ""))


@pytest.fixture(scope="session")
def compare_runs(tmp_path_factory):
    """Two identical five-lap comparison runs with the default tuning."""
    base = tmp_path_factory.mktemp("acceptance")
    outputs = []
    elapsed = []
    for name in ("a", "b"):
        config = base / f"run_{name}.toml"
        config.write_text(
            f'[run]\nmode = "compare"\nn_laps = 5\nseed = 2024\noutput_dir = "{name}"\n',
            encoding="utf-8",
        )
        t0 = time.perf_counter()
        assert cli.main(["compare", "--config", str(config)]) == 0
        elapsed.append(time.perf_counter() - t0)
        outputs.append(base / name)
    return outputs, elapsed


class TestCriterion1Curvature:
    def test_circle_curvature_oracle(self):
        t0 = time.perf_counter()
        for radius in (0.5, 1.0, 2.0, 5.0):
            cl = circle_track(radius=radius, n_points=200)
            kappa = compute_raw_curvature(cl)
            rel = np.max(np.abs(kappa - 1.0 / radius)) * radius
            assert rel < 0.01, f"R={radius}: relative error {rel:.2e}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        ok("criterion 1 (curvature oracle)", f"max relative error < 1%, {elapsed * 1e3:.0f} ms")


class TestCriterion2MappingEndpoints:
    def test_truncation_coefficients_exact(self):
        for alpha in (0.5, 1.0, 3.0, 8.0):
            params = MappingParams(alpha)
            assert abs(map_nsc_to_beta(0.0, params) - 1.0) <= 1e-15
            assert abs(map_nsc_to_beta(1.0, params) - math.exp(-alpha)) <= 1e-15
        ok("criterion 2 (mapping endpoints)", "g(0)=1 and g(1)=exp(-alpha) to 1e-15")


class TestCriterion3IntegratorOrder:
    def test_rk4_observed_order(self):
        t0 = time.perf_counter()
        params = VehicleParams()
        u = ControlInput(2.0, 0.3, 1.0)
        horizon = 1.6

        def integrate(dt):
            state = VehicleState(0.0, 0.0, 0.0, 0.0)
            for _ in range(int(round(horizon / dt))):
                state = rk4_step(state, u, params, dt)
            return state.as_array()

        ref = integrate(0.05 / 1000)
        errors = [
            float(np.linalg.norm(integrate(dt)[:2] - ref[:2])) for dt in (0.05, 0.025, 0.0125)
        ]
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        elapsed = time.perf_counter() - t0
        assert min(orders) >= 3.5
        assert elapsed < 5.0
        ok("criterion 3 (integrator order)", f"observed orders {orders[0]:.2f}, {orders[1]:.2f}")


class TestCriterion4SolverFixtures:
    def test_analytic_fixtures(self):
        t0 = time.perf_counter()

        def quadratic(center, lb, ub):
            center = np.asarray(center, dtype=float)
            n = len(center)
            return NLPProblem(
                dimension=n,
                objective=lambda z: (float((z - center) @ (z - center)), 2.0 * (z - center)),
                equality_constraints=lambda z: (np.zeros(0), np.zeros((0, n))),
                lower_bounds=np.asarray(lb, dtype=float),
                upper_bounds=np.asarray(ub, dtype=float),
                gn_hessian=lambda z: 2.0 * np.eye(n),
            )

        sol = solve(quadratic([1.0, -2.0], [-1e9, -1e9], [1e9, 1e9]), np.array([40.0, -7.0]))
        assert sol.status == SolverStatus.CONVERGED and sol.kkt_residual <= 1e-6
        assert np.allclose(sol.point, [1.0, -2.0], atol=1e-6)

        eq = NLPProblem(
            dimension=2,
            objective=lambda z: (
                float((z - [2.0, 3.0]) @ (z - [2.0, 3.0])),
                2.0 * (z - np.array([2.0, 3.0])),
            ),
            equality_constraints=lambda z: (
                np.array([z[0] + z[1] - 1.0]),
                np.array([[1.0, 1.0]]),
            ),
            lower_bounds=np.full(2, -1e9),
            upper_bounds=np.full(2, 1e9),
            gn_hessian=lambda z: 2.0 * np.eye(2),
        )
        sol = solve(eq, np.array([9.0, -9.0]))
        assert sol.status == SolverStatus.CONVERGED and sol.kkt_residual <= 1e-6
        assert np.allclose(sol.point, [0.0, 1.0], atol=1e-6)

        sol = solve(quadratic([5.0], [0.0], [1.0]), np.array([0.2]))
        assert sol.status == SolverStatus.CONVERGED and sol.kkt_residual <= 1e-6
        assert abs(sol.point[0] - 1.0) <= 1e-6

        elapsed = time.perf_counter() - t0
        assert elapsed < 1.0
        ok("criterion 4 (solver fixtures)", f"three analytic optima matched, {elapsed * 1e3:.0f} ms")


class TestCriterion5ObjectiveEquivalence:
    def test_nlp_objective_decomposes(self, stadium_view):
        from helpers import random_feasible_point, unpack_plan

        rng = np.random.default_rng(42)
        cfg = HorizonConfig()
        bounds = VelocityBounds()
        prev = ControlInput(1.0, 0.0, 1.0)
        zeta = VehicleState(0.1, 0.0, 0.0, 0.1)
        checked = 0
        for mode, beta in ((MODE_MPCC, 1.0), (MODE_CIMPCC, 0.37)):
            weights = PlannerWeights.for_mode(mode)
            problem = build_nlp(
                mode, zeta, beta, cfg, weights, bounds, stadium_view, prev_input=prev
            )
            for _ in range(50):
                z = random_feasible_point(stadium_view, cfg, rng, s_center=rng.uniform(0, 40))
                plan = unpack_plan(stadium_view, cfg, zeta, z, prev_input=prev)
                expected = eval_j_mpcc(plan, weights, cfg)
                if mode == MODE_CIMPCC:
                    expected += eval_j_ci(plan, beta, bounds, weights.r3)
                sig = z[cfg.n_p * NX + cfg.n_c * NU :]
                expected += weights.slack_penalty * float(sig @ sig)
                value = problem.objective(z)[0]
                assert abs(value - expected) <= 1e-10 * max(1.0, abs(expected))
                checked += 1
        ok("criterion 5 (objective equivalence)", f"{checked} feasible points at 1e-10")


class TestCriterion6DeskComparison:
    def test_lap_time_and_velocity_improvements(self, compare_runs):
        outputs, elapsed = compare_runs
        report = json.loads((outputs[0] / "comparison.json").read_text())
        mpcc_lap = report["mpcc"]["lap_time_mean"]
        ci_lap = report["cimpcc"]["lap_time_mean"]
        mpcc_v = report["mpcc"]["velocity_mean"]
        ci_v = report["cimpcc"]["velocity_mean"]
        assert len(report["mpcc"]["lap_times"]) == 5
        assert len(report["cimpcc"]["lap_times"]) == 5
        assert ci_lap <= 0.95 * mpcc_lap, f"{ci_lap:.3f} vs 0.95 * {mpcc_lap:.3f}"
        assert ci_v > mpcc_v
        assert elapsed[0] < 120.0
        ok(
            "criterion 6 (desk comparison)",
            f"lap {mpcc_lap:.3f} -> {ci_lap:.3f} s ({report['lap_time_change_pct']:+.1f}%), "
            f"velocity {mpcc_v:.3f} -> {ci_v:.3f} m/s ({report['velocity_change_pct']:+.1f}%), "
            f"{elapsed[0]:.0f} s runtime",
        )


class TestCriterion7Safety:
    def test_no_corridor_or_bound_violations(self, compare_runs, stadium_view):
        outputs, _ = compare_runs
        lower = np.array([-10.0, -0.35, -10.0])
        upper = np.array([10.0, 0.35, 10.0])
        cycles = 0
        for telemetry in ("telemetry_mpcc.csv", "telemetry_cimpcc.csv"):
            records, _ = read_telemetry_csv(outputs[0] / telemetry)
            for r in records:
                s_star, _ = stadium_view.project(r.state.x, r.state.y, s_hint=r.state.progress)
                hw_l, hw_r, _, _ = stadium_view.half_widths(np.array([s_star]))
                hw = float(hw_r[0]) if r.xi_con > 0 else float(hw_l[0])
                assert abs(r.xi_con) <= hw, f"corridor violation at t={r.t}"
                u = r.command.as_array()
                assert np.all(u >= lower - 1e-12) and np.all(u <= upper + 1e-12)
                cycles += 1
        ok("criterion 7 (safety)", f"zero violations over {cycles} cycles")


class TestCriterion8RealTime:
    def test_p95_solve_time_under_budget(self, compare_runs, capsys):
        outputs, _ = compare_runs
        worst = 0.0
        for telemetry in ("telemetry_mpcc.csv", "telemetry_cimpcc.csv"):
            rc = cli.main(["report", "--telemetry", str(outputs[0] / telemetry)])
            assert rc == 0
            out = capsys.readouterr().out
            match = re.search(r"p95 ([\d.]+) ms", out)
            assert match, "report did not print a p95 solve time"
            worst = max(worst, float(match.group(1)))
        assert worst < 50.0, f"p95 solve time {worst:.1f} ms"
        ok("criterion 8 (real-time surrogate)", f"worst p95 {worst:.2f} ms < 50 ms")


class TestCriterion9WarmStart:
    def test_warm_start_median_iterations(self, stadium_view):
        setup_solver = SolverSettings(max_wall_time=1.0)
        warm_planner = Planner(MODE_CIMPCC, stadium_view, solver_settings=setup_solver)
        params = VehicleParams()
        start = stadium_view.sample(0.0)
        state = VehicleState(start.x, start.y, start.heading, 0.0)
        warm_iters = []
        cold_iters = []
        cycle = 0
        while state.progress < stadium_view.total_length:
            prev_applied = warm_planner._prev_applied
            plan = warm_planner.solve_step(state)
            if cycle > 0:
                warm_iters.append(plan.iterations)
                cold = Planner(
                    MODE_CIMPCC,
                    stadium_view,
                    solver_settings=setup_solver,
                    initial_command=prev_applied,
                )
                cold_plan = cold.solve_step(state, prev_solution=None)
                cold_iters.append(cold_plan.iterations)
            state = plant_step(state, plan.inputs[0], params, warm_planner.cfg.t_s)
            cycle += 1
        warm_median = float(np.median(warm_iters))
        cold_median = float(np.median(cold_iters))
        assert warm_median <= cold_median
        ok(
            "criterion 9 (warm start)",
            f"median iterations warm {warm_median:.0f} <= cold {cold_median:.0f} "
            f"over {len(warm_iters)} cycles",
        )


class TestCriterion10Determinism:
    def test_identical_comparison_json(self, compare_runs):
        outputs, _ = compare_runs
        a = (outputs[0] / "comparison.json").read_bytes()
        b = (outputs[1] / "comparison.json").read_bytes()
        assert a == b
        ok("criterion 10 (determinism)", f"{len(a)} byte comparison reports identical")
