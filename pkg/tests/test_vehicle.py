import math

import numpy as np
import pytest

from cimpcc import (
    ControlInput,
    Disturbance,
    SteeringSingularity,
    VehicleParams,
    VehicleState,
    dynamics,
    plant_step,
    rk4_step,
)

PARAMS = VehicleParams()


class TestDynamics:
    def test_rest_state(self):
        deriv = dynamics(
            VehicleState(1.0, 2.0, 0.3, 5.0), ControlInput(0.0, 0.2, 0.0), PARAMS
        )
        assert np.allclose(deriv, 0.0)

    def test_straight_motion(self):
        deriv = dynamics(
            VehicleState(0.0, 0.0, 0.0, 0.0), ControlInput(1.0, 0.0, 0.7), PARAMS
        )
        assert np.allclose(deriv, [1.0, 0.0, 0.0, 0.7])

    def test_yaw_rate_formula(self):
        deriv = dynamics(
            VehicleState(0.0, 0.0, 0.0, 0.0), ControlInput(2.0, 0.35, 0.0), PARAMS
        )
        assert deriv[2] == pytest.approx(2.0 * math.tan(0.35) / 0.324, rel=1e-12)

    def test_steering_singularity(self):
        with pytest.raises(SteeringSingularity):
            dynamics(VehicleState(0, 0, 0, 0), ControlInput(1.0, math.pi / 2, 0.0), PARAMS)


class TestRk4Step:
    def test_zero_input_is_fixed_point(self):
        state = VehicleState(1.0, -2.0, 0.5, 3.0)
        nxt = rk4_step(state, ControlInput(0.0, 0.0, 0.0), PARAMS, 0.1)
        assert nxt == state

    def test_straight_motion_exact(self):
        nxt = rk4_step(
            VehicleState(0.0, 0.0, 0.0, 0.0), ControlInput(1.0, 0.0, 0.0), PARAMS, 0.1
        )
        assert nxt.x == pytest.approx(0.1, abs=1e-15)
        assert nxt.y == 0.0
        assert nxt.heading == 0.0

    def test_heading_rate_exact_for_constant_inputs(self):
        # Heading evolves at the constant rate v_l*tan(delta)/L, so RK4
        # integrates it exactly.
        nxt = rk4_step(
            VehicleState(0.0, 0.0, 0.0, 0.0), ControlInput(1.0, 0.2, 0.0), PARAMS, 0.05
        )
        expected = 1.0 * math.tan(0.2) / 0.324 * 0.05
        assert nxt.heading == pytest.approx(expected, abs=1e-8)

    def test_heading_stays_normalized(self):
        state = VehicleState(0.0, 0.0, 0.0, 0.0)
        u = ControlInput(3.0, 0.3, 0.0)
        for _ in range(500):
            state = rk4_step(state, u, PARAMS, 0.05)
            assert -math.pi < state.heading <= math.pi

    def test_progress_depends_only_on_v_p(self):
        state = VehicleState(0.2, -0.4, 0.9, 7.0)
        base = rk4_step(state, ControlInput(1.0, 0.1, 2.0), PARAMS, 0.05)
        for v_l, delta in [(0.0, 0.1), (4.0, 0.1), (1.0, -0.3), (2.5, 0.0)]:
            other = rk4_step(state, ControlInput(v_l, delta, 2.0), PARAMS, 0.05)
            assert other.progress == base.progress == pytest.approx(7.0 + 0.1)

    def test_convergence_order(self):
        # Observed order against a dt/1000 reference on a curved trajectory.
        u = ControlInput(2.0, 0.3, 1.0)
        horizon = 1.6

        def integrate(dt):
            state = VehicleState(0.0, 0.0, 0.0, 0.0)
            for _ in range(int(round(horizon / dt))):
                state = rk4_step(state, u, PARAMS, dt)
            return state.as_array()

        ref = integrate(0.05 / 1000)
        errors = []
        for dt in (0.05, 0.025, 0.0125):
            errors.append(np.linalg.norm(integrate(dt)[:2] - ref[:2]))
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 3.5


class TestPlantStep:
    def test_matches_rk4_without_disturbance(self):
        state = VehicleState(0.3, 0.1, 0.4, 1.0)
        u = ControlInput(2.0, 0.25, 1.8)
        coarse = rk4_step(state, u, PARAMS, 0.05)
        fine = plant_step(state, u, PARAMS, 0.05)
        assert np.allclose(fine.as_array(), coarse.as_array(), atol=1e-6)

    def test_zero_variance_equals_clean_path(self):
        state = VehicleState(0.0, 0.0, 0.0, 0.0)
        u = ControlInput(2.0, 0.1, 1.5)
        clean = plant_step(state, u, PARAMS, 0.05)
        noisy = plant_step(
            state, u, PARAMS, 0.05,
            Disturbance(std_v_l=0.0, std_delta=0.0, rng=np.random.default_rng(7)),
        )
        assert clean == noisy

    def test_fixed_seed_reproducible(self):
        u = ControlInput(2.0, 0.1, 1.5)

        def run(seed):
            rng = np.random.default_rng(seed)
            dist = Disturbance(std_v_l=0.05, std_delta=0.01, rng=rng)
            state = VehicleState(0.0, 0.0, 0.0, 0.0)
            out = []
            for _ in range(50):
                state = plant_step(state, u, PARAMS, 0.05, dist)
                out.append(state.as_array())
            return np.array(out)

        assert np.array_equal(run(42), run(42))
        assert not np.array_equal(run(42), run(43))
