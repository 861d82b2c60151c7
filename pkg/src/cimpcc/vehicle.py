"""Augmented kinematic bicycle model and its fixed-step integrators.

State is (x, y, heading, progress): rear-axle position, yaw, and the
arc-length coordinate advanced by the virtual progress velocity. Control is
(v_l, delta, v_p): body velocity, steering angle, progress velocity. The
same RK4 step serves as the planner's discretized dynamics and, at a finer
substep, as the simulated plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SteeringSingularity
from .track import wrap_to_pi

PLANT_SUBSTEPS = 10

_EYE4 = np.eye(4)


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float
    progress: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading, self.progress], dtype=float)

    @staticmethod
    def from_array(arr) -> "VehicleState":
        return VehicleState(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))


@dataclass(frozen=True)
class ControlInput:
    v_l: float
    delta: float
    v_p: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v_l, self.delta, self.v_p], dtype=float)

    @staticmethod
    def from_array(arr) -> "ControlInput":
        return ControlInput(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.324

    def __post_init__(self):
        if self.wheelbase <= 0.0:
            raise ValueError(f"wheelbase must be positive, got {self.wheelbase}")


@dataclass
class Disturbance:
    """Zero-mean Gaussian perturbation applied to v_l and delta per plant step."""

    std_v_l: float = 0.0
    std_delta: float = 0.0
    rng: np.random.Generator | None = None


def _check_steering(delta):
    if np.any(np.abs(delta) >= np.pi / 2):
        raise SteeringSingularity(f"|delta| >= pi/2: {delta}")


def _f_batch(states, inputs, wheelbase):
    """Continuous-time derivatives for a (K, 4) batch of states."""
    heading = states[:, 2]
    v_l, delta, v_p = inputs[:, 0], inputs[:, 1], inputs[:, 2]
    out = np.empty_like(states)
    out[:, 0] = np.cos(heading) * v_l
    out[:, 1] = np.sin(heading) * v_l
    out[:, 2] = np.tan(delta) / wheelbase * v_l
    out[:, 3] = v_p
    return out


def _jac_state_batch(states, inputs):
    """d f / d state, shape (K, 4, 4); only the heading column is nonzero."""
    k = len(states)
    heading = states[:, 2]
    v_l = inputs[:, 0]
    jac = np.zeros((k, 4, 4))
    jac[:, 0, 2] = -np.sin(heading) * v_l
    jac[:, 1, 2] = np.cos(heading) * v_l
    return jac


def _jac_input_batch(states, inputs, wheelbase):
    """d f / d input, shape (K, 4, 3)."""
    k = len(states)
    heading = states[:, 2]
    v_l, delta = inputs[:, 0], inputs[:, 1]
    jac = np.zeros((k, 4, 3))
    jac[:, 0, 0] = np.cos(heading)
    jac[:, 1, 0] = np.sin(heading)
    jac[:, 2, 0] = np.tan(delta) / wheelbase
    jac[:, 2, 1] = v_l / (wheelbase * np.cos(delta) ** 2)
    jac[:, 3, 2] = 1.0
    return jac


def rk4_batch(states, inputs, wheelbase, dt):
    """Classical RK4 step on a (K, 4) state batch, inputs held constant.

    Headings are left unwrapped so the map stays smooth for the optimizer.
    """
    _check_steering(inputs[:, 1])
    h = dt
    k1 = _f_batch(states, inputs, wheelbase)
    k2 = _f_batch(states + 0.5 * h * k1, inputs, wheelbase)
    k3 = _f_batch(states + 0.5 * h * k2, inputs, wheelbase)
    k4 = _f_batch(states + h * k3, inputs, wheelbase)
    return states + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_batch_with_jacobians(states, inputs, wheelbase, dt):
    """RK4 step plus analytic Jacobians wrt state and input.

    Returns (next_states (K,4), d next/d state (K,4,4), d next/d input
    (K,4,3)). The chain rule follows the four RK4 stages exactly, so the
    Jacobians are those of the discrete map itself, not a linearization of
    the continuous dynamics.
    """
    _check_steering(inputs[:, 1])
    h = dt
    k = len(states)
    eye = np.broadcast_to(_EYE4, (k, 4, 4))

    z1 = states
    k1 = _f_batch(z1, inputs, wheelbase)
    a1 = _jac_state_batch(z1, inputs)
    b1 = _jac_input_batch(z1, inputs, wheelbase)

    z2 = states + 0.5 * h * k1
    k2 = _f_batch(z2, inputs, wheelbase)
    fz2 = _jac_state_batch(z2, inputs)
    a2 = fz2 @ (eye + 0.5 * h * a1)
    b2 = fz2 @ (0.5 * h * b1) + _jac_input_batch(z2, inputs, wheelbase)

    z3 = states + 0.5 * h * k2
    k3 = _f_batch(z3, inputs, wheelbase)
    fz3 = _jac_state_batch(z3, inputs)
    a3 = fz3 @ (eye + 0.5 * h * a2)
    b3 = fz3 @ (0.5 * h * b2) + _jac_input_batch(z3, inputs, wheelbase)

    z4 = states + h * k3
    k4 = _f_batch(z4, inputs, wheelbase)
    fz4 = _jac_state_batch(z4, inputs)
    a4 = fz4 @ (eye + h * a3)
    b4 = fz4 @ (h * b3) + _jac_input_batch(z4, inputs, wheelbase)

    nxt = states + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    jac_state = eye + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    jac_input = (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    return nxt, jac_state, jac_input


def dynamics(state: VehicleState, control: ControlInput, params: VehicleParams) -> np.ndarray:
    """Continuous-time state derivative (xdot, ydot, headingdot, sdot)."""
    _check_steering(control.delta)
    return _f_batch(state.as_array()[None, :], control.as_array()[None, :], params.wheelbase)[0]


def rk4_step(
    state: VehicleState, control: ControlInput, params: VehicleParams, dt: float
) -> VehicleState:
    """One classical fourth-order Runge-Kutta step with the input held fixed."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    nxt = rk4_batch(state.as_array()[None, :], control.as_array()[None, :], params.wheelbase, dt)[0]
    nxt[2] = wrap_to_pi(nxt[2])
    return VehicleState.from_array(nxt)


def plant_step(
    state: VehicleState,
    control: ControlInput,
    params: VehicleParams,
    dt: float,
    disturbance: Disturbance | None = None,
) -> VehicleState:
    """Simulated-plant step: RK4 at dt/10 substeps, optional input noise.

    The finer substep decorrelates plant integration from the planner's
    stage discretization. Noise (when a disturbance with positive variance
    is active) perturbs v_l and delta once, before integration.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = control.as_array()
    if disturbance is not None and (disturbance.std_v_l > 0.0 or disturbance.std_delta > 0.0):
        rng = disturbance.rng if disturbance.rng is not None else np.random.default_rng()
        u = u.copy()
        u[0] += rng.normal(0.0, disturbance.std_v_l) if disturbance.std_v_l > 0.0 else 0.0
        u[1] += rng.normal(0.0, disturbance.std_delta) if disturbance.std_delta > 0.0 else 0.0
    z = state.as_array()[None, :]
    u = u[None, :]
    sub = dt / PLANT_SUBSTEPS
    for _ in range(PLANT_SUBSTEPS):
        z = rk4_batch(z, u, params.wheelbase, sub)
    out = z[0]
    out[2] = wrap_to_pi(out[2])
    return VehicleState.from_array(out)
