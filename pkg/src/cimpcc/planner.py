"""Receding-horizon contouring planner.

Builds and solves the multiple-shooting trajectory optimization each control
cycle. Two objective modes share the machinery: plain contouring control
(penalize contour/lag errors, reward progress, track a fixed reference
input) and the curvature-integrated variant, which replaces fixed velocity
references with a blend of aggressive and safe overall-velocity targets
weighted by the normalized curvature at the vehicle's current projection.

Decision vector per solve: the predicted stage states (stage 0 is the
measured state and is substituted, not optimized), the control-horizon
inputs, and one corridor slack per predicted stage. Shooting defects tie
consecutive states through the RK4-discretized dynamics; the corridor is a
soft constraint realized as a squared-hinge penalty against the slacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nlp
from .errors import ConfigurationError, DimensionMismatch, OffTrack, SolverFailure
from .track import TrackView, wrap_to_pi
from .vehicle import (
    ControlInput,
    VehicleParams,
    VehicleState,
    rk4_batch,
    rk4_batch_with_jacobians,
)
from .velocity import MappingParams, VelocityBounds, map_nsc_to_beta

MODE_MPCC = "mpcc"
MODE_CIMPCC = "cimpcc"

NX = 4
NU = 3

# Weight of the squared-hinge term that enforces the soft corridor; the
# slacks themselves carry the configured quadratic penalty, so the hinge
# weight only needs to dominate it.
CORRIDOR_HINGE_WEIGHT = 1e6

# Iterates whose dynamics defects stay below this are usable commands even
# when the solver stopped on a budget rather than on the KKT tolerance.
USABLE_VIOLATION = 1e-3

BIG_BOUND = 1e9


@dataclass(frozen=True)
class PlannerWeights:
    """Objective weights; defaults are the shared tuning of both modes."""

    q_con: float = 800.0
    q_lag: float = 800.0
    gamma: float = 40.0
    r1: tuple[float, float, float] = (10.0, 3500.0, 0.0)
    r2: tuple[float, float, float] = (40.0, 10.0, 40.0)
    r3: tuple[float, float] = (0.0, 0.0)
    u_ref: tuple[float, float, float] = (3.3, 0.0, 3.0)
    slack_penalty: float = 1e4
    anchor_du0: bool = True

    def __post_init__(self):
        numeric = (
            (self.q_con, self.q_lag, self.gamma, self.slack_penalty)
            + self.r1
            + self.r2
            + self.r3
        )
        if any(w < 0 for w in numeric):
            raise ConfigurationError("planner weights must be nonnegative")

    @staticmethod
    def for_mode(mode: str) -> "PlannerWeights":
        """Mode defaults: the velocity-tracking entries move between R2 and R3."""
        if mode == MODE_MPCC:
            return PlannerWeights(r2=(40.0, 10.0, 40.0), r3=(0.0, 0.0))
        if mode == MODE_CIMPCC:
            return PlannerWeights(r2=(0.0, 10.0, 0.0), r3=(40.0, 40.0))
        raise ConfigurationError(f"unknown planner mode {mode!r}")


@dataclass(frozen=True)
class HorizonConfig:
    n_p: int = 10
    n_c: int = 10
    t_s: float = 0.05
    state_lower: tuple[float, float, float, float] = (-BIG_BOUND,) * 4
    state_upper: tuple[float, float, float, float] = (BIG_BOUND,) * 4
    input_lower: tuple[float, float, float] = (-10.0, -0.35, -10.0)
    input_upper: tuple[float, float, float] = (10.0, 0.35, 10.0)
    boundary_margin: float = 0.15

    def __post_init__(self):
        if self.n_c > self.n_p or self.n_p < 1 or self.n_c < 1:
            raise ConfigurationError(f"need 1 <= n_c <= n_p, got n_c={self.n_c}, n_p={self.n_p}")
        if self.t_s <= 0:
            raise ConfigurationError(f"t_s must be positive, got {self.t_s}")
        for lo, hi in zip(self.state_lower + self.input_lower, self.state_upper + self.input_upper):
            if not lo < hi:
                raise ConfigurationError(f"lower bound {lo} not below upper bound {hi}")
        if self.boundary_margin < 0:
            raise ConfigurationError("boundary_margin must be nonnegative")


@dataclass(frozen=True)
class HorizonStructure:
    """Stage-block sparsity descriptor attached to built problems."""

    n_p: int
    n_c: int
    state_dim: int = NX
    input_dim: int = NU
    slack_count: int = 0


@dataclass
class HorizonPlan:
    """One solve's predicted trajectory plus solver diagnostics."""

    states: list[VehicleState]
    inputs: list[ControlInput]
    xi_con: np.ndarray
    xi_lag: np.ndarray
    objective_value: float
    solve_time: float
    solver_status: str
    beta: float | None = None
    iterations: int = 0
    prev_input: ControlInput | None = None
    constraint_violation: float = 0.0
    raw_point: np.ndarray | None = None


def contour_lag_errors(state: VehicleState, view: TrackView):
    """Signed lateral (contour) and along-track (lag) error at the state's
    progress coordinate.

    With reference pose (x_r, y_r, theta_r) sampled at s:
    contour = sin(theta_r)(x - x_r) - cos(theta_r)(y - y_r) and
    lag = -cos(theta_r)(x - x_r) - sin(theta_r)(y - y_r); offsets to the
    left of travel come out negative.
    """
    ref = view.sample(state.progress)
    dx = state.x - ref.x
    dy = state.y - ref.y
    sin_t = math.sin(ref.heading)
    cos_t = math.cos(ref.heading)
    return sin_t * dx - cos_t * dy, -cos_t * dx - sin_t * dy


def stage_errors(view: TrackView, states: list[VehicleState]):
    """Contour/lag errors for predicted stages 1..N_p of a plan."""
    xi_con = np.empty(len(states) - 1)
    xi_lag = np.empty(len(states) - 1)
    for k, state in enumerate(states[1:]):
        xi_con[k], xi_lag[k] = contour_lag_errors(state, view)
    return xi_con, xi_lag


def _stage_input_indices(n_p, n_c):
    """Input index feeding each predicted stage 1..N_p (held beyond N_c)."""
    return np.minimum(np.arange(n_p), n_c - 1)


def eval_j_mpcc(plan: HorizonPlan, weights: PlannerWeights, cfg: HorizonConfig) -> float:
    """Contouring objective of a plan: error quadratics minus the progress
    reward, plus input-rate and input-reference quadratics.

    Stage k's velocity is read from the input that produced it; the rate
    term anchors the first input against the previously applied command
    when the plan carries one and anchoring is enabled.
    """
    if len(plan.states) != cfg.n_p + 1 or len(plan.inputs) != cfg.n_c:
        raise DimensionMismatch(
            f"plan has {len(plan.states)} states / {len(plan.inputs)} inputs, "
            f"expected {cfg.n_p + 1} / {cfg.n_c}"
        )
    if len(plan.xi_con) != cfg.n_p or len(plan.xi_lag) != cfg.n_p:
        raise DimensionMismatch("stage error arrays must have length n_p")
    r1 = np.asarray(weights.r1)
    r2 = np.asarray(weights.r2)
    u_ref = np.asarray(weights.u_ref)
    stage_inputs = _stage_input_indices(cfg.n_p, cfg.n_c)
    cost = 0.0
    for k in range(cfg.n_p):
        cost += weights.q_con * plan.xi_con[k] ** 2 + weights.q_lag * plan.xi_lag[k] ** 2
        cost -= weights.gamma * plan.inputs[stage_inputs[k]].v_p * cfg.t_s
    for k in range(1, cfg.n_c):
        du = plan.inputs[k].as_array() - plan.inputs[k - 1].as_array()
        cost += float(r1 @ (du * du))
    if weights.anchor_du0 and plan.prev_input is not None:
        du = plan.inputs[0].as_array() - plan.prev_input.as_array()
        cost += float(r1 @ (du * du))
    for k in range(cfg.n_c):
        dref = plan.inputs[k].as_array() - u_ref
        cost += float(r2 @ (dref * dref))
    return cost


def eval_j_ci(plan: HorizonPlan, beta: float, bounds: VelocityBounds, r3) -> float:
    """Curvature-integrated velocity objective: a beta-blend of quadratic
    pulls toward the safe and aggressive overall-velocity pairs."""
    if not 0.0 < beta <= 1.0:
        raise DimensionMismatch(f"beta must lie in (0, 1], got {beta}")
    r3 = np.asarray(r3, dtype=float)
    if r3.shape != (2,):
        raise DimensionMismatch(f"r3 must have two entries, got shape {r3.shape}")
    n_p = len(plan.states) - 1
    stage_inputs = _stage_input_indices(n_p, len(plan.inputs))
    v_under = np.asarray(bounds.v_under)
    v_bar = np.asarray(bounds.v_bar)
    cost = 0.0
    for k in range(n_p):
        u = plan.inputs[stage_inputs[k]]
        v = np.array([u.v_l, u.v_p])
        d_safe = v - v_under
        d_aggr = v - v_bar
        cost += (1.0 - beta) * float(r3 @ (d_safe * d_safe))
        cost += beta * float(r3 @ (d_aggr * d_aggr))
    return cost


def build_nlp(
    mode: str,
    zeta_cur: VehicleState,
    beta: float,
    cfg: HorizonConfig,
    weights: PlannerWeights,
    bounds: VelocityBounds,
    view: TrackView,
    prev_input: ControlInput | None = None,
    vehicle: VehicleParams | None = None,
) -> nlp.NLPProblem:
    """Assemble the stage-structured program for one receding-horizon solve.

    Layout: z = [stage states 1..N_p | inputs 0..N_c-1 | corridor slacks].
    Equality rows: a (substituted, identically zero) initial-condition
    block followed by one RK4 shooting defect per predicted stage. All
    derivatives are analytic.
    """
    if mode not in (MODE_MPCC, MODE_CIMPCC):
        raise ConfigurationError(f"unknown planner mode {mode!r}")
    if not np.all(np.isfinite(zeta_cur.as_array())):
        raise ConfigurationError("current state must be finite")
    if mode == MODE_CIMPCC and not 0.0 < beta <= 1.0:
        raise ConfigurationError(f"beta must lie in (0, 1], got {beta}")
    params = vehicle if vehicle is not None else VehicleParams()
    n_p, n_c, t_s = cfg.n_p, cfg.n_c, cfg.t_s
    n_state = n_p * NX
    n_input = n_c * NU
    dim = n_state + n_input + n_p
    input_off = n_state
    slack_off = n_state + n_input

    stage_j = _stage_input_indices(n_p, n_c)  # input feeding stage k+1
    z0 = zeta_cur.as_array()
    r1 = np.asarray(weights.r1)
    r2 = np.asarray(weights.r2)
    u_ref = np.asarray(weights.u_ref)
    r3 = np.asarray(weights.r3)
    v_under = np.asarray(bounds.v_under)
    v_bar = np.asarray(bounds.v_bar)
    use_ci = mode == MODE_CIMPCC
    anchor = weights.anchor_du0 and prev_input is not None
    u_prev = prev_input.as_array() if anchor else None
    margin = cfg.boundary_margin
    w_hinge = CORRIDOR_HINGE_WEIGHT
    w_slack = weights.slack_penalty

    # Bounds.
    lb = np.empty(dim)
    ub = np.empty(dim)
    s_lo = zeta_cur.progress - 1.0
    s_hi = zeta_cur.progress + cfg.input_upper[2] * t_s * n_p + 1.0
    state_lo = np.array(cfg.state_lower)
    state_hi = np.array(cfg.state_upper)
    for k in range(n_p):
        lb[k * NX : (k + 1) * NX] = state_lo
        ub[k * NX : (k + 1) * NX] = state_hi
        lb[k * NX + 3] = max(state_lo[3], s_lo)
        ub[k * NX + 3] = min(state_hi[3], s_hi)
    lb[input_off:slack_off] = np.tile(cfg.input_lower, n_c)
    ub[input_off:slack_off] = np.tile(cfg.input_upper, n_c)
    lb[slack_off:] = 0.0
    ub[slack_off:] = BIG_BOUND

    # Constant curvature blocks: input-rate, input-reference, velocity-blend
    # pulls, and slack quadratics do not depend on z.
    h_base = np.zeros((dim, dim))
    for j in range(1, n_c):
        a = input_off + (j - 1) * NU
        b = input_off + j * NU
        for i in range(NU):
            h_base[a + i, a + i] += 2.0 * r1[i]
            h_base[b + i, b + i] += 2.0 * r1[i]
            h_base[a + i, b + i] -= 2.0 * r1[i]
            h_base[b + i, a + i] -= 2.0 * r1[i]
    if anchor:
        for i in range(NU):
            h_base[input_off + i, input_off + i] += 2.0 * r1[i]
    for j in range(n_c):
        a = input_off + j * NU
        for i in range(NU):
            h_base[a + i, a + i] += 2.0 * r2[i]
    if use_ci:
        counts = np.bincount(stage_j, minlength=n_c).astype(float)
        for j in range(n_c):
            a = input_off + j * NU
            h_base[a, a] += 2.0 * r3[0] * counts[j]
            h_base[a + 2, a + 2] += 2.0 * r3[1] * counts[j]
    idx = np.arange(slack_off, dim)
    h_base[idx, idx] += 2.0 * w_slack

    cache = {"key": None, "data": None}

    def _common(z):
        key = z.tobytes()
        if cache["key"] == key:
            return cache["data"]
        states = z[:n_state].reshape(n_p, NX)
        inputs = z[input_off:slack_off].reshape(n_c, NU)
        sig = z[slack_off:]
        s_vals = states[:, 3]
        xr, yr, _, tx, ty = view.ref_pose_arrays(s_vals)
        hw_l, hw_r, dhw_l, dhw_r = view.half_widths(s_vals)
        dxv = states[:, 0] - xr
        dyv = states[:, 1] - yr
        xi_con = ty * dxv - tx * dyv
        xi_lag = -tx * dxv - ty * dyv
        res_r = xi_con - (hw_r - margin) - sig
        res_l = -xi_con - (hw_l - margin) - sig
        data = {
            "states": states,
            "inputs": inputs,
            "sig": sig,
            "tx": tx,
            "ty": ty,
            "xi_con": xi_con,
            "xi_lag": xi_lag,
            "act_r": res_r > 0.0,
            "act_l": res_l > 0.0,
            "res_r": res_r,
            "res_l": res_l,
            "dhw_l": dhw_l,
            "dhw_r": dhw_r,
        }
        cache["key"] = key
        cache["data"] = data
        return data

    def _obj_core(d, want_grad):
        states, inputs, sig = d["states"], d["inputs"], d["sig"]
        tx, ty = d["tx"], d["ty"]
        xi_con, xi_lag = d["xi_con"], d["xi_lag"]
        grad = np.zeros(dim) if want_grad else None

        f = weights.q_con * float(xi_con @ xi_con) + weights.q_lag * float(xi_lag @ xi_lag)
        if want_grad:
            grad[0:n_state:NX] += 2.0 * weights.q_con * xi_con * ty - 2.0 * weights.q_lag * xi_lag * tx
            grad[1:n_state:NX] += -2.0 * weights.q_con * xi_con * tx - 2.0 * weights.q_lag * xi_lag * ty
            grad[3:n_state:NX] += 2.0 * weights.q_lag * xi_lag

        f -= weights.gamma * t_s * float(np.sum(inputs[stage_j, 2]))
        if want_grad:
            np.add.at(grad, input_off + stage_j * NU + 2, -weights.gamma * t_s)

        if n_c > 1:
            du = inputs[1:] - inputs[:-1]
            f += float(np.sum(du * du * r1))
            if want_grad:
                g_du = 2.0 * du * r1
                grad_in = grad[input_off:slack_off].reshape(n_c, NU)
                grad_in[1:] += g_du
                grad_in[:-1] -= g_du
        if anchor:
            du0 = inputs[0] - u_prev
            f += float(r1 @ (du0 * du0))
            if want_grad:
                grad[input_off : input_off + NU] += 2.0 * r1 * du0

        dref = inputs - u_ref
        f += float(np.sum(dref * dref * r2))
        if want_grad:
            grad[input_off:slack_off] += (2.0 * r2 * dref).ravel()

        if use_ci:
            v = inputs[stage_j][:, [0, 2]]
            d_safe = v - v_under
            d_aggr = v - v_bar
            f += (1.0 - beta) * float(np.sum(d_safe * d_safe * r3))
            f += beta * float(np.sum(d_aggr * d_aggr * r3))
            if want_grad:
                g_v = 2.0 * ((1.0 - beta) * d_safe + beta * d_aggr) * r3
                np.add.at(grad, input_off + stage_j * NU + 0, g_v[:, 0])
                np.add.at(grad, input_off + stage_j * NU + 2, g_v[:, 1])

        f += w_slack * float(sig @ sig)
        if want_grad:
            grad[slack_off:] += 2.0 * w_slack * sig

        for side, sgn, dhw in (("act_r", 1.0, d["dhw_r"]), ("act_l", -1.0, d["dhw_l"])):
            act = d[side]
            if not np.any(act):
                continue
            res = d["res_r" if side == "act_r" else "res_l"][act]
            f += w_hinge * float(res @ res)
            if want_grad:
                coeff = 2.0 * w_hinge * res
                rows = np.flatnonzero(act)
                np.add.at(grad, rows * NX + 0, coeff * (sgn * ty[act]))
                np.add.at(grad, rows * NX + 1, coeff * (-sgn * tx[act]))
                np.add.at(grad, rows * NX + 3, coeff * (-dhw[act]))
                np.add.at(grad, slack_off + rows, -coeff)
        return f, grad

    def objective(z):
        return _obj_core(_common(z), True)

    def objective_value(z):
        return _obj_core(_common(z), False)[0]

    def gn_hessian(z):
        d = _common(z)
        tx, ty = d["tx"], d["ty"]
        hess = h_base.copy()
        for k in range(n_p):
            base = k * NX
            jc = np.array([ty[k], -tx[k], 0.0, 0.0])
            jl = np.array([-tx[k], -ty[k], 0.0, 1.0])
            block = 2.0 * weights.q_con * np.outer(jc, jc) + 2.0 * weights.q_lag * np.outer(jl, jl)
            hess[base : base + NX, base : base + NX] += block
        for side, sgn, dhw in (("act_r", 1.0, d["dhw_r"]), ("act_l", -1.0, d["dhw_l"])):
            for k in np.flatnonzero(d[side]):
                cols = np.array([k * NX + 0, k * NX + 1, k * NX + 3, slack_off + k])
                jr = np.array([sgn * ty[k], -sgn * tx[k], -dhw[k], -1.0])
                hess[np.ix_(cols, cols)] += 2.0 * w_hinge * np.outer(jr, jr)
        return hess

    eye_nx = np.eye(NX)

    def equality(z):
        states = z[:n_state].reshape(n_p, NX)
        inputs = z[input_off:slack_off].reshape(n_c, NU)
        traj = np.vstack([z0, states])
        u_def = inputs[stage_j]
        nxt, jac_x, jac_u = rk4_batch_with_jacobians(traj[:-1], u_def, params.wheelbase, t_s)
        defect = traj[1:] - nxt
        defect[:, 2] = wrap_to_pi(defect[:, 2])
        c = np.concatenate([np.zeros(NX), defect.ravel()])
        jac = np.zeros((NX + n_p * NX, dim))
        for k in range(n_p):
            rows = slice(NX + k * NX, NX + (k + 1) * NX)
            jac[rows, k * NX : (k + 1) * NX] = eye_nx
            if k >= 1:
                jac[rows, (k - 1) * NX : k * NX] = -jac_x[k]
            cols = input_off + stage_j[k] * NU
            jac[rows, cols : cols + NU] += -jac_u[k]
        return c, jac

    def equality_residual(z):
        states = z[:n_state].reshape(n_p, NX)
        inputs = z[input_off:slack_off].reshape(n_c, NU)
        traj = np.vstack([z0, states])
        nxt = rk4_batch(traj[:-1], inputs[stage_j], params.wheelbase, t_s)
        defect = traj[1:] - nxt
        defect[:, 2] = wrap_to_pi(defect[:, 2])
        return np.concatenate([np.zeros(NX), defect.ravel()])

    return nlp.NLPProblem(
        dimension=dim,
        objective=objective,
        equality_constraints=equality,
        lower_bounds=lb,
        upper_bounds=ub,
        gn_hessian=gn_hessian,
        structure=HorizonStructure(n_p=n_p, n_c=n_c, slack_count=n_p),
        objective_value=objective_value,
        equality_residual=equality_residual,
    )


class Planner:
    """Owns one mode's warm-start state and solves cycle by cycle."""

    def __init__(
        self,
        mode: str,
        view: TrackView,
        cfg: HorizonConfig | None = None,
        weights: PlannerWeights | None = None,
        bounds: VelocityBounds | None = None,
        mapping: MappingParams | None = None,
        vehicle: VehicleParams | None = None,
        solver_settings: nlp.SolverSettings | None = None,
        initial_command: ControlInput | None = ControlInput(0.0, 0.0, 0.0),
    ):
        if mode not in (MODE_MPCC, MODE_CIMPCC):
            raise ConfigurationError(f"unknown planner mode {mode!r}")
        self.mode = mode
        self.view = view
        self.cfg = cfg if cfg is not None else HorizonConfig()
        self.weights = weights if weights is not None else PlannerWeights.for_mode(mode)
        self.bounds = bounds if bounds is not None else VelocityBounds()
        self.mapping = mapping if mapping is not None else MappingParams()
        self.vehicle = vehicle if vehicle is not None else VehicleParams()
        self.solver_settings = (
            solver_settings if solver_settings is not None else nlp.SolverSettings()
        )
        self._prev_plan: HorizonPlan | None = None
        self._prev_applied = initial_command

    def reset(self, initial_command: ControlInput | None = ControlInput(0.0, 0.0, 0.0)):
        self._prev_plan = None
        self._prev_applied = initial_command

    def _check_corridor(self, zeta: VehicleState, s_star: float):
        xi, _ = contour_lag_errors(replace(zeta, progress=s_star), self.view)
        hw_l, hw_r, _, _ = self.view.half_widths(np.array([s_star]))
        hw = float(hw_r[0]) if xi > 0 else float(hw_l[0])
        if abs(xi) > hw - self.cfg.boundary_margin + 2.0 * self.cfg.boundary_margin:
            raise OffTrack(
                f"lateral offset {xi:+.3f} m exceeds corridor at s={s_star:.2f} "
                f"(half-width {hw:.3f} m)"
            )

    def _cold_start(self, zeta: VehicleState) -> np.ndarray:
        cfg = self.cfg
        v_l, v_p = self.bounds.v_under
        dim = cfg.n_p * NX + cfg.n_c * NU + cfg.n_p
        z = np.zeros(dim)
        heading = zeta.heading
        for k in range(1, cfg.n_p + 1):
            s_k = zeta.progress + k * v_p * cfg.t_s
            ref = self.view.sample(s_k)
            heading = heading + wrap_to_pi(ref.heading - heading)
            z[(k - 1) * NX : k * NX] = (ref.x, ref.y, heading, s_k)
        z[cfg.n_p * NX : cfg.n_p * NX + cfg.n_c * NU] = np.tile((v_l, 0.0, v_p), cfg.n_c)
        return z

    def _shift_warm_start(self, prev: HorizonPlan) -> np.ndarray:
        cfg = self.cfg
        z_old = prev.raw_point
        n_state = cfg.n_p * NX
        n_input = cfg.n_c * NU
        z = z_old.copy()
        states = z_old[:n_state].reshape(cfg.n_p, NX)
        z[: n_state - NX] = states[1:].ravel()
        z[n_state - NX : n_state] = states[-1]
        inputs = z_old[n_state : n_state + n_input].reshape(cfg.n_c, NU)
        z[n_state : n_state + n_input - NU] = inputs[1:].ravel()
        z[n_state + n_input - NU : n_state + n_input] = inputs[-1]
        sig = z_old[n_state + n_input :]
        z[n_state + n_input : -1] = sig[1:]
        z[-1] = sig[-1]
        return z

    def solve_step(
        self, zeta_cur: VehicleState, prev_solution: HorizonPlan | None | str = "own"
    ) -> HorizonPlan:
        """Solve one receding-horizon cycle and return the plan.

        The planner's own previous plan provides the shifted warm start;
        pass ``prev_solution=None`` to force a cold start or a specific plan
        to warm-start from it. Raises ``OffTrack`` when the vehicle is
        beyond the recovery margin and ``SolverFailure`` when no usable
        iterate is produced.
        """
        view = self.view
        s_star, idx = view.project(zeta_cur.x, zeta_cur.y, s_hint=zeta_cur.progress)
        self._check_corridor(zeta_cur, s_star)
        if self.mode == MODE_CIMPCC:
            nsc = float(view.profile.normalized[idx])
            beta = map_nsc_to_beta(nsc, self.mapping)
        else:
            beta = 1.0

        prev = self._prev_plan if prev_solution == "own" else prev_solution
        guess = self._shift_warm_start(prev) if prev is not None else self._cold_start(zeta_cur)
        problem = build_nlp(
            self.mode,
            zeta_cur,
            beta,
            self.cfg,
            self.weights,
            self.bounds,
            view,
            prev_input=self._prev_applied,
            vehicle=self.vehicle,
        )
        sol = nlp.solve(problem, guess, self.solver_settings)
        usable = sol.status == nlp.SolverStatus.CONVERGED or (
            sol.status in (nlp.SolverStatus.ITERATION_LIMIT, nlp.SolverStatus.TIME_LIMIT)
            and sol.constraint_violation <= USABLE_VIOLATION
        )
        if not usable:
            raise SolverFailure(
                f"{sol.status}: violation {sol.constraint_violation:.2e}, "
                f"kkt {sol.kkt_residual:.2e} after {sol.iterations} iterations"
            )

        cfg = self.cfg
        n_state = cfg.n_p * NX
        states_arr = sol.point[:n_state].reshape(cfg.n_p, NX)
        inputs_arr = sol.point[n_state : n_state + cfg.n_c * NU].reshape(cfg.n_c, NU)
        inputs_arr = np.clip(inputs_arr, cfg.input_lower, cfg.input_upper)
        states = [zeta_cur]
        for row in states_arr:
            states.append(VehicleState(row[0], row[1], float(wrap_to_pi(row[2])), row[3]))
        inputs = [ControlInput.from_array(row) for row in inputs_arr]
        xi_con, xi_lag = stage_errors(view, states)
        plan = HorizonPlan(
            states=states,
            inputs=inputs,
            xi_con=xi_con,
            xi_lag=xi_lag,
            objective_value=sol.objective_value,
            solve_time=sol.wall_time,
            solver_status=sol.status,
            beta=beta if self.mode == MODE_CIMPCC else None,
            iterations=sol.iterations,
            prev_input=self._prev_applied,
            constraint_violation=sol.constraint_violation,
            raw_point=sol.point,
        )
        self._prev_plan = plan
        self._prev_applied = inputs[0]
        return plan
