"""Shared test helpers for building plans and sampling feasible points."""

import math

import numpy as np

from cimpcc import ControlInput, HorizonPlan, VehicleState
from cimpcc.planner import NU, NX, stage_errors


def make_plan(states, inputs, view=None, prev_input=None):
    if view is not None:
        xi_con, xi_lag = stage_errors(view, states)
    else:
        xi_con = np.zeros(len(states) - 1)
        xi_lag = np.zeros(len(states) - 1)
    return HorizonPlan(
        states=states,
        inputs=inputs,
        xi_con=xi_con,
        xi_lag=xi_lag,
        objective_value=0.0,
        solve_time=0.0,
        solver_status="test",
        prev_input=prev_input,
    )


def random_feasible_point(view, cfg, rng, s_center):
    """Decision vector with states near the centerline, clear of segment
    knots and of hinge activation edges."""
    cl = view.centerline
    n_state = cfg.n_p * NX
    z = np.empty(n_state + cfg.n_c * NU + cfg.n_p)
    for k in range(cfg.n_p):
        s_raw = s_center + k * 0.15 + rng.uniform(0, 0.04)
        i = int(np.searchsorted(cl.arc_lengths, s_raw % cl.total_length, side="right") - 1)
        frac = rng.uniform(0.2, 0.8)
        s = cl.arc_lengths[i] + frac * cl.seg_lengths[i]
        ref = view.sample(float(s))
        lateral = rng.uniform(-0.15, 0.15)
        z[k * NX + 0] = ref.x - lateral * math.sin(ref.heading)
        z[k * NX + 1] = ref.y + lateral * math.cos(ref.heading)
        z[k * NX + 2] = ref.heading + rng.uniform(-0.3, 0.3)
        z[k * NX + 3] = s
    for j in range(cfg.n_c):
        z[n_state + j * NU + 0] = rng.uniform(0.5, 4.5)
        z[n_state + j * NU + 1] = rng.uniform(-0.3, 0.3)
        z[n_state + j * NU + 2] = rng.uniform(0.5, 4.5)
    z[n_state + cfg.n_c * NU :] = rng.uniform(0.0, 0.05, size=cfg.n_p)
    return z


def unpack_plan(view, cfg, zeta_cur, z, prev_input=None):
    n_state = cfg.n_p * NX
    states = [zeta_cur]
    for k in range(cfg.n_p):
        row = z[k * NX : (k + 1) * NX]
        states.append(VehicleState(row[0], row[1], row[2], row[3]))
    inputs = [
        ControlInput.from_array(z[n_state + j * NU : n_state + (j + 1) * NU])
        for j in range(cfg.n_c)
    ]
    return make_plan(states, inputs, view=view, prev_input=prev_input)
