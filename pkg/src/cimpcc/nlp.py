"""SQP solver for multiple-shooting nonlinear programs.

Solves  min f(z)  s.t.  c(z) = 0,  lb <= z <= ub  with a Gauss-Newton
quadratic model, equality constraints linearized each iteration, bounds
handled by a primal active-set strategy on the QP step, and a backtracking
line search on an L1 exact-penalty merit function.

Problems at this scale (a few hundred variables) are solved with dense
linear algebra; the stage-block structure descriptor carried by
``NLPProblem`` is advisory metadata for larger horizons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch

GAUSS_NEWTON = "gauss_newton"
EXACT_DIAGONAL_REGULARIZED = "exact_diagonal_regularized"

LEVENBERG_REG = 1e-8
DUAL_REG = 1e-10
BOUND_ATOL = 1e-8
ARMIJO_C1 = 1e-4
MIN_STEP = 1e-10
MAX_QP_ITER = 40
MAX_QP_RELEASES = 15


class SolverStatus:
    CONVERGED = "Converged"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class NLPProblem:
    """Smooth program with equality constraints and variable bounds.

    ``objective(z) -> (value, gradient)`` and
    ``equality_constraints(z) -> (residual, jacobian)`` must be evaluable at
    any point within bounds. ``gn_hessian(z)`` supplies the Gauss-Newton
    model of the objective curvature; ``structure`` describes the
    stage-block sparsity for diagnostic purposes.
    """

    dimension: int
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    equality_constraints: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray
    gn_hessian: Callable[[np.ndarray], np.ndarray] | None = None
    structure: object | None = None
    # Optional cheap paths for line-search trials, which need values only.
    objective_value: Callable[[np.ndarray], float] | None = None
    equality_residual: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class SolverSettings:
    kkt_tolerance: float = 1e-6
    max_iterations: int = 100
    max_wall_time: float = 0.05
    hessian_strategy: str = GAUSS_NEWTON
    record_history: bool = False

    def __post_init__(self):
        if self.kkt_tolerance <= 0 or self.max_iterations <= 0 or self.max_wall_time <= 0:
            raise ValueError("tolerance and budgets must be positive")
        if self.hessian_strategy not in (GAUSS_NEWTON, EXACT_DIAGONAL_REGULARIZED):
            raise ValueError(f"unknown hessian strategy {self.hessian_strategy!r}")


@dataclass
class Solution:
    point: np.ndarray
    objective_value: float
    kkt_residual: float
    constraint_violation: float
    iterations: int
    wall_time: float
    status: str
    multipliers: np.ndarray | None = None
    history: list = field(default_factory=list)


def _bound_violation(z, lb, ub):
    return float(max(np.max(lb - z, initial=0.0), np.max(z - ub, initial=0.0)))


def _active_sets(z, lb, ub):
    at_lower = z <= lb + BOUND_ATOL
    at_upper = z >= ub - BOUND_ATOL
    return at_lower, at_upper


def _ls_multipliers(grad, jac, free):
    """Equality multipliers that best explain the free gradient components.

    Solved through the (regularized) normal equations; the tiny ridge keeps
    zero or redundant constraint rows harmless and pins their multipliers
    at zero.
    """
    m = jac.shape[0]
    if m == 0:
        return np.zeros(0)
    a_f = jac[:, free]
    if a_f.shape[1] == 0:
        return np.zeros(m)
    gram = a_f @ a_f.T
    gram[np.diag_indices_from(gram)] += 1e-12
    rhs = -(a_f @ grad[free])
    try:
        return np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
        return lam


def _projected_stationarity(grad_lag, at_lower, at_upper):
    measure = np.abs(grad_lag)
    measure[at_lower] = np.maximum(0.0, -grad_lag[at_lower])
    measure[at_upper] = np.maximum(0.0, grad_lag[at_upper])
    both = at_lower & at_upper  # pinned variable: any multiplier sign works
    measure[both] = 0.0
    return float(np.max(measure, initial=0.0))


def kkt_residual(problem: NLPProblem, candidate: np.ndarray):
    """(stationarity, violation) of a candidate point.

    Stationarity is the max-norm of the Lagrangian gradient projected onto
    the feasible directions of the box, with equality multipliers fitted by
    least squares. Violation is the max-norm of the equality residual plus
    the worst bound violation.
    """
    z = np.asarray(candidate, dtype=float)
    if z.shape != (problem.dimension,):
        raise DimensionMismatch(f"candidate has shape {z.shape}, expected ({problem.dimension},)")
    _, grad = problem.objective(z)
    c, jac = problem.equality_constraints(z)
    at_lower, at_upper = _active_sets(z, problem.lower_bounds, problem.upper_bounds)
    free = ~(at_lower | at_upper)
    lam = _ls_multipliers(grad, jac, free)
    grad_lag = grad + (jac.T @ lam if len(lam) else 0.0)
    stationarity = _projected_stationarity(grad_lag, at_lower, at_upper)
    violation = float(np.max(np.abs(c), initial=0.0)) + _bound_violation(
        z, problem.lower_bounds, problem.upper_bounds
    )
    return stationarity, violation


def _restoration_step(jac, residual):
    """Least-norm step d with jac @ d = -residual (constraint restoration)."""
    d, *_ = np.linalg.lstsq(jac, -residual, rcond=None)
    return d


def _solve_kkt(h_ff, g_f, a_f, rhs_eq):
    """Solve the dense saddle-point system for the free QP variables."""
    nf = len(g_f)
    m = len(rhs_eq)
    kkt = np.zeros((nf + m, nf + m))
    kkt[:nf, :nf] = h_ff
    kkt[:nf, nf:] = a_f.T
    kkt[nf:, :nf] = a_f
    # Tiny dual regularization keeps the system nonsingular when the
    # constraint Jacobian carries zero or redundant rows.
    kkt[nf:, nf:] = -DUAL_REG * np.eye(m)
    rhs = np.concatenate([-g_f, rhs_eq])
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return sol[:nf], sol[nf:]


def _solve_box_eqp(hess, grad, jac, rhs_eq, lo, hi, seed_lower, seed_upper):
    """min 0.5 p'Hp + g'p  s.t.  Ap = rhs_eq,  lo <= p <= hi.

    Primal active-set on the box: violated bounds are fixed and the reduced
    saddle-point system re-solved; bound multipliers with the wrong sign are
    released one at a time.
    """
    n = len(grad)
    m = len(rhs_eq)
    fixed_value = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    fixed[seed_lower] = True
    fixed_value[seed_lower] = lo[seed_lower]
    fixed[seed_upper] = True
    fixed_value[seed_upper] = hi[seed_upper]
    releases = 0
    p = np.zeros(n)
    lam = np.zeros(m)
    for _ in range(MAX_QP_ITER):
        free = ~fixed
        p = fixed_value.copy()
        if np.any(free):
            g_f = grad[free] + hess[np.ix_(free, fixed)] @ fixed_value[fixed]
            rhs = rhs_eq - jac[:, fixed] @ fixed_value[fixed]
            p_f, lam = _solve_kkt(hess[np.ix_(free, free)], g_f, jac[:, free], rhs)
            p[free] = p_f
        else:
            lam = _ls_multipliers(grad + hess @ p, jac, np.zeros(n, dtype=bool)) if m else np.zeros(m)
        below = free & (p < lo - BOUND_ATOL)
        above = free & (p > hi + BOUND_ATOL)
        if np.any(below) or np.any(above):
            fixed[below] = True
            fixed_value[below] = lo[below]
            fixed[above] = True
            fixed_value[above] = hi[above]
            continue
        if not np.any(fixed) or releases >= MAX_QP_RELEASES:
            return p, lam
        # Bound multipliers: mu = (Hp + g + A'lam) at fixed components.
        mu = hess @ p + grad + (jac.T @ lam if m else 0.0)
        at_lo = fixed & (fixed_value <= lo + BOUND_ATOL)
        at_hi = fixed & ~at_lo
        wrong = np.zeros(n)
        wrong[at_lo] = np.maximum(0.0, -mu[at_lo])
        wrong[at_hi] = np.maximum(0.0, mu[at_hi])
        worst = int(np.argmax(wrong))
        if wrong[worst] <= 1e-10:
            return p, lam
        fixed[worst] = False
        releases += 1
    return np.clip(p, lo, hi), lam


def _fd_exact_hessian(problem, z, h=1e-6):
    """Central-difference Hessian of the objective from its gradient."""
    n = len(z)
    hess = np.zeros((n, n))
    for i in range(n):
        zp = z.copy()
        zp[i] += h
        zm = z.copy()
        zm[i] -= h
        _, gp = problem.objective(zp)
        _, gm = problem.objective(zm)
        hess[:, i] = (gp - gm) / (2.0 * h)
    hess = 0.5 * (hess + hess.T)
    # Eigenvalue floor keeps the QP model convex.
    vals, vecs = np.linalg.eigh(hess)
    vals = np.maximum(vals, LEVENBERG_REG)
    return (vecs * vals) @ vecs.T


def _model_hessian(problem, z, settings):
    if settings.hessian_strategy == EXACT_DIAGONAL_REGULARIZED or problem.gn_hessian is None:
        hess = _fd_exact_hessian(problem, z)
    else:
        hess = problem.gn_hessian(z)
    return hess + LEVENBERG_REG * np.eye(problem.dimension)


def solve(problem: NLPProblem, guess, settings: SolverSettings | None = None) -> Solution:
    """Run the SQP iteration from ``guess`` until the KKT tolerance is met.

    Deterministic for fixed inputs. On hitting the iteration or wall-time
    budget the current (merit-best) iterate is returned with the matching
    status rather than an error; ``NumericalFailure`` is reported when
    non-finite values appear.
    """
    if settings is None:
        settings = SolverSettings()
    start = time.perf_counter()
    z = np.asarray(guess, dtype=float).copy()
    if z.shape != (problem.dimension,):
        raise DimensionMismatch(f"guess has shape {z.shape}, expected ({problem.dimension},)")
    lb, ub = problem.lower_bounds, problem.upper_bounds
    z = np.clip(z, lb, ub)
    obj_value = problem.objective_value or (lambda zz: problem.objective(zz)[0])
    eq_residual = problem.equality_residual or (lambda zz: problem.equality_constraints(zz)[0])

    rho = 1.0
    history = []
    status = SolverStatus.ITERATION_LIMIT
    f = np.inf
    stationarity = np.inf
    violation = np.inf
    lam = np.zeros(0)
    iterations = 0

    for iterations in range(1, settings.max_iterations + 1):
        f, grad = problem.objective(z)
        c, jac = problem.equality_constraints(z)
        if not (np.isfinite(f) and np.all(np.isfinite(grad)) and np.all(np.isfinite(c))):
            status = SolverStatus.NUMERICAL_FAILURE
            break
        at_lower, at_upper = _active_sets(z, lb, ub)
        free = ~(at_lower | at_upper)
        lam = _ls_multipliers(grad, jac, free)
        grad_lag = grad + (jac.T @ lam if len(lam) else 0.0)
        stationarity = _projected_stationarity(grad_lag, at_lower, at_upper)
        violation = float(np.max(np.abs(c), initial=0.0))
        if stationarity <= settings.kkt_tolerance and violation <= settings.kkt_tolerance:
            status = SolverStatus.CONVERGED
            break
        if time.perf_counter() - start > settings.max_wall_time:
            status = SolverStatus.TIME_LIMIT
            break

        hess = _model_hessian(problem, z, settings)
        p, lam_qp = _solve_box_eqp(
            hess, grad, jac, -c, lb - z, ub - z, at_lower, at_upper
        )
        if not np.all(np.isfinite(p)):
            status = SolverStatus.NUMERICAL_FAILURE
            break
        if len(lam_qp):
            rho = max(rho, 2.0 * float(np.max(np.abs(lam_qp))))

        c_l1 = float(np.sum(np.abs(c)))
        merit0 = f + rho * c_l1
        descent = float(grad @ p) - rho * c_l1
        # Allowance for fp noise in the merit: near convergence the true
        # decrease per step drops below the resolution of f itself, and a
        # strict Armijo test would veto perfectly good Newton steps.
        noise = 1e-12 * max(1.0, abs(merit0))
        alpha = 1.0
        accepted = False
        tried_soc = False
        while alpha >= MIN_STEP:
            z_trial = np.clip(z + alpha * p, lb, ub)
            f_trial = obj_value(z_trial)
            c_trial = eq_residual(z_trial)
            merit_trial = f_trial + rho * float(np.sum(np.abs(c_trial)))
            if np.isfinite(merit_trial) and merit_trial <= merit0 + ARMIJO_C1 * alpha * min(
                descent, 0.0
            ) + noise:
                accepted = True
                break
            if alpha == 1.0 and not tried_soc and jac.shape[0] > 0:
                # Second-order correction: restore the constraints measured
                # at the trial point so curvature alone cannot veto a good
                # full step (Maratos effect).
                tried_soc = True
                z_soc = np.clip(z + p + _restoration_step(jac, c_trial), lb, ub)
                merit_soc = obj_value(z_soc) + rho * float(np.sum(np.abs(eq_residual(z_soc))))
                if np.isfinite(merit_soc) and merit_soc <= merit0 + ARMIJO_C1 * min(
                    descent, 0.0
                ) + noise:
                    z_trial = z_soc
                    merit_trial = merit_soc
                    accepted = True
                    break
            alpha *= 0.5
        if settings.record_history:
            history.append(
                {
                    "iteration": iterations,
                    "objective": f,
                    "violation": violation,
                    "stationarity": stationarity,
                    "alpha": alpha if accepted else 0.0,
                    "rho": rho,
                    "merit_before": merit0,
                    "merit_after": merit_trial if accepted else merit0,
                }
            )
        if not accepted:
            # No merit progress available along this direction; stop rather
            # than loop on degenerate steps.
            status = SolverStatus.ITERATION_LIMIT
            break
        if merit0 - merit_trial <= noise and alpha < 1e-2:
            # Progress is below fp resolution; burning the budget on
            # micro-steps helps nobody.
            z = z_trial
            status = SolverStatus.ITERATION_LIMIT
            break
        z = z_trial
        if time.perf_counter() - start > settings.max_wall_time:
            f, grad = problem.objective(z)
            c, jac = problem.equality_constraints(z)
            at_lower, at_upper = _active_sets(z, lb, ub)
            lam = _ls_multipliers(grad, jac, ~(at_lower | at_upper))
            grad_lag = grad + (jac.T @ lam if len(lam) else 0.0)
            stationarity = _projected_stationarity(grad_lag, at_lower, at_upper)
            violation = float(np.max(np.abs(c), initial=0.0))
            status = SolverStatus.TIME_LIMIT
            break

    if status == SolverStatus.ITERATION_LIMIT:
        # The last accepted step moved z after the metrics were computed.
        f, grad = problem.objective(z)
        c, jac = problem.equality_constraints(z)
        if np.isfinite(f) and np.all(np.isfinite(grad)) and np.all(np.isfinite(c)):
            at_lower, at_upper = _active_sets(z, lb, ub)
            lam = _ls_multipliers(grad, jac, ~(at_lower | at_upper))
            grad_lag = grad + (jac.T @ lam if len(lam) else 0.0)
            stationarity = _projected_stationarity(grad_lag, at_lower, at_upper)
            violation = float(np.max(np.abs(c), initial=0.0))
            if stationarity <= settings.kkt_tolerance and violation <= settings.kkt_tolerance:
                status = SolverStatus.CONVERGED

    bound_excess = _bound_violation(z, lb, ub)
    return Solution(
        point=z,
        objective_value=float(f),
        kkt_residual=float(stationarity),
        constraint_violation=float(violation + bound_excess),
        iterations=iterations,
        wall_time=time.perf_counter() - start,
        status=status,
        multipliers=lam if len(lam) else None,
        history=history,
    )
