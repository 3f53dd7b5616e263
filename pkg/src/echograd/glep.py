"""Trajectory-level gradient estimators under three boundary regimes.

All three estimators contrast a nudged trajectory (the Euler-Lagrange flow of
the cost-augmented Lagrangian) with the free one and integrate the parameter
gradient difference with the trapezoid rule, divided by the nudging strength.
They differ in the boundary conditions, which decide which endpoint residual
terms survive:

- Fixed initial position and velocity ("CIVP"): two residual terms remain at
  the final time.  They involve parameter derivatives of the final state and
  of the velocity gradient there, computed here by central finite-difference
  probes over the parameters, one re-integration per parameter per side.
  This is deliberately impractical beyond a handful of parameters and is
  guarded accordingly; the estimator exists to validate the formula.
- Fixed endpoint positions ("CBVP"): no residual terms at all, but the
  trajectories come from a two-point boundary value problem, solved here by
  relaxation (explicit pseudo-time descent on the pointwise Euler-Lagrange
  defect with pinned endpoints).
- Final state pinned to the free trajectory's endpoint ("PFVP"): requires a
  velocity-even Lagrangian and a position-only cost.  The nudged solution is
  produced by forward integration from the velocity-reversed free endpoint
  with time-reversed inputs; a single residual term survives at the initial
  time and needs only parameter derivatives of the velocity gradient at the
  fixed initial condition, no re-integration.

Symmetric nudging averages the estimator at +beta and -beta.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    CostModel,
    EstimatorMethod,
    GradientEstimate,
    LagrangianModel,
    NudgeMode,
    ParamVector,
    Signal,
    TimeGrid,
    Trajectory,
    as_params,
    frozen_array,
    trapezoid,
)
from .dynamics import Nudge, integrate_lagrangian_ivp
from .errors import ConvergenceError, DivergenceError

__all__ = [
    "CivpSpec",
    "CbvpSpec",
    "PfvpSpec",
    "CbvpRelaxConfig",
    "CbvpResult",
    "CIVP_THETA_LIMIT",
    "grad_civp",
    "solve_cbvp",
    "grad_cbvp",
    "grad_pfvp",
]

CIVP_THETA_LIMIT = 32


@dataclass(frozen=True)
class CivpSpec:
    """Fixed initial position and velocity."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", frozen_array(self.position, "position", ndim=1))
        object.__setattr__(self, "velocity", frozen_array(self.velocity, "velocity", ndim=1))
        if self.position.shape != self.velocity.shape:
            raise ValueError("position and velocity must share a dimension")


@dataclass(frozen=True)
class CbvpSpec:
    """Fixed positions at both ends of the horizon."""

    start_position: np.ndarray
    end_position: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "start_position", frozen_array(self.start_position, "start_position", ndim=1)
        )
        object.__setattr__(
            self, "end_position", frozen_array(self.end_position, "end_position", ndim=1)
        )
        if self.start_position.shape != self.end_position.shape:
            raise ValueError("endpoint positions must share a dimension")


@dataclass(frozen=True)
class PfvpSpec:
    """Initial data of the free run whose endpoint pins the nudged problem."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", frozen_array(self.position, "position", ndim=1))
        object.__setattr__(self, "velocity", frozen_array(self.velocity, "velocity", ndim=1))
        if self.position.shape != self.velocity.shape:
            raise ValueError("position and velocity must share a dimension")


@dataclass(frozen=True)
class CbvpRelaxConfig:
    """Relaxation controls; tau_step defaults to the stability-limited 0.2*dt^2."""

    tau_step: float | None = None
    tol: float = 1e-10
    max_sweeps: int = 2_000_000

    def __post_init__(self):
        if self.tau_step is not None and self.tau_step <= 0:
            raise ValueError("tau_step must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be a positive integer")


@dataclass(frozen=True)
class CbvpResult:
    trajectory: Trajectory
    sweeps: int
    max_residual: float


def _timed_estimate(values_by_sign, beta, nudging, method, started) -> GradientEstimate:
    if nudging is NudgeMode.SYMMETRIC:
        value = 0.5 * (values_by_sign[beta] + values_by_sign[-beta])
    else:
        value = values_by_sign[beta]
    return GradientEstimate(
        value=value,
        method=method,
        beta=beta,
        nudging=nudging,
        wall_time=time.perf_counter() - started,
    )


def _signed_betas(beta, nudging):
    if beta == 0.0:
        raise ValueError("nudging strength beta must be nonzero")
    return (beta, -beta) if nudging is NudgeMode.SYMMETRIC else (beta,)


def _grad_params_rows(model, positions, velocities, th, xs):
    rows = np.empty((positions.shape[0], model.theta_dim))
    for k in range(positions.shape[0]):
        xk = None if xs is None else xs[k]
        rows[k] = model.grad_params(positions[k], velocities[k], th, xk)
    return rows


def grad_civp(
    model: LagrangianModel,
    cost: CostModel,
    theta: ParamVector,
    spec: CivpSpec,
    grid: TimeGrid,
    x: Signal | None,
    y: Signal,
    beta: float,
    nudging: NudgeMode = NudgeMode.SYMMETRIC,
    fd_eps: float = 1e-5,
    theta_limit: int = CIVP_THETA_LIMIT,
    include_boundary: bool = True,
) -> GradientEstimate:
    """Constant-initial-value estimator with its two final-time residuals.

    The residual terms need parameter Jacobians of the final state, obtained
    by central differencing over theta with one free re-integration per
    parameter per side, so the parameter count is capped by ``theta_limit``.
    ``include_boundary=False`` drops the residual terms; that variant is
    biased and exists only so tests can demonstrate the residuals matter.
    """
    started = time.perf_counter()
    th = as_params(theta)
    if th.shape[0] > theta_limit:
        raise ValueError(
            f"CIVP probes re-integrate per parameter; {th.shape[0]} parameters exceed "
            f"the guard of {theta_limit}"
        )
    if not cost.position_only:
        raise ValueError("trajectory estimators require a position-only cost")
    nudging = NudgeMode(nudging)

    free = integrate_lagrangian_ivp(model, th, spec.position, spec.velocity, grid, x)
    xs = x.values if x is not None else None
    x_end = None if xs is None else xs[-1]
    free_params = _grad_params_rows(model, free.positions, free.velocities, th, xs)
    gv_free_end = np.asarray(
        model.grad_velocity(free.positions[-1], free.velocities[-1], th, x_end), dtype=float
    )

    if include_boundary:
        dim, n_theta = model.dim, th.shape[0]
        d_state = np.empty((dim, n_theta))     # d s_T / d theta
        d_gradv = np.empty((dim, n_theta))     # d/d theta of dL/dv at the free endpoint
        for j in range(n_theta):
            probes = []
            for sign in (+1.0, -1.0):
                th_j = th.copy()
                th_j[j] += sign * fd_eps
                traj = integrate_lagrangian_ivp(model, th_j, spec.position, spec.velocity, grid, x)
                s_end, v_end = traj.positions[-1], traj.velocities[-1]
                probes.append((s_end, model.grad_velocity(s_end, v_end, th_j, x_end)))
            (s_plus, g_plus), (s_minus, g_minus) = probes
            d_state[:, j] = (s_plus - s_minus) / (2.0 * fd_eps)
            d_gradv[:, j] = (np.asarray(g_plus) - np.asarray(g_minus)) / (2.0 * fd_eps)

    values = {}
    for b in _signed_betas(beta, nudging):
        nudged = integrate_lagrangian_ivp(
            model, th, spec.position, spec.velocity, grid, x, nudge=Nudge(b, cost, y)
        )
        nudged_params = _grad_params_rows(model, nudged.positions, nudged.velocities, th, xs)
        value = trapezoid(nudged_params - free_params, grid.dt)
        if include_boundary:
            gv_nudged_end = np.asarray(
                model.grad_velocity(nudged.positions[-1], nudged.velocities[-1], th, x_end),
                dtype=float,
            )
            value = value + d_state.T @ (gv_nudged_end - gv_free_end)
            value = value - d_gradv.T @ (nudged.positions[-1] - free.positions[-1])
        values[b] = value / b
    return _timed_estimate(values, beta, nudging, EstimatorMethod.CIVP, started)


def _batch_grad_position(model, positions, velocities, th, inputs):
    fn = getattr(model, "grad_position_batch", None)
    if fn is not None:
        return np.asarray(fn(positions, velocities, th, inputs), dtype=float)
    out = np.empty_like(positions)
    for i in range(positions.shape[0]):
        xi = None if inputs is None else inputs[i]
        out[i] = model.grad_position(positions[i], velocities[i], th, xi)
    return out


def _batch_grad_velocity(model, positions, velocities, th, inputs):
    fn = getattr(model, "grad_velocity_batch", None)
    if fn is not None:
        return np.asarray(fn(positions, velocities, th, inputs), dtype=float)
    out = np.empty_like(positions)
    for i in range(positions.shape[0]):
        xi = None if inputs is None else inputs[i]
        out[i] = model.grad_velocity(positions[i], velocities[i], th, xi)
    return out


def _batch_cost_grad(cost, positions, targets):
    fn = getattr(cost, "grad_state_batch", None)
    if fn is not None:
        return np.asarray(fn(positions, targets), dtype=float)
    out = np.empty_like(positions)
    for i in range(positions.shape[0]):
        out[i] = cost.grad_state(positions[i], targets[i])
    return out


def solve_cbvp(
    model: LagrangianModel,
    theta,
    spec: CbvpSpec,
    grid: TimeGrid,
    x: Signal | None = None,
    cost: CostModel | None = None,
    target: Signal | None = None,
    beta: float = 0.0,
    config: CbvpRelaxConfig | None = None,
    initial_guess: np.ndarray | None = None,
) -> CbvpResult:
    """Relax a two-point boundary value problem to its Euler-Lagrange solution.

    Interior positions follow explicit pseudo-time descent on the discrete
    Euler-Lagrange defect (compact second-difference stencil, Jacobi-style
    full sweeps) while the endpoint positions stay pinned.  Converges when
    the worst interior defect drops below ``config.tol``; the descent is
    stable only below the first conjugate point of the horizon, which is an
    intrinsic limit of gradient flow on an action.
    """
    th = as_params(theta)
    config = config or CbvpRelaxConfig()
    if beta != 0.0:
        if cost is None or target is None:
            raise ValueError("a nonzero beta requires a cost model and a target signal")
        if not cost.position_only:
            raise ValueError("trajectory estimators require a position-only cost")
        if target.grid != grid:
            raise ValueError("target signal is not aligned to the grid")
    if x is not None and x.grid != grid:
        raise ValueError("input signal is not aligned to the grid")

    n, dt, d = grid.n_steps, grid.dt, model.dim
    if n < 2:
        raise ValueError("boundary value problems need at least one interior point")
    tau = config.tau_step if config.tau_step is not None else 0.2 * dt * dt

    if initial_guess is None:
        weights = np.linspace(0.0, 1.0, n + 1)[:, None]
        states = (1.0 - weights) * spec.start_position + weights * spec.end_position
    else:
        states = np.array(initial_guess, dtype=float)
        if states.shape != (n + 1, d):
            raise ValueError(f"initial guess must have shape {(n + 1, d)}")
        if not (np.allclose(states[0], spec.start_position) and np.allclose(states[-1], spec.end_position)):
            raise ValueError("initial guess must satisfy the endpoint constraints")
        states[0], states[-1] = spec.start_position, spec.end_position

    xs = x.values if x is not None else None
    xs_left = None if xs is None else xs[:-1]
    xs_interior = None if xs is None else xs[1:-1]
    ys_interior = None if target is None else target.values[1:-1]

    def defect(s):
        """Pointwise Euler-Lagrange defect at the interior grid points."""
        half_v = (s[1:] - s[:-1]) / dt
        half_mid = 0.5 * (s[1:] + s[:-1])
        flux = _batch_grad_velocity(model, half_mid, half_v, th, xs_left)
        centered_v = (s[2:] - s[:-2]) / (2.0 * dt)
        el = _batch_grad_position(model, s[1:-1], centered_v, th, xs_interior)
        if beta != 0.0:
            el = el + beta * _batch_cost_grad(cost, s[1:-1], ys_interior)
        return el - (flux[1:] - flux[:-1]) / dt

    sweeps = 0
    while True:
        el = defect(states)
        if not np.all(np.isfinite(el)):
            raise DivergenceError("boundary value relaxation diverged", step=sweeps)
        residual = float(np.max(np.abs(el)))
        if residual <= config.tol:
            break
        if sweeps >= config.max_sweeps:
            raise ConvergenceError(
                f"boundary value relaxation did not reach tol={config.tol} within "
                f"{config.max_sweeps} sweeps (residual {residual:.3e})"
            )
        states[1:-1] -= tau * el
        sweeps += 1

    velocities = np.empty_like(states)
    velocities[1:-1] = (states[2:] - states[:-2]) / (2.0 * dt)
    velocities[0] = (-3.0 * states[0] + 4.0 * states[1] - states[2]) / (2.0 * dt)
    velocities[-1] = (3.0 * states[-1] - 4.0 * states[-2] + states[-3]) / (2.0 * dt)
    trajectory = Trajectory(grid, "lagrangian", states, velocities)
    return CbvpResult(trajectory=trajectory, sweeps=sweeps, max_residual=residual)


def grad_cbvp(
    model: LagrangianModel,
    cost: CostModel,
    theta: ParamVector,
    spec: CbvpSpec,
    grid: TimeGrid,
    x: Signal | None,
    y: Signal,
    beta: float,
    nudging: NudgeMode = NudgeMode.SYMMETRIC,
    config: CbvpRelaxConfig | None = None,
) -> GradientEstimate:
    """Constant-boundary-value estimator: the pure integral, no residuals."""
    started = time.perf_counter()
    th = as_params(theta)
    nudging = NudgeMode(nudging)
    xs = x.values if x is not None else None

    free = solve_cbvp(model, th, spec, grid, x, config=config).trajectory
    free_params = _grad_params_rows(model, free.positions, free.velocities, th, xs)

    values = {}
    for b in _signed_betas(beta, nudging):
        nudged = solve_cbvp(
            model, th, spec, grid, x, cost=cost, target=y, beta=b, config=config,
            initial_guess=free.positions,
        ).trajectory
        nudged_params = _grad_params_rows(model, nudged.positions, nudged.velocities, th, xs)
        values[b] = trapezoid(nudged_params - free_params, grid.dt) / b
    return _timed_estimate(values, beta, nudging, EstimatorMethod.CBVP, started)


def grad_pfvp(
    model: LagrangianModel,
    cost: CostModel,
    theta: ParamVector,
    spec: PfvpSpec,
    grid: TimeGrid,
    x: Signal | None,
    y: Signal,
    beta: float,
    nudging: NudgeMode = NudgeMode.SYMMETRIC,
    fd_eps: float = 1e-5,
) -> GradientEstimate:
    """Parametric-final-value estimator for reversible systems.

    Free phase: integrate from the fixed initial data.  Nudged phase:
    integrate the cost-augmented flow forward from the velocity-reversed
    free endpoint with time-reversed inputs; reversibility makes the result
    the time-reversed nudged solution that terminates at the free endpoint.
    One boundary term survives, built from the parameter derivative of the
    velocity gradient at the fixed initial data (a closed-form central
    difference, no re-integration).
    """
    started = time.perf_counter()
    th = as_params(theta)
    nudging = NudgeMode(nudging)
    if not model.reversible:
        raise ValueError("the final-value construction requires a velocity-even model")
    if not cost.position_only:
        raise ValueError("the final-value construction requires a position-only cost")

    free = integrate_lagrangian_ivp(model, th, spec.position, spec.velocity, grid, x)
    xs = x.values if x is not None else None
    free_params = _grad_params_rows(model, free.positions, free.velocities, th, xs)

    x_rev = x.time_reversed() if x is not None else None
    y_rev = y.time_reversed()
    end_position = free.positions[-1]
    end_velocity = free.velocities[-1]

    # d/d theta of dL/dv at the pinned initial data; exactly zero whenever the
    # velocity gradient carries no parameters.
    x0 = None if xs is None else xs[0]
    boundary_jac = np.empty((model.dim, th.shape[0]))
    for j in range(th.shape[0]):
        th_p, th_m = th.copy(), th.copy()
        th_p[j] += fd_eps
        th_m[j] -= fd_eps
        gp = np.asarray(model.grad_velocity(spec.position, spec.velocity, th_p, x0), dtype=float)
        gm = np.asarray(model.grad_velocity(spec.position, spec.velocity, th_m, x0), dtype=float)
        boundary_jac[:, j] = (gp - gm) / (2.0 * fd_eps)

    values = {}
    for b in _signed_betas(beta, nudging):
        back = integrate_lagrangian_ivp(
            model, th, end_position, -end_velocity, grid, x_rev, nudge=Nudge(b, cost, y_rev)
        )
        nudged_positions = back.positions[::-1]
        nudged_velocities = -back.velocities[::-1]
        nudged_params = _grad_params_rows(model, nudged_positions, nudged_velocities, th, xs)
        value = trapezoid(nudged_params - free_params, grid.dt)
        value = value + boundary_jac.T @ (back.positions[-1] - spec.position)
        values[b] = value / b
    return _timed_estimate(values, beta, nudging, EstimatorMethod.PFVP, started)
