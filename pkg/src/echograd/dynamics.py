"""Time integration of Hamiltonian and Lagrangian systems, plus diagnostics.

The canonical integrator is kick-drift-kick leapfrog (Stoermer-Verlet).  It
is time-symmetric step by step: running the scheme from the momentum-flipped
final state with the input read backwards reproduces the forward states up
to floating-point roundoff, which is exactly what the echo mechanism needs.
A classical rk4 stepper is provided as a deliberately non-symmetric control
and is not permitted for echo-phase runs.

Nudged flows integrate d/dt (s, p) = J dH - beta J dc.  For position-only
costs this is a plain Hamiltonian flow with the potential shifted by
-beta*c, so the nudging force simply joins the kick; the kick at step k uses
the input and target samples at grid point k.  Momentum-dependent costs (and
non-separable Hamiltonians) fall back to the generalised Stoermer-Verlet
step with fixed-point iterations for the implicit half-updates.

Lagrangian initial value problems are integrated by converting to the
Legendre-partner Hamiltonian flow and mapping momenta back to velocities, so
Lagrangian and Hamiltonian runs of partner models follow the identical
arithmetic path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CostModel,
    HamiltonianModel,
    LagrangianModel,
    PhaseState,
    Signal,
    TimeGrid,
    Trajectory,
    as_params,
)
from .errors import ConvergenceError, DivergenceError
from .legendre import forward_legendre, momentum_from_velocity, velocity_from_momentum

__all__ = [
    "Nudge",
    "IntegratorConfig",
    "SCHEMES",
    "momentum_flip",
    "integrate_hamiltonian",
    "integrate_lagrangian_ivp",
    "euler_lagrange_residual",
    "echo_retrace_check",
    "hamiltonian_series",
]

SCHEMES = ("leapfrog", "rk4")

_FIXED_POINT_TOL = 1e-13
_FIXED_POINT_MAX_ITER = 50


@dataclass(frozen=True)
class Nudge:
    """Cost admixture for the integrators: strength, cost model, target signal."""

    beta: float
    cost: CostModel
    target: Signal

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise ValueError("nudging strength must be finite")


@dataclass(frozen=True)
class IntegratorConfig:
    """Scheme selector; leapfrog is the default and the only echo-safe choice."""

    scheme: str = "leapfrog"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


def momentum_flip(state: PhaseState) -> PhaseState:
    """Negate the momentum, keep the position."""
    return PhaseState(state.position, -state.momentum)


def _check_signal(signal, grid, name):
    if signal is not None and signal.grid != grid:
        raise ValueError(f"{name} signal is not aligned to the integration grid")


def _input_values(model, x, grid):
    if model.input_dim == 0:
        if x is not None and x.dim != 0:
            raise ValueError("model takes no input but an input signal was provided")
        return None
    if x is None:
        raise ValueError("model has input coupling but no input signal was provided")
    if x.dim != model.input_dim:
        raise ValueError(f"input signal dim {x.dim} does not match model input_dim {model.input_dim}")
    _check_signal(x, grid, "input")
    return x.values


def _validate_nudge(nudge, grid):
    if nudge is None or nudge.beta == 0.0:
        return None
    _check_signal(nudge.target, grid, "target")
    return nudge


def integrate_hamiltonian(
    model: HamiltonianModel,
    theta,
    phi0: PhaseState,
    grid: TimeGrid,
    x: Signal | None = None,
    nudge: Nudge | None = None,
    scheme: str = "leapfrog",
) -> Trajectory:
    """Integrate d/dt (s, p) = J dH - beta J dc from ``phi0`` over ``grid``."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    th = as_params(theta)
    if phi0.dim != model.dim:
        raise ValueError(f"initial state dim {phi0.dim} does not match model dim {model.dim}")
    xs = _input_values(model, x, grid)
    nudge = _validate_nudge(nudge, grid)

    d, n, dt = model.dim, grid.n_steps, grid.dt

    def x_at(k):
        return None if xs is None else xs[k]

    if scheme == "rk4":
        positions, momenta = _rk4(model, th, phi0, n, dt, x_at, nudge, d)
    elif model.separable and (nudge is None or nudge.cost.position_only):
        positions, momenta = _leapfrog_separable(model, th, phi0, n, dt, x_at, nudge)
    else:
        positions, momenta = _leapfrog_implicit(model, th, phi0, n, dt, x_at, nudge, d)
    return Trajectory(grid, "hamiltonian", positions, momenta)


def _check_state(s, p, k):
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(p))):
        raise DivergenceError(f"integration diverged: non-finite state at step {k}", step=k)


def _leapfrog_separable(model, th, phi0, n, dt, x_at, nudge):
    """Kick-drift-kick for H = T(p) + V(s, x), nudge folded into the kick."""
    s = phi0.position.copy()
    p = phi0.momentum.copy()
    positions = np.empty((n + 1, s.shape[0]))
    momenta = np.empty_like(positions)
    positions[0], momenta[0] = s, p

    if nudge is not None:
        beta, cost, ys = nudge.beta, nudge.cost, nudge.target.values

    def kick_force(state, mom, k):
        f = -np.asarray(model.grad_position(state, mom, th, x_at(k)), dtype=float)
        if nudge is not None:
            f = f + beta * np.asarray(cost.grad_state(state, ys[k]), dtype=float)
        return f

    f = kick_force(s, p, 0)
    for k in range(n):
        p_half = p + 0.5 * dt * f
        s = s + dt * np.asarray(model.grad_momentum(s, p_half, th, x_at(k)), dtype=float)
        f = kick_force(s, p_half, k + 1)
        p = p_half + 0.5 * dt * f
        _check_state(s, p, k + 1)
        positions[k + 1], momenta[k + 1] = s, p
    return positions, momenta


def _leapfrog_implicit(model, th, phi0, n, dt, x_at, nudge, d):
    """Generalised Stoermer-Verlet; implicit half-updates by fixed point."""
    if nudge is not None:
        beta, cost, ys = nudge.beta, nudge.cost, nudge.target.values

    def rates(s, p, k):
        """(ds/dt, dp/dt) of the nudged flow at sample k."""
        ds = np.asarray(model.grad_momentum(s, p, th, x_at(k)), dtype=float)
        dp = -np.asarray(model.grad_position(s, p, th, x_at(k)), dtype=float)
        if nudge is not None:
            g = np.asarray(cost.grad_state(np.concatenate([s, p]), ys[k]), dtype=float)
            ds = ds - beta * g[d:]
            dp = dp + beta * g[:d]
        return ds, dp

    def fixed_point(update, start, what):
        value = start
        for _ in range(_FIXED_POINT_MAX_ITER):
            new = update(value)
            if np.max(np.abs(new - value)) <= _FIXED_POINT_TOL * (1.0 + np.max(np.abs(new))):
                return new
            value = new
        raise ConvergenceError(f"implicit leapfrog {what} update did not converge")

    s = phi0.position.copy()
    p = phi0.momentum.copy()
    positions = np.empty((n + 1, d))
    momenta = np.empty_like(positions)
    positions[0], momenta[0] = s, p

    for k in range(n):
        s_k = s
        p_half = fixed_point(lambda q: p + 0.5 * dt * rates(s_k, q, k)[1], p, "momentum")
        ds0 = rates(s_k, p_half, k)[0]
        s = fixed_point(
            lambda q: s_k + 0.5 * dt * (ds0 + rates(q, p_half, k + 1)[0]),
            s_k + dt * ds0,
            "position",
        )
        p = p_half + 0.5 * dt * rates(s, p_half, k + 1)[1]
        _check_state(s, p, k + 1)
        positions[k + 1], momenta[k + 1] = s, p
    return positions, momenta


def _rk4(model, th, phi0, n, dt, x_at, nudge, d):
    """Classical rk4 with zero-order-hold inputs over each step.

    Not time-symmetric; exists as the negative control for retrace tests.
    """
    if nudge is not None:
        beta, cost, ys = nudge.beta, nudge.cost, nudge.target.values

    def field(z, k):
        s, p = z[:d], z[d:]
        ds = np.asarray(model.grad_momentum(s, p, th, x_at(k)), dtype=float)
        dp = -np.asarray(model.grad_position(s, p, th, x_at(k)), dtype=float)
        if nudge is not None:
            if cost.position_only:
                dp = dp + beta * np.asarray(cost.grad_state(s, ys[k]), dtype=float)
            else:
                g = np.asarray(cost.grad_state(z, ys[k]), dtype=float)
                ds = ds - beta * g[d:]
                dp = dp + beta * g[:d]
        return np.concatenate([ds, dp])

    z = phi0.as_vector().copy()
    positions = np.empty((n + 1, d))
    momenta = np.empty_like(positions)
    positions[0], momenta[0] = z[:d], z[d:]
    for k in range(n):
        k1 = field(z, k)
        k2 = field(z + 0.5 * dt * k1, k)
        k3 = field(z + 0.5 * dt * k2, k)
        k4 = field(z + dt * k3, k)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_state(z[:d], z[d:], k + 1)
        positions[k + 1], momenta[k + 1] = z[:d], z[d:]
    return positions, momenta


def integrate_lagrangian_ivp(
    model: LagrangianModel,
    theta,
    position,
    velocity,
    grid: TimeGrid,
    x: Signal | None = None,
    nudge: Nudge | None = None,
    scheme: str = "leapfrog",
) -> Trajectory:
    """Integrate the Euler-Lagrange flow from fixed initial position/velocity.

    Runs the Legendre-partner Hamiltonian flow and maps momenta back, so the
    position sequence is arithmetic-identical to a partner Hamiltonian run.
    """
    if nudge is not None and nudge.beta != 0.0 and not nudge.cost.position_only:
        raise ValueError("Lagrangian nudging requires a position-only cost")
    th = as_params(theta)
    partner = forward_legendre(model)
    x0 = x.value(0) if x is not None and model.input_dim > 0 else None
    p0 = momentum_from_velocity(model, np.asarray(position, dtype=float),
                                np.asarray(velocity, dtype=float), th, x0)
    traj = integrate_hamiltonian(partner, th, PhaseState(position, p0), grid, x, nudge, scheme)
    velocities = np.empty_like(traj.positions)
    for k in range(grid.n_points):
        xk = x.value(k) if x is not None and model.input_dim > 0 else None
        velocities[k] = velocity_from_momentum(model, traj.positions[k], traj.momenta[k], th, xk)
    return Trajectory(grid, "lagrangian", traj.positions, velocities)


def euler_lagrange_residual(
    model: LagrangianModel,
    traj: Trajectory,
    theta,
    x: Signal | None = None,
    beta: float = 0.0,
    cost: CostModel | None = None,
    target: Signal | None = None,
) -> Signal:
    """Pointwise Euler-Lagrange defect of a stored trajectory.

    At every interior grid point this evaluates the configuration gradient of
    the (optionally nudged) Lagrangian minus the centered-difference time
    derivative of its velocity gradient.  Boundary points are excluded.  For
    a well-integrated trajectory the result shrinks as O(dt^2); a corrupted
    state shows up as a large defect at its neighbours.
    """
    if traj.kind != "lagrangian":
        raise ValueError("euler_lagrange_residual expects a lagrangian-view trajectory")
    if traj.n_points < 4:
        raise ValueError("trajectory is too short for an interior residual (need >= 4 points)")
    if beta != 0.0 and (cost is None or target is None):
        raise ValueError("a nonzero beta requires a cost model and a target signal")
    if beta != 0.0 and not cost.position_only:
        raise ValueError("Lagrangian nudging requires a position-only cost")
    th = as_params(theta)
    grid = traj.grid
    xs = _input_values(model, x, grid)
    _check_signal(target, grid, "target")

    n = grid.n_steps
    pos, vel = traj.positions, traj.velocities

    def x_at(k):
        return None if xs is None else xs[k]

    grad_v = np.empty_like(pos)
    for k in range(n + 1):
        grad_v[k] = model.grad_velocity(pos[k], vel[k], th, x_at(k))

    residual = np.empty((n - 1, traj.dim))
    for k in range(1, n):
        el = np.asarray(model.grad_position(pos[k], vel[k], th, x_at(k)), dtype=float)
        if beta != 0.0:
            el = el + beta * np.asarray(cost.grad_state(pos[k], target.value(k)), dtype=float)
        residual[k - 1] = el - (grad_v[k + 1] - grad_v[k - 1]) / (2.0 * grid.dt)

    interior = TimeGrid(dt=grid.dt, n_steps=n - 2, t_start=grid.t_start + grid.dt)
    return Signal(interior, residual)


def echo_retrace_check(
    model: HamiltonianModel,
    theta,
    phi0: PhaseState,
    grid: TimeGrid,
    x: Signal | None = None,
    scheme: str = "leapfrog",
) -> float:
    """Forward-integrate, momentum-flip, re-integrate on reversed input,
    momentum-flip again, and return the worst deviation from the forward run.
    """
    forward = integrate_hamiltonian(model, theta, phi0, grid, x, scheme=scheme)
    flipped = momentum_flip(forward.state(grid.n_steps))
    x_rev = x.time_reversed() if x is not None else None
    back = integrate_hamiltonian(model, theta, flipped, grid, x_rev, scheme=scheme)
    pos_err = np.abs(back.positions[::-1] - forward.positions)
    mom_err = np.abs(-back.momenta[::-1] - forward.momenta)
    return float(max(pos_err.max(), mom_err.max()))


def hamiltonian_series(model: HamiltonianModel, traj: Trajectory, theta,
                       x: Signal | None = None) -> np.ndarray:
    """Hamiltonian evaluated at every stored state (energy-drift diagnostics)."""
    th = as_params(theta)
    xs = _input_values(model, x, traj.grid)
    values = np.empty(traj.n_points)
    for k in range(traj.n_points):
        xk = None if xs is None else xs[k]
        values[k] = model.hamiltonian(traj.positions[k], traj.momenta[k], th, xk)
    return values
