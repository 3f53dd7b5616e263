"""Energy-based equilibrium propagation on static inputs.

The free phase relaxes the energy to a fixed point by explicit-Euler
gradient descent; the nudged phase relaxes the cost-augmented energy,
seeded from the free fixed point.  Contrasting the parameter gradients of
the energy at the two fixed points and dividing by the nudging strength
estimates the gradient of the relaxed cost.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import (
    CostModel,
    EstimatorMethod,
    GradientEstimate,
    NudgeMode,
    ParamVector,
    as_params,
)
from .errors import ConvergenceError, DivergenceError

__all__ = [
    "EnergyModel",
    "QuadraticEnergy",
    "HopfieldEnergy",
    "RelaxConfig",
    "RelaxResult",
    "relax",
    "static_ep_gradient",
]


class EnergyModel(ABC):
    """Scalar energy over a state vector, with hand-coded partials."""

    dim: int
    theta_dim: int

    @abstractmethod
    def energy(self, state, theta, x0) -> float:
        ...

    @abstractmethod
    def grad_state(self, state, theta, x0) -> np.ndarray:
        ...

    @abstractmethod
    def grad_params(self, state, theta, x0) -> np.ndarray:
        ...


class QuadraticEnergy(EnergyModel):
    """E = 1/2 s^T K s - s^T x0 with K filled symmetrically from theta.

    Parameters enumerate the upper triangle of K row-major, so dim 1 reduces
    to E = theta/2 * s^2 - s * x0.
    """

    def __init__(self, dim):
        self.dim = int(dim)
        self._entries = [(i, j) for i in range(self.dim) for j in range(i, self.dim)]
        self.theta_dim = len(self._entries)

    def _stiffness(self, theta):
        k = np.zeros((self.dim, self.dim))
        for m, (i, j) in enumerate(self._entries):
            k[i, j] = theta[m]
            k[j, i] = theta[m]
        return k

    def energy(self, state, theta, x0):
        s = np.asarray(state, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        return 0.5 * float(s @ (self._stiffness(theta) @ s)) - float(s @ x0)

    def grad_state(self, state, theta, x0):
        s = np.asarray(state, dtype=float)
        return self._stiffness(theta) @ s - np.asarray(x0, dtype=float)

    def grad_params(self, state, theta, x0):
        s = np.asarray(state, dtype=float)
        grad = np.empty(self.theta_dim)
        for m, (i, j) in enumerate(self._entries):
            grad[m] = 0.5 * s[i] * s[i] if i == j else s[i] * s[j]
        return grad


class HopfieldEnergy(EnergyModel):
    """Hopfield-style energy with tanh activations.

    E = 1/2 |s|^2 - 1/2 sigma(s)^T W(theta) sigma(s) - sigma(s)^T A x0,
    where W is symmetric with entries read from theta (upper triangle) and A
    is a fixed input coupling supplied at construction (identity by default).
    Bounded below because the quadratic confinement dominates the bounded
    activations.
    """

    def __init__(self, dim, input_matrix=None):
        self.dim = int(dim)
        self._entries = [(i, j) for i in range(self.dim) for j in range(i, self.dim)]
        self.theta_dim = len(self._entries)
        if input_matrix is None:
            input_matrix = np.eye(self.dim)
        self._input = np.array(input_matrix, dtype=float)
        if self._input.shape[0] != self.dim:
            raise ValueError(f"input matrix must have {self.dim} rows")
        self.input_dim = self._input.shape[1]

    def _weights(self, theta):
        w = np.zeros((self.dim, self.dim))
        for m, (i, j) in enumerate(self._entries):
            w[i, j] = theta[m]
            w[j, i] = theta[m]
        return w

    def energy(self, state, theta, x0):
        s = np.asarray(state, dtype=float)
        sig = np.tanh(s)
        drive = self._input @ np.asarray(x0, dtype=float)
        w = self._weights(theta)
        return 0.5 * float(s @ s) - 0.5 * float(sig @ (w @ sig)) - float(sig @ drive)

    def grad_state(self, state, theta, x0):
        s = np.asarray(state, dtype=float)
        sig = np.tanh(s)
        dsig = 1.0 - sig**2
        drive = self._input @ np.asarray(x0, dtype=float)
        w = self._weights(theta)
        return s - dsig * (w @ sig + drive)

    def grad_params(self, state, theta, x0):
        sig = np.tanh(np.asarray(state, dtype=float))
        grad = np.empty(self.theta_dim)
        for m, (i, j) in enumerate(self._entries):
            grad[m] = -0.5 * sig[i] * sig[i] if i == j else -sig[i] * sig[j]
        return grad


@dataclass(frozen=True)
class RelaxConfig:
    step: float = 0.05
    tol: float = 1e-10
    max_iters: int = 100_000

    def __post_init__(self):
        if self.step <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError("relaxation settings must all be positive")


@dataclass(frozen=True)
class RelaxResult:
    state: np.ndarray
    iterations: int
    residual: float
    energy_history: np.ndarray | None = None


def relax(
    model: EnergyModel,
    theta,
    x0,
    target=None,
    beta: float = 0.0,
    initial_state=None,
    cost: CostModel | None = None,
    config: RelaxConfig | None = None,
    record_energy: bool = False,
) -> RelaxResult:
    """Gradient-descent relaxation to a stationary point of E + beta * C.

    Convergence means the max-norm of the augmented energy gradient is at or
    below ``config.tol``; the check runs before each step, so a converged
    seed returns after zero iterations.
    """
    config = config or RelaxConfig()
    th = as_params(theta)
    if beta != 0.0 and (target is None or cost is None):
        raise ValueError("a nonzero beta requires a target and a cost model")
    s = np.zeros(model.dim) if initial_state is None else np.array(initial_state, dtype=float)
    history = [] if record_energy else None

    def grad(state):
        g = np.asarray(model.grad_state(state, th, x0), dtype=float)
        if beta != 0.0:
            g = g + beta * np.asarray(cost.grad_state(state, target), dtype=float)
        return g

    def energy(state):
        e = model.energy(state, th, x0)
        if beta != 0.0:
            e += beta * cost.cost(state, target)
        return e

    for iteration in range(config.max_iters + 1):
        g = grad(s)
        if not np.all(np.isfinite(g)):
            raise DivergenceError("relaxation diverged", step=iteration)
        residual = float(np.max(np.abs(g)))
        if history is not None:
            history.append(energy(s))
        if residual <= config.tol:
            return RelaxResult(
                state=s,
                iterations=iteration,
                residual=residual,
                energy_history=None if history is None else np.asarray(history),
            )
        if iteration == config.max_iters:
            break
        s = s - config.step * g
    raise ConvergenceError(
        f"relaxation did not reach tol={config.tol} within {config.max_iters} iterations"
    )


def static_ep_gradient(
    model: EnergyModel,
    cost: CostModel,
    theta: ParamVector,
    x0,
    target,
    beta: float,
    nudging: NudgeMode = NudgeMode.SYMMETRIC,
    initial_state=None,
    config: RelaxConfig | None = None,
) -> GradientEstimate:
    """Two-point (or three-point symmetric) static estimator.

    Each nudged relaxation is seeded from the free fixed point.
    """
    started = time.perf_counter()
    if beta == 0.0:
        raise ValueError("nudging strength beta must be nonzero")
    th = as_params(theta)
    nudging = NudgeMode(nudging)

    free = relax(model, th, x0, initial_state=initial_state, config=config)
    nudged_plus = relax(
        model, th, x0, target=target, beta=beta, cost=cost,
        initial_state=free.state, config=config,
    )
    g_plus = np.asarray(model.grad_params(nudged_plus.state, th, x0), dtype=float)

    if nudging is NudgeMode.SYMMETRIC:
        nudged_minus = relax(
            model, th, x0, target=target, beta=-beta, cost=cost,
            initial_state=free.state, config=config,
        )
        g_minus = np.asarray(model.grad_params(nudged_minus.state, th, x0), dtype=float)
        value = (g_plus - g_minus) / (2.0 * beta)
    else:
        g_free = np.asarray(model.grad_params(free.state, th, x0), dtype=float)
        value = (g_plus - g_free) / beta

    return GradientEstimate(
        value=value,
        method=EstimatorMethod.STATIC_EP,
        beta=beta,
        nudging=nudging,
        wall_time=time.perf_counter() - started,
    )
