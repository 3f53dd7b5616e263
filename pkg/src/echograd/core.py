"""Domain types and model contracts.

Conventions used throughout the package:

- All numerical state is float64.  A configuration-space state ``s`` and a
  velocity ``v`` (or momentum ``p``) are 1-d arrays of length ``dim``; a
  phase-space state concatenates them as ``(s, p)``.
- Signals and trajectories live on a uniform :class:`TimeGrid` and store one
  sample per grid point, ``n_steps + 1`` in total.  No interpolation happens
  anywhere: integrators and estimators consume grid-aligned samples only,
  which keeps forward/reversed index arithmetic exact.
- All container types are immutable after construction (arrays are copied and
  write-locked), so instances are safe to share across threads.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "TimeGrid",
    "Signal",
    "ParamVector",
    "PhaseState",
    "Trajectory",
    "EstimatorMethod",
    "NudgeMode",
    "GradientEstimate",
    "LagrangianModel",
    "HamiltonianModel",
    "CostModel",
    "trapezoid",
    "frozen_array",
]


def frozen_array(values, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Copy ``values`` into a float64 array and lock it against writes."""
    arr = np.array(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def trapezoid(values: np.ndarray, dt: float) -> np.ndarray | float:
    """Trapezoid-rule integral of per-grid-point samples.

    ``values`` has one row per grid point; vector-valued integrands are
    integrated componentwise.  The summation order is fixed so repeated runs
    are bitwise reproducible.
    """
    values = np.asarray(values, dtype=float)
    total = values.sum(axis=0) - 0.5 * (values[0] + values[-1])
    return dt * total


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with ``n_steps`` intervals of width ``dt``.

    Grid point ``k`` maps to time ``t_start + k * dt`` for ``k`` in
    ``[0, n_steps]``, so the horizon is ``n_steps * dt``.
    """

    dt: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not np.isfinite(self.t_start):
            raise ValueError("t_start must be finite")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def t_end(self) -> float:
        return self.t_start + self.horizon

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    def refined(self, factor: int = 2) -> "TimeGrid":
        """Same horizon with ``factor`` times more steps (for step-size studies)."""
        return TimeGrid(dt=self.dt / factor, n_steps=self.n_steps * factor, t_start=self.t_start)


@dataclass(frozen=True)
class Signal:
    """Vector-valued samples on a :class:`TimeGrid`, one row per grid point.

    Supports exact time-reversed read-out: ``reversed_value(k)`` returns the
    sample at index ``n_steps - k``, and :meth:`time_reversed` materialises
    the reversed signal on the same grid.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] != self.grid.n_points:
            raise ValueError(
                f"signal needs {self.grid.n_points} rows, got array of shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def value(self, k: int) -> np.ndarray:
        return self.values[k]

    def reversed_value(self, k: int) -> np.ndarray:
        return self.values[self.grid.n_steps - k]

    def time_reversed(self) -> "Signal":
        return Signal(self.grid, self.values[::-1])

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int) -> "Signal":
        return cls(grid, np.zeros((grid.n_points, dim)))

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "Signal":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(row, (grid.n_points, 1)))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn) -> "Signal":
        """Sample ``fn(t) -> vector`` at every grid time."""
        rows = [np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in grid.times()]
        return cls(grid, np.stack(rows))


@dataclass(frozen=True)
class ParamVector:
    """Flat vector of learnable parameters."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", frozen_array(self.values, "parameters", ndim=1))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def perturbed(self, index: int, delta: float) -> "ParamVector":
        """Copy with entry ``index`` shifted by ``delta`` (finite-difference probes)."""
        values = self.values.copy()
        values[index] += delta
        return ParamVector(values)

    def shifted(self, delta: np.ndarray) -> "ParamVector":
        return ParamVector(self.values + np.asarray(delta, dtype=float))


@dataclass(frozen=True)
class PhaseState:
    """Position/momentum pair; the concatenation is the full phase vector."""

    position: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        pos = frozen_array(self.position, "position", ndim=1)
        mom = frozen_array(self.momentum, "momentum", ndim=1)
        if pos.shape != mom.shape:
            raise ValueError(
                f"position and momentum must share a dimension, got {pos.shape} vs {mom.shape}"
            )
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "momentum", mom)

    @property
    def dim(self) -> int:
        return self.position.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.momentum])

    @classmethod
    def from_vector(cls, phi: np.ndarray) -> "PhaseState":
        phi = np.asarray(phi, dtype=float)
        if phi.ndim != 1 or phi.shape[0] % 2 != 0:
            raise ValueError(f"phase vector must be 1-d of even length, got shape {phi.shape}")
        d = phi.shape[0] // 2
        return cls(phi[:d], phi[d:])


_TRAJECTORY_KINDS = ("hamiltonian", "lagrangian")


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed states on a grid.

    ``conjugate`` holds momenta for the ``"hamiltonian"`` kind and velocities
    for the ``"lagrangian"`` kind; use the :attr:`momenta` / :attr:`velocities`
    accessors, which enforce the kind.
    """

    grid: TimeGrid
    kind: str
    positions: np.ndarray
    conjugate: np.ndarray

    def __post_init__(self):
        if self.kind not in _TRAJECTORY_KINDS:
            raise ValueError(f"kind must be one of {_TRAJECTORY_KINDS}, got {self.kind!r}")
        pos = frozen_array(self.positions, "positions", ndim=2)
        con = frozen_array(self.conjugate, "conjugate", ndim=2)
        if pos.shape != con.shape:
            raise ValueError("positions and conjugate arrays must have equal shapes")
        if pos.shape[0] != self.grid.n_points:
            raise ValueError(
                f"trajectory needs {self.grid.n_points} states, got {pos.shape[0]}"
            )
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "conjugate", con)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def momenta(self) -> np.ndarray:
        if self.kind != "hamiltonian":
            raise ValueError("momenta are only defined for hamiltonian trajectories")
        return self.conjugate

    @property
    def velocities(self) -> np.ndarray:
        if self.kind != "lagrangian":
            raise ValueError("velocities are only defined for lagrangian trajectories")
        return self.conjugate

    def state(self, k: int) -> PhaseState:
        if self.kind != "hamiltonian":
            raise ValueError("phase states are only defined for hamiltonian trajectories")
        return PhaseState(self.positions[k], self.conjugate[k])


class EstimatorMethod(str, Enum):
    STATIC_EP = "static_ep"
    CIVP = "civp"
    CBVP = "cbvp"
    PFVP = "pfvp"
    RHEL = "rhel"
    FD_ORACLE = "fd_oracle"


class NudgeMode(str, Enum):
    ONE_SIDED = "one_sided"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class GradientEstimate:
    """A parameter-shaped gradient plus estimator metadata.

    ``beta`` must be nonzero for every contrastive method; the finite
    difference oracle records ``beta = 0``.
    """

    value: np.ndarray
    method: EstimatorMethod
    beta: float
    nudging: NudgeMode = NudgeMode.SYMMETRIC
    wall_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "value", frozen_array(self.value, "gradient", ndim=1))
        object.__setattr__(self, "method", EstimatorMethod(self.method))
        object.__setattr__(self, "nudging", NudgeMode(self.nudging))
        if self.method is not EstimatorMethod.FD_ORACLE and self.beta == 0.0:
            raise ValueError(f"method {self.method.value} requires a nonzero beta")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")

    @property
    def dim(self) -> int:
        return self.value.shape[0]

    def as_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "beta": self.beta,
            "nudging": self.nudging.value,
            "value": [float(v) for v in self.value],
        }
        if self.wall_time is not None:
            out["wall_time_seconds"] = self.wall_time
        return out


class LagrangianModel(ABC):
    """Mechanics contract in configuration space.

    Implementations provide the scalar function and hand-coded partials with
    respect to position, velocity, and parameters, plus the velocity Hessian
    used by momentum conversion.  ``x`` is the instantaneous external input
    (``None`` when ``input_dim == 0``).

    Attributes:
        dim: state dimension.
        theta_dim: parameter dimension.
        input_dim: external input dimension (0 for autonomous models).
        reversible: the function is even in the velocity argument.
        quadratic_kinetic: the velocity Hessian is constant, so momentum
            conversion has a closed form.
    """

    dim: int
    theta_dim: int
    input_dim: int
    reversible: bool
    quadratic_kinetic: bool

    @abstractmethod
    def lagrangian(self, s, v, theta, x=None) -> float:
        ...

    @abstractmethod
    def grad_position(self, s, v, theta, x=None) -> np.ndarray:
        ...

    @abstractmethod
    def grad_velocity(self, s, v, theta, x=None) -> np.ndarray:
        ...

    @abstractmethod
    def grad_params(self, s, v, theta, x=None) -> np.ndarray:
        ...

    @abstractmethod
    def velocity_hessian(self, s, v, theta, x=None) -> np.ndarray:
        ...


class HamiltonianModel(ABC):
    """Mechanics contract in phase space.

    Attributes:
        dim: position dimension (phase dimension is ``2 * dim``).
        theta_dim, input_dim: as for :class:`LagrangianModel`.
        time_reversible: invariant under momentum flip, which is what the
            echo mechanism requires.
        separable: ``H = T(p) + V(s, x)``; enables the explicit
            kick-drift-kick integrator path.
    """

    dim: int
    theta_dim: int
    input_dim: int
    time_reversible: bool
    separable: bool

    @abstractmethod
    def hamiltonian(self, s, p, theta, x=None) -> float:
        ...

    @abstractmethod
    def grad_position(self, s, p, theta, x=None) -> np.ndarray:
        ...

    @abstractmethod
    def grad_momentum(self, s, p, theta, x=None) -> np.ndarray:
        ...

    @abstractmethod
    def grad_params(self, s, p, theta, x=None) -> np.ndarray:
        ...


class CostModel(ABC):
    """Instantaneous prediction-error term.

    ``state`` is the position vector when ``position_only`` is set, otherwise
    the full phase vector ``(s, p)``; ``grad_state`` is shaped accordingly.
    """

    position_only: bool

    @abstractmethod
    def cost(self, state, target) -> float:
        ...

    @abstractmethod
    def grad_state(self, state, target) -> np.ndarray:
        ...


def as_params(theta) -> np.ndarray:
    """Accept a ParamVector or a bare array and return the raw parameter array."""
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=float)
