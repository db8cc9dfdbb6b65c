"""Time grids, trajectory containers, and fixed-step RK4 integration.

The forward and backward integrators share one uniform grid so that states,
controls, and the backward value derivatives line up node-for-node.  States
and controls are interpolated linearly at RK4 half-steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import MomentVector
from .systems import SystemModel

__all__ = [
    "NumericalError",
    "TimeGrid",
    "PolicyTable",
    "Trajectory",
    "BackwardPassResult",
    "default_grid",
    "rk4_forward",
    "rk4_backward",
    "cumulative_reward",
]


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class NumericalError(RuntimeError):
    """Raised when an integration produces non-finite values."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of steps+1 nodes on [t0, T]."""

    t0: float
    T: float
    steps: int

    def __post_init__(self) -> None:
        assert self.T > self.t0, "grid must have positive length"
        assert self.steps >= 1, "grid needs at least one step"

    @property
    def h(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t0, self.T, self.steps + 1)


def default_grid() -> TimeGrid:
    """200 RK4 steps on [0, 1], the experiments' default discretization."""
    return TimeGrid(t0=0.0, T=1.0, steps=200)


@dataclass(frozen=True)
class PolicyTable:
    """Control values on the grid nodes; linear interpolation in between.

    The control dimension is independent of the truncation order, which is
    what lets one table warm-start the next hierarchy directly.
    """

    grid: TimeGrid
    controls: np.ndarray  # (steps+1, r)

    def __post_init__(self) -> None:
        controls = np.atleast_2d(np.asarray(self.controls, dtype=float))
        if controls.shape[0] == 1 and self.grid.steps + 1 != 1:
            controls = controls.T
        assert controls.shape[0] == self.grid.steps + 1, "one control per grid node"
        object.__setattr__(self, "controls", controls)

    @property
    def control_dim(self) -> int:
        return self.controls.shape[1]

    @classmethod
    def zeros(cls, grid: TimeGrid, control_dim: int) -> "PolicyTable":
        return cls(grid=grid, controls=np.zeros((grid.steps + 1, control_dim)))

    @classmethod
    def constant(cls, grid: TimeGrid, u) -> "PolicyTable":
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return cls(grid=grid, controls=np.tile(u, (grid.steps + 1, 1)))

    def at(self, t: float) -> np.ndarray:
        nodes = self.grid.nodes
        return np.array([np.interp(t, nodes, self.controls[:, j])
                         for j in range(self.controls.shape[1])])


@dataclass(frozen=True)
class Trajectory:
    """Moment states at every grid node."""

    grid: TimeGrid
    states: np.ndarray  # (steps+1, state_dim)
    block_dim: int = 1

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float)
        assert states.shape[0] == self.grid.steps + 1, "one state per grid node"
        object.__setattr__(self, "states", states)

    def state(self, i: int) -> MomentVector:
        return MomentVector(values=self.states[i].copy(), block_dim=self.block_dim)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class BackwardPassResult:
    """Per-node value-variation data from a backward pass.

    delta_v[i], dv[i], d2v[i] hold deltaV, DV, D2V at grid node i; the
    terminal node carries (0, DK(m_T), D2K(m_T)).
    """

    grid: TimeGrid
    delta_v: np.ndarray  # (steps+1,)
    dv: np.ndarray       # (steps+1, n)
    d2v: np.ndarray      # (steps+1, n, n)

    @property
    def delta_v_sup(self) -> float:
        return float(np.max(np.abs(self.delta_v)))


def _as_state(m0) -> np.ndarray:
    return np.asarray(getattr(m0, "values", m0), dtype=float)


def rk4_forward(model: SystemModel, policy: PolicyTable, m0, grid: TimeGrid) -> Trajectory:
    """Integrate dm/dt = F(m, u(t)) with classical RK4 over the grid.

    Controls are read off the policy table: node values at the endpoints of
    each step, their average at the half-step.
    """
    assert policy.grid == grid, "policy must live on the integration grid"
    m = _as_state(m0).copy()
    assert m.size == model.state_dim, "initial state dimension mismatch"
    h = grid.h
    u = policy.controls
    states = np.empty((grid.steps + 1, m.size))
    states[0] = m
    for i in range(grid.steps):
        u0, u1 = u[i], u[i + 1]
        u_half = 0.5 * (u0 + u1)
        k1 = model.vector_field(m, u0)
        k2 = model.vector_field(m + 0.5 * h * k1, u_half)
        k3 = model.vector_field(m + 0.5 * h * k2, u_half)
        k4 = model.vector_field(m + h * k3, u1)
        m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(m)):
            raise NumericalError(f"non-finite state at node {i + 1}")
        states[i + 1] = m
    return Trajectory(grid=grid, states=states, block_dim=model.block_dim)


def rk4_backward(
    model: SystemModel,
    terminal: tuple[float, np.ndarray, np.ndarray],
    trajectory: Trajectory,
    policy: PolicyTable,
) -> BackwardPassResult:
    """Integrate the coupled (deltaV, DV, D2V) equations from T down to t0.

    The nominal state and control are interpolated linearly at stage times;
    the Hamiltonian minimizer u~ is re-evaluated inside every stage from the
    stage's current DV.

    D2V is propagated in matrix-fraction form W = Y X^-1 through the linear
    (X, Y) flow supplied by the model's riccati_blocks.  A large terminal
    Hessian relaxes toward the slow manifold of the Riccati flow inside a
    boundary layer of width ~1/||W(T)||; stepping W directly would need the
    step size to resolve that layer, while the (X, Y) coefficients stay
    moderate regardless of ||W||, so the fraction form stays stable on
    practical grids.  (X, Y) is rebased to (I, W) at the start of every step,
    which keeps X well-conditioned; W is symmetrized after each step to
    suppress round-off drift.
    """
    grid = trajectory.grid
    assert policy.grid == grid, "policy and trajectory must share the grid"
    h = grid.h
    m_nodes = trajectory.states
    u_nodes = policy.controls
    n = m_nodes.shape[1]
    steps = grid.steps
    eye = np.eye(n)

    delta_v = np.empty(steps + 1)
    dv_out = np.empty((steps + 1, n))
    d2v_out = np.empty((steps + 1, n, n))
    delta, dv, w = terminal
    dv = np.asarray(dv, dtype=float).copy()
    w = np.asarray(w, dtype=float).copy()
    delta = float(delta)
    delta_v[steps] = delta
    dv_out[steps] = dv
    d2v_out[steps] = w

    argmin = model.argmin_hamiltonian
    rhs_first = model.backward_rhs_first
    blocks = model.riccati_blocks
    solve = np.linalg.solve

    def stage(m, u, dv_s, x_s, y_s):
        if x_s is eye:  # rebased stage: the fraction is already (I, W)
            w_s = y_s
        else:
            w_s = solve(x_s.T, y_s.T).T
            w_s = 0.5 * (w_s + w_s.T)
        u_star = argmin(m, dv_s)
        d_delta, d_dv = rhs_first(m, u, u_star, dv_s, w_s)
        m11, m12, m21 = blocks(m, u_star, dv_s)
        d_x = m11 @ x_s + m12 @ y_s
        d_y = m21 @ x_s - m11.T @ y_s
        return d_delta, d_dv, d_x, d_y

    for i in range(steps - 1, -1, -1):
        m1, m0 = m_nodes[i + 1], m_nodes[i]
        u1, u0 = u_nodes[i + 1], u_nodes[i]
        m_half = 0.5 * (m0 + m1)
        u_half = 0.5 * (u0 + u1)

        try:
            k1 = stage(m1, u1, dv, eye, w)
            k2 = stage(m_half, u_half, dv - 0.5 * h * k1[1],
                       eye - 0.5 * h * k1[2], w - 0.5 * h * k1[3])
            k3 = stage(m_half, u_half, dv - 0.5 * h * k2[1],
                       eye - 0.5 * h * k2[2], w - 0.5 * h * k2[3])
            k4 = stage(m0, u0, dv - h * k3[1], eye - h * k3[2], w - h * k3[3])

            delta = delta - (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            dv = dv - (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            x_end = eye - (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            y_end = w - (h / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            w = np.linalg.solve(x_end.T, y_end.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular fraction denominator at node {i}") from exc
        w = 0.5 * (w + w.T)
        if not (np.isfinite(delta) and np.all(np.isfinite(dv)) and np.all(np.isfinite(w))):
            raise NumericalError(f"non-finite backward values at node {i}")
        delta_v[i] = delta
        dv_out[i] = dv
        d2v_out[i] = w

    return BackwardPassResult(grid=grid, delta_v=delta_v, dv=dv_out, d2v=d2v_out)


def cumulative_reward(model: SystemModel, trajectory: Trajectory, policy: PolicyTable) -> float:
    """Trapezoid quadrature of the running reward plus the terminal reward."""
    grid = trajectory.grid
    assert policy.grid == grid
    r = np.array([model.running_reward(trajectory.states[i], policy.controls[i])
                  for i in range(grid.steps + 1)])
    integral = float(_trapezoid(r, dx=grid.h))
    return integral + model.terminal_reward(trajectory.final)
