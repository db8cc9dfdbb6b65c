"""Ground-truth evaluation of policies on the sampled beta-indexed systems.

The moment models are truncations; final performance claims are always
checked here, by integrating the original parameterized dynamics over a
uniform grid of beta samples and averaging with trapezoid weights.  The
per-beta integrations share the control table and are vectorized across
the sample axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ode import PolicyTable, TimeGrid
from .systems import OMEGA_X, OMEGA_Y

__all__ = [
    "EnsembleRun",
    "ExcitationMetrics",
    "simulate_linear_ensemble",
    "simulate_bloch_ensemble",
    "beta_average",
    "excitation_metrics",
]


@dataclass(frozen=True)
class EnsembleRun:
    """States of every sampled system at every grid node.

    states[b, i] is the state of the beta_samples[b] system at node i;
    the trailing dimension is 1 for scalar ensembles and 3 for Bloch.
    """

    beta_samples: np.ndarray    # (beta_count,)
    grid: TimeGrid
    states: np.ndarray          # (beta_count, steps+1, state_dim)

    def __post_init__(self) -> None:
        betas = np.asarray(self.beta_samples, dtype=float)
        states = np.asarray(self.states, dtype=float)
        assert betas.ndim == 1 and betas.size >= 2
        assert states.ndim == 3
        assert states.shape[0] == betas.size, "one state row per beta sample"
        assert states.shape[1] == self.grid.steps + 1, "one state per grid node"
        object.__setattr__(self, "beta_samples", betas)
        object.__setattr__(self, "states", states)

    @property
    def final_states(self) -> np.ndarray:
        return self.states[:, -1, :]


@dataclass(frozen=True)
class ExcitationMetrics:
    """Bloch excitation summary: beta-averaged x1 profile and endpoints.

    The beta average uses trapezoid weights over the uniform sample grid,
    normalized to the interval length.
    """

    beta_samples: np.ndarray     # (beta_count,)
    mean_x1_final: float
    min_x1_final: float
    x1_final: np.ndarray         # per-beta x1 at the final node
    mean_x1_vs_time: np.ndarray  # beta-averaged x1 at every grid node

    def __post_init__(self) -> None:
        assert np.isfinite(self.mean_x1_final)
        assert self.x1_final.shape == self.beta_samples.shape
        assert self.min_x1_final <= self.mean_x1_final + 1e-12


def _rk4_sweep(deriv, x0: np.ndarray, policy: PolicyTable) -> np.ndarray:
    grid = policy.grid
    h = grid.h
    steps = grid.steps
    controls = policy.controls
    out = np.empty((x0.shape[0], steps + 1, x0.shape[1]))
    out[:, 0] = x0
    state = x0
    for i in range(steps):
        u0 = controls[i]
        u1 = controls[i + 1]
        u_half = 0.5 * (u0 + u1)
        k1 = deriv(state, u0)
        k2 = deriv(state + 0.5 * h * k1, u_half)
        k3 = deriv(state + 0.5 * h * k2, u_half)
        k4 = deriv(state + h * k3, u1)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[:, i + 1] = state
    return out


def simulate_linear_ensemble(policy: PolicyTable, beta_count: int,
                             grid: TimeGrid) -> EnsembleRun:
    """Integrate xdot = beta x + u(t), x(0) = 1, over beta in [-1, 1]."""
    assert beta_count >= 2, "need at least two beta samples"
    assert policy.grid == grid, "policy must live on the requested grid"
    assert policy.control_dim == 1, "scalar ensembles take a scalar control"
    betas = np.linspace(-1.0, 1.0, beta_count)
    x0 = np.ones((beta_count, 1))

    def deriv(state, u):
        return betas[:, None] * state + u[0]

    return EnsembleRun(beta_samples=betas, grid=grid,
                       states=_rk4_sweep(deriv, x0, policy))


def simulate_bloch_ensemble(policy: PolicyTable, delta: float, beta_count: int,
                            grid: TimeGrid) -> EnsembleRun:
    """Integrate xdot = beta (u Omega_y + v Omega_x) x over [1-delta, 1+delta].

    Every sample starts at the north pole (0, 0, 1); the policy carries the
    two control channels (u, v) as its columns.
    """
    assert beta_count >= 2, "need at least two beta samples"
    assert 0.0 < delta < 1.0, "delta must lie in (0, 1)"
    assert policy.grid == grid, "policy must live on the requested grid"
    assert policy.control_dim == 2, "Bloch ensembles take (u, v) controls"
    betas = np.linspace(1.0 - delta, 1.0 + delta, beta_count)
    x0 = np.zeros((beta_count, 3))
    x0[:, 2] = 1.0

    def deriv(state, uv):
        generator = uv[0] * OMEGA_Y + uv[1] * OMEGA_X
        return betas[:, None] * (state @ generator.T)

    return EnsembleRun(beta_samples=betas, grid=grid,
                       states=_rk4_sweep(deriv, x0, policy))


def beta_average(run: EnsembleRun, values: np.ndarray) -> np.ndarray:
    """Normalized trapezoid average over the beta axis (first axis)."""
    count = run.beta_samples.size
    weights = np.full(count, 1.0)
    weights[0] = weights[-1] = 0.5
    weights /= weights.sum()
    return np.tensordot(weights, values, axes=(0, 0))


def excitation_metrics(run: EnsembleRun) -> ExcitationMetrics:
    """Beta-averaged x1 transfer profile of a Bloch ensemble run."""
    assert run.states.shape[2] == 3, "excitation metrics need a Bloch run"
    x1 = run.states[:, :, 0]
    mean_vs_time = beta_average(run, x1)
    x1_final = x1[:, -1].copy()
    return ExcitationMetrics(
        beta_samples=run.beta_samples,
        mean_x1_final=float(mean_vs_time[-1]),
        min_x1_final=float(x1_final.min()),
        x1_final=x1_final,
        mean_x1_vs_time=mean_vs_time,
    )
