"""Filtrated policy search over a hierarchy of truncation orders.

Each hierarchy solves the policy-search problem on the order-N moment
system, warm-started with the previous hierarchy's policy (the control
table lives on the time grid, so it carries over unchanged while the
state dimension grows).  Hierarchies are compared through their value
profiles V(t) along the returned trajectory; the sup-node gap between
successive profiles is the projection error that stops the outer loop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ddp import SearchConfig, policy_search
from .ode import PolicyTable, TimeGrid, Trajectory
from .systems import SystemModel

__all__ = [
    "FrlConfig",
    "HierarchyReport",
    "value_profile",
    "run_frl",
]


@dataclass(frozen=True)
class FrlConfig:
    """Outer-loop settings: order range, stopping tolerance, inner search.

    model_builder maps a truncation order to the system model for that
    order.  Orders run N0, N0+1, ..., Nmax unless an explicit increasing
    `orders` sequence overrides them.  The first hierarchy starts from
    the zero policy unless `initial_policy` supplies one; later
    hierarchies always warm-start from their predecessor.
    """

    model_builder: Callable[[int], SystemModel]
    search: SearchConfig
    grid: TimeGrid
    N0: int
    Nmax: int
    epsilon: float
    orders: tuple[int, ...] | None = None
    initial_policy: PolicyTable | None = None

    def __post_init__(self) -> None:
        assert self.N0 >= 0 and self.N0 <= self.Nmax, "need 0 <= N0 <= Nmax"
        assert self.epsilon > 0.0, "epsilon must be positive"
        if self.orders is not None:
            orders = tuple(int(N) for N in self.orders)
            assert len(orders) >= 1
            assert all(b > a for a, b in zip(orders, orders[1:])), \
                "orders must be strictly increasing"
            object.__setattr__(self, "orders", orders)
        if self.initial_policy is not None:
            assert self.initial_policy.grid == self.grid, \
                "initial policy must live on the configured grid"

    def order_sequence(self) -> tuple[int, ...]:
        if self.orders is not None:
            return self.orders
        return tuple(range(self.N0, self.Nmax + 1))


@dataclass(frozen=True)
class HierarchyReport:
    """Outcome of one hierarchy of the filtration."""

    order: int
    iterations: int
    cost: float
    projection_error: float
    wall_time_s: float
    policy: PolicyTable
    trajectory: Trajectory
    profile: np.ndarray  # value profile V(t) at every grid node

    def __post_init__(self) -> None:
        assert self.iterations >= 1
        assert self.projection_error >= 0.0


def value_profile(model: SystemModel, trajectory: Trajectory,
                  policy: PolicyTable) -> np.ndarray:
    """V(t_i) = integral of the running reward from t_i to T plus K(m(T)).

    Reverse cumulative trapezoid on the grid; node 0 reproduces
    cumulative_reward.
    """
    grid = trajectory.grid
    assert policy.grid == grid
    r = np.array([model.running_reward(trajectory.states[i], policy.controls[i])
                  for i in range(grid.steps + 1)])
    h = grid.h
    forward = np.concatenate([[0.0], np.cumsum(0.5 * h * (r[:-1] + r[1:]))])
    tail = forward[-1] - forward
    return tail + model.terminal_reward(trajectory.final)


def run_frl(config: FrlConfig) -> list[HierarchyReport]:
    """Run the filtration until the projection error drops to epsilon.

    The first hierarchy has nothing to compare against and reports an
    infinite projection error, except when it is the only one configured,
    in which case it is compared against the zero profile.  Reaching the
    last order without meeting epsilon is an ordinary outcome, not an
    error.
    """
    orders: Sequence[int] = config.order_sequence()
    single = len(orders) == 1
    reports: list[HierarchyReport] = []
    previous_profile: np.ndarray | None = None
    previous_policy: PolicyTable | None = None

    for N in orders:
        started = time.perf_counter()
        model = config.model_builder(N)
        m0 = model.initial_moments()
        if previous_policy is not None:
            u0 = previous_policy
        elif config.initial_policy is not None:
            u0 = config.initial_policy
        else:
            u0 = PolicyTable.zeros(config.grid, model.control_dim)
        result = policy_search(model, u0, m0.values, config.search)
        profile = value_profile(model, result.trajectory, result.policy)
        if previous_profile is not None:
            projection = float(np.max(np.abs(profile - previous_profile)))
        elif single:
            projection = float(np.max(np.abs(profile)))
        else:
            projection = float("inf")
        elapsed = time.perf_counter() - started
        reports.append(HierarchyReport(
            order=N,
            iterations=len(result.log),
            cost=result.cost,
            projection_error=projection,
            wall_time_s=elapsed,
            policy=result.policy,
            trajectory=result.trajectory,
            profile=profile,
        ))
        if projection <= config.epsilon:
            break
        previous_profile = profile
        previous_policy = result.policy
    return reports
