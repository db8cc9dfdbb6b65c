"""Policy search on a truncated moment system.

The second-order search iterates: roll the current policy forward,
integrate the value-variation equations (deltaV, DV, D2V) backward along
the nominal trajectory, and replace the policy with the node-wise
Hamiltonian minimizer.  A threshold eta on sup_t |deltaV| stops the
iteration once a single update moves the value by more than the
second-order expansion can be trusted for; an iteration cap K bounds the
work regardless.

A first-order companion (adjoint gradient descent with Barzilai-Borwein
steps) serves to carry rough initial policies into the basin where the
second-order iteration is reliable; see first_order_search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ode import (
    BackwardPassResult,
    NumericalError,
    PolicyTable,
    Trajectory,
    cumulative_reward,
    rk4_backward,
    rk4_forward,
)
from .systems import SystemModel

__all__ = [
    "SearchConfig",
    "IterationRecord",
    "SearchResult",
    "GradientSearchConfig",
    "GradientSearchResult",
    "backward_pass",
    "improve_policy",
    "policy_search",
    "costate_gradient",
    "first_order_search",
]


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the inner policy-search loop.

    eta is the value-variation threshold: an iteration whose sup-node
    |deltaV| exceeds it is the last one applied.  max_iters caps the
    iteration count.  damping scales each policy update (1 = full step).
    converge_tol, when set, additionally stops once the sup-norm policy
    update falls below it — a conventional convergence test used for
    oracle comparisons, not part of the threshold rule.
    """

    eta: float
    max_iters: int
    hessian_floor: float = 1e-10
    damping: float = 1.0
    converge_tol: float | None = None

    def __post_init__(self) -> None:
        assert self.eta > 0.0, "eta must be positive"
        assert self.max_iters >= 1, "need at least one iteration"
        assert self.hessian_floor >= 0.0
        assert 0.0 < self.damping <= 1.0, "damping must lie in (0, 1]"
        assert self.converge_tol is None or self.converge_tol >= 0.0


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics of one applied policy update."""

    cost: float                # cumulative reward of the updated policy
    delta_v_sup: float         # max over nodes of |deltaV| in the pass
    control_update_norm: float  # sup-node, sup-component policy change

    def __post_init__(self) -> None:
        assert np.isfinite(self.cost)
        assert np.isfinite(self.delta_v_sup)
        assert np.isfinite(self.control_update_norm)


@dataclass(frozen=True)
class SearchResult:
    policy: PolicyTable
    trajectory: Trajectory
    cost: float
    log: tuple[IterationRecord, ...] = field(default_factory=tuple)


def backward_pass(model: SystemModel, trajectory: Trajectory, policy: PolicyTable,
                  hessian_floor: float = 1e-10) -> BackwardPassResult:
    """Integrate (deltaV, DV, D2V) backward along the nominal pair.

    Terminal conditions come from the model's terminal reward: deltaV(T)=0,
    DV(T) = gradient, D2V(T) = Hessian.  Raises if the control Hessian of
    the Hamiltonian loses strict convexity (it is constant for both built-in
    models, so this guards user extensions).
    """
    hess = model.control_hessian()
    if np.min(np.linalg.eigvalsh(hess)) < hessian_floor:
        raise NumericalError("control Hessian of H below the convexity floor")
    m_final = trajectory.final
    terminal = (0.0, model.terminal_gradient(m_final), model.terminal_hessian(m_final))
    return rk4_backward(model, terminal, trajectory, policy)


def improve_policy(model: SystemModel, trajectory: Trajectory,
                   bp: BackwardPassResult) -> PolicyTable:
    """Node-wise Hamiltonian minimizer along the nominal trajectory."""
    assert bp.grid == trajectory.grid, "pass and trajectory must share the grid"
    nodes = trajectory.grid.steps + 1
    controls = np.empty((nodes, model.control_dim))
    for i in range(nodes):
        controls[i] = model.argmin_hamiltonian(trajectory.states[i], bp.dv[i])
    return PolicyTable(grid=trajectory.grid, controls=controls)


def policy_search(model: SystemModel, u0: PolicyTable, m0,
                  config: SearchConfig) -> SearchResult:
    """Iterate rollout -> backward pass -> policy update.

    Every computed update is applied (damped by config.damping); the loop
    then stops early if that update's sup-node |deltaV| exceeded eta,
    otherwise runs to the iteration cap.  Returns the last policy, its
    trajectory and cost, and the per-iteration log.
    """
    grid = u0.grid
    policy = u0
    trajectory = rk4_forward(model, policy, m0, grid)
    log: list[IterationRecord] = []
    for _ in range(config.max_iters):
        bp = backward_pass(model, trajectory, policy,
                           hessian_floor=config.hessian_floor)
        minimizer = improve_policy(model, trajectory, bp)
        controls = policy.controls + config.damping * (minimizer.controls
                                                       - policy.controls)
        update_norm = float(np.max(np.abs(controls - policy.controls)))
        policy = PolicyTable(grid=grid, controls=controls)
        trajectory = rk4_forward(model, policy, m0, grid)
        cost = cumulative_reward(model, trajectory, policy)
        log.append(IterationRecord(cost=cost, delta_v_sup=bp.delta_v_sup,
                                   control_update_norm=update_norm))
        if bp.delta_v_sup > config.eta:
            break
        if config.converge_tol is not None and update_norm <= config.converge_tol:
            break
    return SearchResult(policy=policy, trajectory=trajectory,
                        cost=log[-1].cost, log=tuple(log))


@dataclass(frozen=True)
class GradientSearchConfig:
    """Knobs of the first-order (adjoint gradient) search.

    tolerance is the stationarity target: the search stops once the
    sup-node Hamiltonian control gradient |dH/du| falls below it.  The
    metric carries an O(h^2) floor on a given grid (the trapezoid-
    discretized cost is stationary slightly off the continuous-adjoint
    stationary point), so tolerances below that floor end in a stall at
    the discrete optimum with converged=False rather than convergence.
    initial_step seeds the very first step length; afterwards the
    Barzilai-Borwein length is used, capped at step_cap.  armijo is the
    sufficient-decrease fraction of the backtracking line search and
    max_halvings bounds the backtracking depth.
    """

    max_iters: int = 400
    tolerance: float = 1e-3
    initial_step: float = 1e-3
    step_cap: float = 1e4
    armijo: float = 1e-4
    max_halvings: int = 40

    def __post_init__(self) -> None:
        assert self.max_iters >= 1, "need at least one iteration"
        assert self.tolerance > 0.0, "tolerance must be positive"
        assert 0.0 < self.initial_step <= self.step_cap
        assert 0.0 < self.armijo < 1.0
        assert self.max_halvings >= 1


@dataclass(frozen=True)
class GradientSearchResult:
    policy: PolicyTable
    trajectory: Trajectory
    cost: float
    iterations: int            # accepted descent steps
    stationarity: float        # final sup-node |dH/du|
    converged: bool            # stationarity <= config.tolerance

    def __post_init__(self) -> None:
        assert np.isfinite(self.cost)
        assert self.iterations >= 0
        assert self.stationarity >= 0.0


def costate_gradient(model: SystemModel, trajectory: Trajectory,
                     policy: PolicyTable) -> np.ndarray:
    """Node-wise Hamiltonian control gradient along the costate solution.

    Integrates the costate equation dp/dt = -DH(m, u, p) backward from
    p(T) = DK along the fixed nominal pair and returns dH/du at every
    node, shaped like the policy table.  Zeros of this gradient are the
    first-order stationarity conditions of the control problem, so its
    sup-norm measures how far a policy is from stationary.
    """
    grid = trajectory.grid
    assert policy.grid == grid, "policy and trajectory must share the grid"
    steps = grid.steps
    h = grid.h
    states = trajectory.states
    controls = policy.controls
    p = model.terminal_gradient(trajectory.final)
    gradient = np.empty_like(controls)
    gradient[steps] = model.hamiltonian_control_gradient(states[steps],
                                                         controls[steps], p)
    zero_w = np.zeros((model.state_dim, model.state_dim))

    def rhs(m, u, p_s):
        # with u~ = u and W = 0 the DV equation reduces to the costate
        # equation dp/dt = -DH(m, u, p)
        return model.backward_rhs(m, u, u, p_s, zero_w)[1]

    for i in range(steps - 1, -1, -1):
        m1, m0 = states[i + 1], states[i]
        u1, u0 = controls[i + 1], controls[i]
        m_half = 0.5 * (m0 + m1)
        u_half = 0.5 * (u0 + u1)
        k1 = rhs(m1, u1, p)
        k2 = rhs(m_half, u_half, p - 0.5 * h * k1)
        k3 = rhs(m_half, u_half, p - 0.5 * h * k2)
        k4 = rhs(m0, u0, p - h * k3)
        p = p - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(p)):
            raise NumericalError(f"non-finite costate at node {i}")
        gradient[i] = model.hamiltonian_control_gradient(states[i], controls[i], p)
    return gradient


def first_order_search(model: SystemModel, u0: PolicyTable, m0,
                       config: GradientSearchConfig = GradientSearchConfig(),
                       ) -> GradientSearchResult:
    """Adjoint gradient descent on the cumulative reward over policy nodes.

    The descent direction is the Hamiltonian control gradient from
    costate_gradient scaled by each node's trapezoid quadrature weight,
    which makes it the exact gradient of the discretized cost with respect
    to the node values.  Step lengths use the Barzilai-Borwein formula
    with Armijo backtracking on the true cost; the search stops at
    stationarity (sup-node |dH/du| below config.tolerance), at the
    iteration cap, or when backtracking can no longer find a decrease.

    The second-order search converges fast near a minimizer, but with a
    heavy terminal Hessian its backward pass can diverge in finite time
    from nominals whose terminal error is still large.  Running this
    first-order stage first carries a rough initial policy into the basin
    where the second-order iteration is dependable.
    """
    grid = u0.grid
    weights = np.full(grid.steps + 1, grid.h)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    policy = u0
    trajectory = rk4_forward(model, policy, m0, grid)
    cost = cumulative_reward(model, trajectory, policy)
    gradient = costate_gradient(model, trajectory, policy)
    grad_q = gradient * weights[:, None]
    alpha = config.initial_step
    prev_controls: np.ndarray | None = None
    prev_grad_q: np.ndarray | None = None
    iterations = 0
    sup = float(np.max(np.abs(gradient)))
    while sup > config.tolerance and iterations < config.max_iters:
        if prev_controls is not None:
            du = (policy.controls - prev_controls).ravel()
            dg = (grad_q - prev_grad_q).ravel()
            denom = float(du @ dg)
            if denom > 0.0:
                alpha = float(du @ du) / denom
        alpha = min(alpha, config.step_cap)
        decrease = config.armijo * float(np.sum(grad_q * grad_q))
        accepted = False
        for _ in range(config.max_halvings):
            candidate = PolicyTable(grid=grid,
                                    controls=policy.controls - alpha * grad_q)
            cand_traj = rk4_forward(model, candidate, m0, grid)
            cand_cost = cumulative_reward(model, cand_traj, candidate)
            if cand_cost <= cost - alpha * decrease:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        prev_controls, prev_grad_q = policy.controls, grad_q
        policy, trajectory, cost = candidate, cand_traj, cand_cost
        gradient = costate_gradient(model, trajectory, policy)
        grad_q = gradient * weights[:, None]
        iterations += 1
        sup = float(np.max(np.abs(gradient)))
    return GradientSearchResult(policy=policy, trajectory=trajectory, cost=cost,
                                iterations=iterations, stationarity=sup,
                                converged=sup <= config.tolerance)
