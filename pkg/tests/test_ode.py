"""Tests for grids, trajectory containers, and the RK4 integrators."""

import numpy as np
import pytest
from scipy.linalg import expm

from momentrl.basis import MomentVector
from momentrl.ode import (
    BackwardPassResult,
    NumericalError,
    PolicyTable,
    TimeGrid,
    Trajectory,
    cumulative_reward,
    default_grid,
    rk4_backward,
    rk4_forward,
)
from momentrl.oracle import riccati_finite
from momentrl.systems import build_bloch, build_lqr


def test_time_grid_basics():
    grid = TimeGrid(t0=0.0, T=2.0, steps=4)
    assert grid.h == 0.5
    np.testing.assert_allclose(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_time_grid_guards():
    with pytest.raises(AssertionError):
        TimeGrid(t0=1.0, T=1.0, steps=10)
    with pytest.raises(AssertionError):
        TimeGrid(t0=0.0, T=1.0, steps=0)


def test_default_grid():
    grid = default_grid()
    assert grid == TimeGrid(t0=0.0, T=1.0, steps=200)


def test_policy_table_shapes_and_interpolation():
    grid = TimeGrid(0.0, 1.0, 4)
    table = PolicyTable(grid=grid, controls=np.arange(5.0))
    assert table.controls.shape == (5, 1)
    assert table.control_dim == 1
    # linear interpolation between nodes
    assert table.at(0.125)[0] == pytest.approx(0.5)

    zeros = PolicyTable.zeros(grid, control_dim=2)
    assert zeros.controls.shape == (5, 2)
    assert np.all(zeros.controls == 0.0)

    const = PolicyTable.constant(grid, [1.5, -2.0])
    assert const.controls.shape == (5, 2)
    np.testing.assert_allclose(const.at(0.37), [1.5, -2.0])


def test_trajectory_state_returns_copy():
    grid = TimeGrid(0.0, 1.0, 2)
    traj = Trajectory(grid=grid, states=np.ones((3, 2)), block_dim=1)
    m = traj.state(1)
    assert isinstance(m, MomentVector)
    m.values[0] = 99.0
    assert traj.states[1, 0] == 1.0
    np.testing.assert_allclose(traj.final, [1.0, 1.0])


def test_forward_zero_drift_scalar():
    # order-0 linear model has A = 0, so m stays put under zero control
    model = build_lqr(0)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 1)
    traj = rk4_forward(model, policy, np.array([2.0]), grid)
    np.testing.assert_allclose(traj.states[:, 0], 2.0)


def test_forward_matches_matrix_exponential_autonomous():
    model = build_lqr(3)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 1)
    m0 = model.initial_moments().values
    traj = rk4_forward(model, policy, m0, grid)
    exact = expm(model.A) @ m0
    np.testing.assert_allclose(traj.final, exact, atol=1e-10)


def test_forward_matches_matrix_exponential_constant_control():
    # m' = A m + B with m0 = 0: exact answer via the augmented exponential
    model = build_lqr(1)
    grid = default_grid()
    policy = PolicyTable.constant(grid, 1.0)
    traj = rk4_forward(model, policy, np.zeros(2), grid)
    n = model.state_dim
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = model.A
    aug[:n, n] = model.B
    exact = expm(aug)[:n, n]
    np.testing.assert_allclose(traj.final, exact, atol=1e-9)


def test_forward_bloch_quarter_turn():
    # constant u = pi/2 for one time unit rotates z onto -x (and -pi/2 onto +x)
    model = build_bloch(0, delta=0.4)
    grid = default_grid()
    m0 = model.initial_moments().values
    np.testing.assert_allclose(m0, [0.0, 0.0, 0.8], atol=1e-12)

    policy = PolicyTable.constant(grid, [np.pi / 2.0, 0.0])
    traj = rk4_forward(model, policy, m0, grid)
    exact = expm((np.pi / 2.0) * model.By) @ m0
    np.testing.assert_allclose(traj.final, exact, atol=1e-8)
    np.testing.assert_allclose(traj.final, [-0.8, 0.0, 0.0], atol=1e-8)

    back = PolicyTable.constant(grid, [-np.pi / 2.0, 0.0])
    traj_back = rk4_forward(model, back, m0, grid)
    np.testing.assert_allclose(traj_back.final, [0.8, 0.0, 0.0], atol=1e-8)


def test_forward_fourth_order_convergence():
    # error against the matrix-exponential oracle should shrink ~16x per halving
    model = build_lqr(2)
    m0 = model.initial_moments().values
    n = model.state_dim
    a, b = 0.3, -0.8  # u(t) = a + b t

    aug = np.zeros((n + 2, n + 2))
    aug[:n, :n] = model.A
    aug[:n, n] = b * model.B
    aug[:n, n + 1] = a * model.B
    aug[n, n + 1] = 1.0
    exact = (expm(aug) @ np.concatenate([m0, [0.0, 1.0]]))[:n]

    errors = []
    for steps in (25, 50, 100):
        grid = TimeGrid(0.0, 1.0, steps)
        policy = PolicyTable(grid=grid, controls=a + b * grid.nodes)
        traj = rk4_forward(model, policy, m0, grid)
        errors.append(np.max(np.abs(traj.final - exact)))
    assert 12.0 < errors[0] / errors[1] < 20.0
    assert 12.0 < errors[1] / errors[2] < 20.0


def test_forward_rejects_mismatched_grid():
    model = build_lqr(1)
    policy = PolicyTable.zeros(TimeGrid(0.0, 1.0, 50), 1)
    with pytest.raises(AssertionError):
        rk4_forward(model, policy, np.zeros(2), TimeGrid(0.0, 1.0, 100))


class _BlowUpModel:
    """dm/dt = m^2 escapes to infinity in finite time."""

    state_dim = 1
    block_dim = 1

    def vector_field(self, m, u):
        return m * m


@pytest.mark.filterwarnings("ignore:overflow")
def test_forward_reports_nonfinite_node():
    grid = TimeGrid(0.0, 1.0, 100)
    policy = PolicyTable.zeros(grid, 1)
    with pytest.raises(NumericalError) as err:
        rk4_forward(_BlowUpModel(), policy, np.array([3.0]), grid)
    assert "node" in str(err.value)


def test_cumulative_reward_constant_state():
    model = build_lqr(0)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 1)
    traj = rk4_forward(model, policy, np.array([2.0]), grid)
    # running reward 4 over unit time plus terminal 4
    assert cumulative_reward(model, traj, policy) == pytest.approx(8.0, abs=1e-12)


def test_cumulative_reward_zero_state():
    model = build_lqr(1)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 1)
    traj = rk4_forward(model, policy, np.zeros(2), grid)
    assert cumulative_reward(model, traj, policy) == 0.0


def test_cumulative_reward_bloch_at_target():
    model = build_bloch(2, delta=0.2)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 2)
    traj = rk4_forward(model, policy, model.mF.copy(), grid)
    assert cumulative_reward(model, traj, policy) == pytest.approx(0.0, abs=1e-12)


def test_reward_quadrature_second_order():
    model = build_lqr(2)
    m0 = model.initial_moments().values
    values = {}
    for steps in (50, 100, 200, 400):
        grid = TimeGrid(0.0, 1.0, steps)
        policy = PolicyTable.zeros(grid, 1)
        traj = rk4_forward(model, policy, m0, grid)
        values[steps] = cumulative_reward(model, traj, policy)
    # Richardson limit from the two finest grids (trapezoid error ~ C h^2)
    limit = values[400] + (values[400] - values[200]) / 3.0
    e50 = abs(values[50] - limit)
    e100 = abs(values[100] - limit)
    assert 3.0 < e50 / e100 < 5.0


def _terminal_conditions(model, m_final):
    return 0.0, model.terminal_gradient(m_final), model.terminal_hessian(m_final)


def test_backward_terminal_values_exact():
    model = build_lqr(2)
    grid = TimeGrid(0.0, 1.0, 20)
    policy = PolicyTable.constant(grid, 0.3)
    traj = rk4_forward(model, policy, model.initial_moments().values, grid)
    terminal = _terminal_conditions(model, traj.final)
    result = rk4_backward(model, terminal, traj, policy)
    assert isinstance(result, BackwardPassResult)
    assert result.delta_v[-1] == 0.0
    np.testing.assert_array_equal(result.dv[-1], terminal[1])
    np.testing.assert_array_equal(result.d2v[-1], terminal[2])


def test_backward_scalar_hessian_matches_riccati():
    # order 0: D2V(t) = 2 P(t) for the scalar Riccati dP/dt = 2P^2 - 1, P(1) = 1
    model = build_lqr(0)
    grid = default_grid()
    policy = PolicyTable.constant(grid, 0.37)
    traj = rk4_forward(model, policy, np.array([2.0]), grid)
    result = rk4_backward(model, _terminal_conditions(model, traj.final), traj, policy)

    sol = riccati_finite(model.A, model.B, np.eye(1), 2.0 * np.eye(1), np.eye(1), grid)
    assert np.max(np.abs(result.d2v[:, 0, 0] - 2.0 * sol.P[:, 0, 0])) <= 1e-7


def test_backward_hessian_is_nominal_independent():
    # the D2V equation of the linear model does not involve the nominal pair
    model = build_lqr(3)
    grid = TimeGrid(0.0, 1.0, 150)
    m0 = model.initial_moments().values
    results = []
    for u in (0.0, -1.2):
        policy = PolicyTable.constant(grid, u)
        traj = rk4_forward(model, policy, m0, grid)
        results.append(rk4_backward(model, _terminal_conditions(model, traj.final),
                                    traj, policy))
    assert np.max(np.abs(results[0].d2v - results[1].d2v)) <= 1e-12

    sol = riccati_finite(model.A, model.B, np.eye(model.state_dim), 2.0,
                         np.eye(model.state_dim), grid)
    assert np.max(np.abs(results[0].d2v - 2.0 * sol.P)) <= 1e-7


def test_backward_bloch_at_target_is_flat():
    # nominal sitting on the target with zero control: no first-order variation
    model = build_bloch(1, delta=0.2)
    grid = TimeGrid(0.0, 1.0, 100)
    policy = PolicyTable.zeros(grid, 2)
    traj = rk4_forward(model, policy, model.mF.copy(), grid)
    result = rk4_backward(model, _terminal_conditions(model, traj.final), traj, policy)
    assert np.max(np.abs(result.delta_v)) <= 1e-13
    assert np.max(np.abs(result.dv)) <= 1e-13
    assert result.delta_v_sup <= 1e-13
    # the Hessian still propagates and stays symmetric positive semidefinite
    assert np.max(np.abs(result.d2v - np.transpose(result.d2v, (0, 2, 1)))) <= 1e-12
    assert np.min(np.linalg.eigvalsh(result.d2v[0])) >= -1e-10


@pytest.mark.parametrize("N", [2, 6])
def test_backward_forward_consistency(N):
    # linear-quadratic exactness: deltaV(t0) is the gap between the nominal
    # cost and the true optimal cost
    model = build_lqr(N)
    grid = default_grid()
    policy = PolicyTable.zeros(grid, 1)
    m0 = model.initial_moments().values
    traj = rk4_forward(model, policy, m0, grid)
    nominal_cost = cumulative_reward(model, traj, policy)

    n = model.state_dim
    sol = riccati_finite(model.A, model.B, np.eye(n), 2.0, np.eye(n), grid)
    optimal_cost = sol.optimal_cost(m0)
    assert optimal_cost < nominal_cost

    result = rk4_backward(model, _terminal_conditions(model, traj.final), traj, policy)
    gap = optimal_cost - nominal_cost
    assert result.delta_v[0] < 0.0
    assert abs(result.delta_v[0] - gap) <= 1e-4 * abs(gap)
