"""Independent linear-quadratic ground truth and the convergence demos.

Two solvers that share no code with the policy search: a backward RK4
integration of the finite-horizon matrix Riccati equation, and Kleinman
policy iteration for the discounted infinite-horizon problem.  On top of
them sit the two convergence-study tables: the sampled high-dimensional
LQR family (whose successive policies fail to settle) and its moment-space
counterpart (whose successive policies do).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .basis import basis_integrals
from .ode import NumericalError, TimeGrid
from .systems import build_lqr

__all__ = [
    "RiccatiSolution",
    "ConvergenceRow",
    "ConvergenceTable",
    "riccati_finite",
    "kleinman_discounted",
    "sampled_demo",
    "frl_infinite_demo",
]


@dataclass(frozen=True)
class RiccatiSolution:
    """P(t) and the feedback gains K(t) = R^{-1} B' P(t) on a time grid."""

    grid: TimeGrid
    P: np.ndarray      # (steps+1, n, n)
    gains: np.ndarray  # (steps+1, r, n)

    def optimal_cost(self, x0: np.ndarray) -> float:
        """x0' P(t0) x0, the optimal cost-to-go from the initial node."""
        x0 = np.asarray(x0, dtype=float)
        return float(x0 @ self.P[0] @ x0)


def _control_matrices(B, R):
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return B, R, np.linalg.inv(R)


def riccati_finite(A, B, Q, R, P_T, grid: TimeGrid) -> RiccatiSolution:
    """Solve -dP/dt = Q + A'P + PA - P B R^{-1} B' P backward from P(T) = P_T.

    Classical RK4 on the matrix ODE, symmetrizing after every step.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    B, R, Rinv = _control_matrices(B, R)

    def minus_pdot(P):
        PB = P @ B
        return Q + A.T @ P + P @ A - PB @ Rinv @ PB.T

    h = grid.h
    P = np.asarray(P_T, dtype=float).copy()
    out = np.empty((grid.steps + 1,) + P.shape)
    out[grid.steps] = P
    for i in range(grid.steps - 1, -1, -1):
        k1 = minus_pdot(P)
        k2 = minus_pdot(P + 0.5 * h * k1)
        k3 = minus_pdot(P + 0.5 * h * k2)
        k4 = minus_pdot(P + h * k3)
        P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)):
            raise NumericalError(f"Riccati blow-up at node {i}")
        out[i] = P
    gains = np.einsum("ij,jk,tkl->til", Rinv, B.T, out)
    return RiccatiSolution(grid=grid, P=out, gains=gains)


def _lyapunov_kron(Acl: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve Acl' P + P Acl = C as a dense linear system in vec(P)."""
    n = Acl.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(A'P) = kron(Acl', I) vec(P), vec(P Acl) = kron(I, Acl') vec(P)
    M = np.kron(Acl.T, eye) + np.kron(eye, Acl.T)
    P = np.linalg.solve(M, C.reshape(-1)).reshape(n, n)
    return 0.5 * (P + P.T)


def _kleinman_path(A, B, Q, R, rho, tol, max_iters):
    """P iterates of the policy iteration, last entry converged."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    B, R, Rinv = _control_matrices(B, R)
    n = A.shape[0]
    A_shift = A - 0.5 * rho * np.eye(n)
    K = np.zeros((B.shape[1], n))
    path = []
    for _ in range(max_iters):
        Acl = A_shift - B @ K
        P = _lyapunov_kron(Acl, -(Q + K.T @ R @ K))
        K = Rinv @ B.T @ P
        if path and np.max(np.abs(P - path[-1])) <= tol:
            path.append(P)
            return path
        path.append(P)
    raise NumericalError(f"Kleinman iteration did not converge in {max_iters} steps")


def kleinman_discounted(A, B, Q, R, rho: float, tol: float = 1e-10,
                        max_iters: int = 100) -> np.ndarray:
    """Solve rho P = Q + A'P + PA - P B R^{-1} B' P by policy iteration.

    Works on the shifted system A - (rho/2) I, which the discount makes
    stable enough that the zero gain initializes the iteration.  Each step
    solves a Lyapunov equation for the current gain, then updates the gain;
    the P iterates decrease monotonically to the stabilizing solution.
    """
    return _kleinman_path(A, B, Q, R, rho, tol, max_iters)[-1]


@dataclass(frozen=True)
class ConvergenceRow:
    """One hierarchy (or sample size) of a convergence study."""

    index: int           # n for the sampled demo, N for the moment demo
    value: float         # V*(x0)
    value_diff: float    # |V*_idx - V*_prev|; nan on the first row
    policy_diff: float   # sup_t |u*_idx(t) - u*_prev(t)|; nan on the first row
    param_count: int
    wall_time_s: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    controls: np.ndarray  # (len(rows), sim nodes) closed-loop control signals


_SIM_GRID = TimeGrid(t0=0.0, T=5.0, steps=500)


def _simulate_closed_loop(Acl: np.ndarray, x0: np.ndarray,
                          grid: TimeGrid = _SIM_GRID) -> np.ndarray:
    """RK4 states (nodes, n) of dx/dt = Acl x."""
    h = grid.h
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((grid.steps + 1, x.size))
    out[0] = x
    for i in range(grid.steps):
        k1 = Acl @ x
        k2 = Acl @ (x + 0.5 * h * k1)
        k3 = Acl @ (x + 0.5 * h * k2)
        k4 = Acl @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x
    return out


def _table_rows(indices, values, control_signals, param_counts, times):
    rows = []
    for j, idx in enumerate(indices):
        if j == 0:
            vdiff = pdiff = float("nan")
        else:
            vdiff = abs(values[j] - values[j - 1])
            pdiff = float(np.max(np.abs(control_signals[j] - control_signals[j - 1])))
        rows.append(ConvergenceRow(index=idx, value=values[j], value_diff=vdiff,
                                   policy_diff=pdiff, param_count=param_counts[j],
                                   wall_time_s=times[j]))
    return ConvergenceTable(rows=tuple(rows), controls=np.asarray(control_signals))


def sampled_demo(n_values, rho: float = 2.5, grid: TimeGrid = _SIM_GRID) -> ConvergenceTable:
    """Discounted LQR over uniformly sampled scalar systems, per sample size n.

    For each n, the plant is diag(a_1..a_n) with a_i = -1 + 2(i-1)/(n-1),
    B all ones, reward x'x/n + u^2 discounted at rho.  The learned gain is
    played back on the plain closed loop xdot = (A - BK) x from x0 = ones;
    the recorded policy signal u(t) = -K x(t) is what successive-n
    comparisons are made on.
    """
    values, signals, params, times = [], [], [], []
    for n in n_values:
        assert n >= 2
        a = np.array([-1.0 + 2.0 * (i - 1.0) / (n - 1.0) for i in range(1, n + 1)])
        A = np.diag(a)
        B = np.ones((n, 1))
        Q = np.eye(n) / n
        t0 = time.perf_counter()
        P = kleinman_discounted(A, B, Q, 1.0, rho)
        K = B.T @ P  # R = 1
        elapsed = time.perf_counter() - t0
        x0 = np.ones(n)
        states = _simulate_closed_loop(A - B @ K, x0, grid)
        values.append(float(x0 @ P @ x0))
        signals.append(-(states @ K[0]))
        params.append(n * (n + 1) // 2)
        times.append(elapsed)
    return _table_rows(list(n_values), values, signals, params, times)


def frl_infinite_demo(N_values, rho: float = 2.5, grid: TimeGrid = _SIM_GRID) -> ConvergenceTable:
    """Discounted LQR on the moment hierarchy, per truncation order N.

    Each order solves the discounted problem for the order-N moment model
    (Q = I, R = 2) and plays the gain back on the discounted-equivalent
    closed loop (A - (rho/2) I - BK), whose trajectories decay; the control
    signals from successive orders are compared on the shared sim grid.
    """
    values, signals, params, times = [], [], [], []
    for N in N_values:
        model = build_lqr(N)
        B = model.B.reshape(-1, 1)
        t0 = time.perf_counter()
        P = kleinman_discounted(model.A, B, np.eye(N + 1), 2.0, rho)
        K = 0.5 * B.T @ P  # R = 2
        elapsed = time.perf_counter() - t0
        m0 = basis_integrals(N)
        Acl = model.A - 0.5 * rho * np.eye(N + 1) - B @ K
        states = _simulate_closed_loop(Acl, m0, grid)
        values.append(float(m0 @ P @ m0))
        signals.append(-(states @ K[0]))
        params.append((N + 1) * (N + 2) // 2)
        times.append(elapsed)
    return _table_rows(list(N_values), values, signals, params, times)
