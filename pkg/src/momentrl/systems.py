"""Truncated moment-system models behind a common system-model contract.

Two concrete systems are shipped: the scalar linear ensemble turned into an
LQR problem in moment coordinates, and the Bloch ensemble with an rf-field
inhomogeneity.  Each model supplies its vector field, rewards, the
closed-form Hamiltonian minimizer, and the right-hand sides of the backward
(deltaV, DV, D2V) equations used by the policy search:

    d deltaV/dt = H(m, u, DV) - H(m, u~, DV)
    d DV/dt     = -DH - D2V (F(m, u~) - F(m, u))
    d D2V/dt    = -D2H - DF' D2V - D2V DF
                  + [dDH/du + (dF/du)' D2V]' (d2H/du2)^{-1} [dDH/du + (dF/du)' D2V]

with u~ the minimizer of H along the nominal trajectory and DF, DH evaluated
at u~.
"""

from __future__ import annotations

import abc

import numpy as np

from .basis import BasisSpec, MomentVector, basis_integrals, default_rule, moment_transform

__all__ = [
    "MomentVector",
    "SystemModel",
    "LqrMomentModel",
    "BlochMomentModel",
    "OMEGA_X",
    "OMEGA_Y",
    "build_lqr",
    "build_bloch",
]

# Angular-momentum generators of rotations about the x and y axes.
OMEGA_X = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
OMEGA_Y = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])


class SystemModel(abc.ABC):
    """Contract between the moment models and the integrator / policy search."""

    block_dim: int
    control_dim: int

    @property
    @abc.abstractmethod
    def state_dim(self) -> int:
        """Length of the flattened moment state."""

    @abc.abstractmethod
    def vector_field(self, m: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Time derivative of the moment state under control u."""

    @abc.abstractmethod
    def running_reward(self, m: np.ndarray, u: np.ndarray) -> float:
        """Integrand of the cumulative reward."""

    @abc.abstractmethod
    def terminal_reward(self, m: np.ndarray) -> float:
        """Terminal cost K at the final state."""

    @abc.abstractmethod
    def terminal_gradient(self, m: np.ndarray) -> np.ndarray:
        """DK, the exact gradient of terminal_reward."""

    @abc.abstractmethod
    def terminal_hessian(self, m: np.ndarray) -> np.ndarray:
        """D2K, the exact Hessian of terminal_reward."""

    @abc.abstractmethod
    def argmin_hamiltonian(self, m: np.ndarray, dv: np.ndarray) -> np.ndarray:
        """Closed-form minimizer of H(m, ., dv) over controls."""

    @abc.abstractmethod
    def hamiltonian_control_gradient(
        self, m: np.ndarray, u: np.ndarray, dv: np.ndarray
    ) -> np.ndarray:
        """Gradient of H with respect to the control (stationarity diagnostics)."""

    @abc.abstractmethod
    def control_hessian(self) -> np.ndarray:
        """d2H/du2; constant for both shipped models."""

    @abc.abstractmethod
    def backward_rhs(
        self,
        m: np.ndarray,
        u: np.ndarray,
        u_star: np.ndarray,
        dv: np.ndarray,
        w: np.ndarray,
    ) -> tuple[float, np.ndarray, np.ndarray]:
        """Forward-time derivatives (d deltaV, d DV, d D2V) at one instant.

        m, u are the nominal state and control, u_star the Hamiltonian
        minimizer at (m, dv), and dv, w the current DV and D2V.
        """

    @abc.abstractmethod
    def riccati_blocks(
        self, m: np.ndarray, u_star: np.ndarray, dv: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coefficient blocks (M11, M12, M21) of the D2V equation.

        The d D2V/dt right-hand side is quadratic in W = D2V and factors as

            dW/dt = M21 - M11' W - W M11 - W M12 W

        with blocks that depend only on (m, u~, DV).  The backward
        integrator propagates the equivalent linear flow
        d(X, Y)/dt = (M11 X + M12 Y, M21 X - M11' Y) and recovers
        W = Y X^-1; see rk4_backward for why.
        """

    def backward_rhs_first(
        self,
        m: np.ndarray,
        u: np.ndarray,
        u_star: np.ndarray,
        dv: np.ndarray,
        w: np.ndarray,
    ) -> tuple[float, np.ndarray]:
        """The (d deltaV/dt, d DV/dt) pair of backward_rhs only.

        The matrix-fraction backward integrator advances D2V through the
        linear (X, Y) flow and never consumes d D2V/dt, so models may
        override this to skip the Hessian work.  The default truncates
        backward_rhs; overrides must stay consistent with it.
        """
        d_delta, d_dv, _ = self.backward_rhs(m, u, u_star, dv, w)
        return d_delta, d_dv

    def hamiltonian(self, m: np.ndarray, u: np.ndarray, dv: np.ndarray) -> float:
        return self.running_reward(m, u) + float(dv @ self.vector_field(m, u))


class LqrMomentModel(SystemModel):
    """Order-N truncation of the linear ensemble's moment system.

    dm/dt = A m + B u with A = (L + R)/2 for the shift operators L, R and
    B = (b_0, ..., b_N); cumulative reward
    int (||m||^2 + 2 u^2) dt + ||m(T)||^2.
    """

    block_dim = 1
    control_dim = 1

    def __init__(self, N: int, exact_row0: bool = False):
        assert N >= 0
        self.N = N
        self.exact_row0 = exact_row0
        A = np.zeros((N + 1, N + 1))
        for i in range(N):
            A[i, i + 1] = 0.5
            A[i + 1, i] = 0.5
        if exact_row0 and N >= 1:
            # exact identity eta T_0 = T_1 instead of the (L+R)/2 row
            A[0, 1] = 1.0
        self.A = A
        self.B = basis_integrals(N)
        self._eye = np.eye(N + 1)
        self._m12 = -0.25 * np.outer(self.B, self.B)
        self._m21 = -2.0 * self._eye

    @property
    def state_dim(self) -> int:
        return self.N + 1

    def initial_moments(self) -> MomentVector:
        """Moments of the constant initial profile x0 == 1."""
        rule = default_rule(self.N)
        return moment_transform(np.ones(rule.nodes.size), BasisSpec(order_max=self.N), rule)

    def vector_field(self, m, u):
        return self.A @ m + self.B * u[0]

    def running_reward(self, m, u):
        return float(m @ m + 2.0 * u[0] * u[0])

    def terminal_reward(self, m):
        return float(m @ m)

    def terminal_gradient(self, m):
        return 2.0 * m

    def terminal_hessian(self, m):
        return 2.0 * self._eye

    def argmin_hamiltonian(self, m, dv):
        return np.array([-0.25 * (dv @ self.B)])

    def hamiltonian_control_gradient(self, m, u, dv):
        return np.array([4.0 * u[0] + dv @ self.B])

    def control_hessian(self):
        return np.array([[4.0]])

    def backward_rhs(self, m, u, u_star, dv, w):
        du = u[0] - u_star[0]
        d_delta = 2.0 * du * du
        wb = w @ self.B
        d_dv = -(2.0 * m + self.A.T @ dv) - wb * (u_star[0] - u[0])
        d_w = -2.0 * self._eye - self.A.T @ w - w @ self.A + 0.25 * np.outer(wb, wb)
        return d_delta, d_dv, d_w

    def backward_rhs_first(self, m, u, u_star, dv, w):
        du = u[0] - u_star[0]
        d_dv = -(2.0 * m + self.A.T @ dv) - (w @ self.B) * (u_star[0] - u[0])
        return 2.0 * du * du, d_dv

    def riccati_blocks(self, m, u_star, dv):
        return self.A, self._m12, self._m21


class BlochMomentModel(SystemModel):
    """Order-N truncation of the Bloch ensemble's moment system.

    dm/dt = (u B_y + v B_x) m with B_a = S (x) Omega_a and
    S = (delta/2)(L + R) + I; cumulative reward
    int (u^2 + v^2) dt + terminal_weight * ||m(T) - m_F||^2 steering the
    transform of (0,0,1)' to the transform of (1,0,0)'.

    terminal_weight trades terminal fidelity against control energy.  At
    the default weight the optimal pulse is a plain rotation in a single
    control axis, which cannot excite the whole ensemble uniformly; large
    weights make two-axis pulses optimal and push the ensemble mean of
    x1(T) up.
    """

    block_dim = 3
    control_dim = 2

    def __init__(self, N: int, delta: float, terminal_weight: float = 1.0):
        assert N >= 0
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta = {delta} outside (0, 1)")
        assert terminal_weight > 0.0
        self.N = N
        self.delta = delta
        self.terminal_weight = terminal_weight
        S = np.eye(N + 1)
        for i in range(N):
            S[i, i + 1] = delta / 2.0
            S[i + 1, i] = delta / 2.0
        self.S = S
        self.Bx = np.kron(S, OMEGA_X)
        self.By = np.kron(S, OMEGA_Y)
        self.m0 = self._constant_moments([0.0, 0.0, 1.0])
        self.mF = self._constant_moments([1.0, 0.0, 0.0])
        self._eye = np.eye(3 * (N + 1))

    def _constant_moments(self, direction) -> np.ndarray:
        # moments of the pushforward measure on [1-delta, 1+delta], whose
        # density against the canonical measure on [-1, 1] is delta
        spec = BasisSpec(order_max=self.N, center=1.0, halfwidth=self.delta,
                         measure_scale=self.delta)
        rule = default_rule(self.N)
        samples = np.tile(direction, (rule.nodes.size, 1))
        return moment_transform(samples, spec, rule).values

    @property
    def state_dim(self) -> int:
        return 3 * (self.N + 1)

    def initial_moments(self) -> MomentVector:
        return MomentVector(values=self.m0.copy(), block_dim=3)

    def vector_field(self, m, u):
        return u[0] * (self.By @ m) + u[1] * (self.Bx @ m)

    def running_reward(self, m, u):
        return float(u[0] * u[0] + u[1] * u[1])

    def terminal_reward(self, m):
        diff = m - self.mF
        return float(self.terminal_weight * (diff @ diff))

    def terminal_gradient(self, m):
        return 2.0 * self.terminal_weight * (m - self.mF)

    def terminal_hessian(self, m):
        return 2.0 * self.terminal_weight * self._eye

    def argmin_hamiltonian(self, m, dv):
        return np.array([-0.5 * (dv @ (self.By @ m)), -0.5 * (dv @ (self.Bx @ m))])

    def hamiltonian_control_gradient(self, m, u, dv):
        return np.array([2.0 * u[0] + dv @ (self.By @ m),
                         2.0 * u[1] + dv @ (self.Bx @ m)])

    def control_hessian(self):
        return 2.0 * np.eye(2)

    def backward_rhs(self, m, u, u_star, dv, w):
        du, dvv = u[0] - u_star[0], u[1] - u_star[1]
        d_delta = du * du + dvv * dvv
        by_m = self.By @ m
        bx_m = self.Bx @ m
        G = u_star[0] * self.By + u_star[1] * self.Bx
        d_dv = -(G.T @ dv) - w @ ((u_star[0] - u[0]) * by_m + (u_star[1] - u[1]) * bx_m)
        bracket_u = self.By.T @ dv + w @ by_m
        bracket_v = self.Bx.T @ dv + w @ bx_m
        d_w = (-G.T @ w - w @ G
               + 0.5 * (np.outer(bracket_u, bracket_u) + np.outer(bracket_v, bracket_v)))
        return d_delta, d_dv, d_w

    def backward_rhs_first(self, m, u, u_star, dv, w):
        du, dvv = u[0] - u_star[0], u[1] - u_star[1]
        d_delta = du * du + dvv * dvv
        d_dv = (-(u_star[0] * (self.By.T @ dv) + u_star[1] * (self.Bx.T @ dv))
                - w @ ((u_star[0] - u[0]) * (self.By @ m)
                       + (u_star[1] - u[1]) * (self.Bx @ m)))
        return d_delta, d_dv

    def riccati_blocks(self, m, u_star, dv):
        by_m = self.By @ m
        bx_m = self.Bx @ m
        cy = self.By.T @ dv
        cx = self.Bx.T @ dv
        G = u_star[0] * self.By + u_star[1] * self.Bx
        m11 = G - 0.5 * (np.outer(by_m, cy) + np.outer(bx_m, cx))
        m12 = -0.5 * (np.outer(by_m, by_m) + np.outer(bx_m, bx_m))
        m21 = 0.5 * (np.outer(cy, cy) + np.outer(cx, cx))
        return m11, m12, m21


def build_lqr(N: int, exact_row0: bool = False) -> LqrMomentModel:
    """Construct the order-N LQR moment model."""
    return LqrMomentModel(N, exact_row0=exact_row0)


def build_bloch(N: int, delta: float,
                terminal_weight: float = 1.0) -> BlochMomentModel:
    """Construct the order-N Bloch moment model with inhomogeneity halfwidth delta."""
    return BlochMomentModel(N, delta, terminal_weight=terminal_weight)
