"""Chebyshev basis, Gauss-Legendre quadrature, and the moment transform.

Moments of a function f on a parameter interval are the pairings
m_k = scale * integral T_k(eta) f(eta) d eta against Chebyshev polynomials
T_k under the plain Lebesgue measure on [-1, 1].  The polynomials are not
orthonormal under this pairing, so reconstruction goes through the Gram
matrix G_jk = integral T_j T_k d eta rather than a transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BasisSpec",
    "QuadratureRule",
    "MomentVector",
    "eval_basis",
    "basis_matrix",
    "basis_integrals",
    "gauss_legendre",
    "default_rule",
    "moment_transform",
    "gram_matrix",
    "reconstruct",
]

_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """Basis configuration: truncation order plus the affine parameter domain.

    The canonical domain is [-1, 1] with Lebesgue measure (center 0,
    halfwidth 1, measure_scale 1).  An interval [c - delta, c + delta] maps
    onto it through eta = (beta - c) / delta; pushing the Lebesgue measure
    through that map multiplies integrals by delta, which is what
    measure_scale carries.
    """

    order_max: int
    center: float = 0.0
    halfwidth: float = 1.0
    measure_scale: float = 1.0

    def __post_init__(self) -> None:
        assert self.order_max >= 0, "truncation order must be nonnegative"
        assert self.halfwidth > 0.0, "domain halfwidth must be positive"
        assert self.measure_scale > 0.0, "measure scale must be positive"

    def to_canonical(self, beta):
        """Map points of the parameter interval onto [-1, 1]."""
        return (np.asarray(beta, dtype=float) - self.center) / self.halfwidth

    def from_canonical(self, eta):
        """Map canonical points back to the parameter interval."""
        return self.center + self.halfwidth * np.asarray(eta, dtype=float)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights for integration over [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        assert nodes.ndim == 1 and nodes.shape == weights.shape
        assert np.all(np.abs(nodes) <= 1.0 + _DOMAIN_TOL), "nodes must lie in [-1, 1]"
        assert np.all(weights > 0.0), "weights must be positive"
        assert abs(weights.sum() - 2.0) <= 1e-12, "weights must sum to |[-1, 1]| = 2"
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class MomentVector:
    """Truncated moment sequence, stored as contiguous R^d blocks by order.

    values[d*k : d*(k+1)] is the k-th moment block; d = 1 for scalar
    ensembles and 3 for Bloch magnetization.
    """

    values: np.ndarray
    block_dim: int = 1

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        assert self.block_dim >= 1
        assert values.ndim == 1 and values.size % self.block_dim == 0
        assert np.all(np.isfinite(values)), "moment entries must be finite"
        object.__setattr__(self, "values", values)

    @property
    def order(self) -> int:
        return self.values.size // self.block_dim - 1

    def block(self, k: int) -> np.ndarray:
        """Return the k-th moment block as a length-d array."""
        d = self.block_dim
        return self.values[d * k : d * (k + 1)]


def eval_basis(k: int, eta: float) -> float:
    """Evaluate the Chebyshev polynomial T_k at a canonical point.

    Uses the three-term recurrence T_{k+1} = 2 eta T_k - T_{k-1}.
    """
    if abs(eta) > 1.0 + _DOMAIN_TOL:
        raise ValueError(f"eta = {eta} outside the canonical domain [-1, 1]")
    if k == 0:
        return 1.0
    t_prev, t_cur = 1.0, float(eta)
    for _ in range(k - 1):
        t_prev, t_cur = t_cur, 2.0 * eta * t_cur - t_prev
    return t_cur


def basis_matrix(order_max: int, eta: np.ndarray) -> np.ndarray:
    """Stack T_0 .. T_N row-wise over a vector of canonical points.

    Returns an (N+1, len(eta)) array; the recurrence runs vectorized over
    all points at once.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(eta) > 1.0 + _DOMAIN_TOL):
        raise ValueError("evaluation points outside the canonical domain [-1, 1]")
    out = np.empty((order_max + 1, eta.size))
    out[0] = 1.0
    if order_max >= 1:
        out[1] = eta
    for k in range(1, order_max):
        out[k + 1] = 2.0 * eta * out[k] - out[k - 1]
    return out


def basis_integrals(N: int) -> np.ndarray:
    """Integrals b_k of T_k over [-1, 1]: ((-1)^k + 1)/(1 - k^2), b_1 = 0."""
    assert N >= 0
    b = np.zeros(N + 1)
    for k in range(N + 1):
        if k != 1:
            # + 0.0 normalizes the -0.0 the formula produces at odd k
            b[k] = ((-1.0) ** k + 1.0) / (1.0 - k * k) + 0.0
    return b


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n nodes (exact for polynomials of degree 2n-1)."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes=nodes, weights=weights)


def default_rule(order_max: int) -> QuadratureRule:
    """Default quadrature: enough nodes for every polynomial integrand in scope."""
    return gauss_legendre(max(64, 2 * order_max + 8))


def moment_transform(values: np.ndarray, spec: BasisSpec, rule: QuadratureRule) -> MomentVector:
    """Compute truncated moments of a sampled function.

    Args:
        values: function samples at rule.nodes, shape (n,) for scalar
            functions or (n, d) for vector-valued ones (handled blockwise).
        spec: basis order and domain; measure_scale multiplies every moment.
        rule: quadrature nodes/weights on the canonical interval.

    Returns:
        MomentVector with m_k = scale * sum_j w_j T_k(node_j) f(node_j).
    """
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rule.nodes.size:
        raise ValueError(
            f"sample count {values.shape[0]} does not match node count {rule.nodes.size}"
        )
    tmat = basis_matrix(spec.order_max, rule.nodes)
    weighted = tmat * rule.weights
    if values.ndim == 1:
        return MomentVector(values=spec.measure_scale * (weighted @ values), block_dim=1)
    blocks = spec.measure_scale * (weighted @ values)  # (N+1, d)
    return MomentVector(values=blocks.reshape(-1), block_dim=values.shape[1])


def gram_matrix(N: int) -> np.ndarray:
    """Pairwise integrals G_jk = integral T_j T_k d eta over [-1, 1]."""
    rule = default_rule(N)
    tmat = basis_matrix(N, rule.nodes)
    return (tmat * rule.weights) @ tmat.T


def reconstruct(m: MomentVector, spec: BasisSpec, grid: np.ndarray) -> np.ndarray:
    """Invert the moment transform on an evaluation grid.

    Solves G c = m / measure_scale for the Chebyshev coefficients and
    evaluates x_hat = sum_k c_k T_k at the grid points (given in domain
    coordinates).  Returns shape (len(grid),) for scalar moments and
    (len(grid), d) for block moments.
    """
    G = gram_matrix(m.order)
    blocks = m.values.reshape(m.order + 1, m.block_dim) / spec.measure_scale
    try:
        coeffs = np.linalg.solve(G, blocks)
    except np.linalg.LinAlgError as exc:  # cannot occur for Chebyshev, guarded anyway
        raise ValueError("singular Gram system") from exc
    tmat = basis_matrix(m.order, spec.to_canonical(grid))
    out = tmat.T @ coeffs
    return out[:, 0] if m.block_dim == 1 else out
