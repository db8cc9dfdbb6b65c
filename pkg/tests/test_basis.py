"""Tests for the Chebyshev basis and moment transform."""

import numpy as np
import pytest

from momentrl.basis import (
    BasisSpec,
    MomentVector,
    basis_integrals,
    basis_matrix,
    default_rule,
    eval_basis,
    gauss_legendre,
    gram_matrix,
    moment_transform,
    reconstruct,
)


def test_eval_basis_low_orders():
    assert eval_basis(0, 0.7) == 1.0
    assert eval_basis(1, 0.3) == 0.3
    assert eval_basis(2, 0.5) == pytest.approx(-0.5, abs=1e-15)
    assert eval_basis(3, 0.5) == pytest.approx(-1.0, abs=1e-15)


def test_eval_basis_matches_numpy_chebyshev():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(0, 15))
        eta = float(rng.uniform(-1, 1))
        coeffs = np.zeros(k + 1)
        coeffs[k] = 1.0
        expected = np.polynomial.chebyshev.chebval(eta, coeffs)
        assert eval_basis(k, eta) == pytest.approx(expected, abs=1e-12)


def test_eval_basis_domain_guard():
    with pytest.raises(ValueError):
        eval_basis(2, 1.001)


def test_basis_matrix_consistent_with_scalar_eval():
    eta = np.linspace(-1, 1, 17)
    tmat = basis_matrix(6, eta)
    for k in range(7):
        for j, e in enumerate(eta):
            assert tmat[k, j] == pytest.approx(eval_basis(k, e), abs=1e-13)


def test_basis_integrals_frozen_values():
    assert basis_integrals(0) == pytest.approx([2.0])
    assert basis_integrals(2) == pytest.approx([2.0, 0.0, -2.0 / 3.0])
    assert basis_integrals(4) == pytest.approx([2.0, 0.0, -2.0 / 3.0, 0.0, -2.0 / 15.0])


def test_basis_integrals_match_quadrature():
    # b_k is the transform of f == 1 with unit scale
    N = 12
    rule = default_rule(N)
    m = moment_transform(np.ones(rule.nodes.size), BasisSpec(order_max=N), rule)
    np.testing.assert_allclose(m.values, basis_integrals(N), atol=1e-12)


def test_gauss_legendre_weights_sum_to_two():
    for n in (3, 16, 64, 99):
        rule = gauss_legendre(n)
        assert abs(rule.weights.sum() - 2.0) <= 1e-12
        assert np.all(np.abs(rule.nodes) < 1.0)


def test_moment_transform_identity_function():
    N = 2
    rule = default_rule(N)
    m = moment_transform(rule.nodes.copy(), BasisSpec(order_max=N), rule)
    np.testing.assert_allclose(m.values, [0.0, 2.0 / 3.0, 0.0], atol=1e-14)


def test_moment_transform_bloch_initial_blocks():
    # constant (0,0,1)' on [1-delta, 1+delta] with pushforward scale delta
    delta = 0.4
    spec = BasisSpec(order_max=1, center=1.0, halfwidth=delta, measure_scale=delta)
    rule = default_rule(1)
    samples = np.tile([0.0, 0.0, 1.0], (rule.nodes.size, 1))
    m = moment_transform(samples, spec, rule)
    assert m.block_dim == 3
    np.testing.assert_allclose(m.block(0), [0.0, 0.0, 0.8], atol=1e-14)
    np.testing.assert_allclose(m.block(1), [0.0, 0.0, 0.0], atol=1e-14)


def test_moment_transform_length_mismatch():
    rule = default_rule(2)
    with pytest.raises(ValueError):
        moment_transform(np.ones(rule.nodes.size - 1), BasisSpec(order_max=2), rule)


def test_quadrature_exactness_on_polynomials():
    # with n nodes the rule is exact while deg(f) + N <= 2n - 1
    n = 8
    rule = gauss_legendre(n)
    N = 3
    spec = BasisSpec(order_max=N)
    rng = np.random.default_rng(1)
    for _ in range(20):
        deg = int(rng.integers(0, 2 * n - 1 - N + 1))
        coeffs = rng.uniform(-1, 1, size=deg + 1)
        poly = np.polynomial.Polynomial(coeffs)
        m = moment_transform(poly(rule.nodes), spec, rule)
        exact = []
        for k in range(N + 1):
            t_k = np.polynomial.Polynomial.cast(np.polynomial.chebyshev.Chebyshev.basis(k))
            antideriv = (t_k * poly).integ()
            exact.append(antideriv(1.0) - antideriv(-1.0))
        np.testing.assert_allclose(m.values, exact, atol=1e-12)


def test_gram_matrix_frozen_values():
    G1 = gram_matrix(1)
    np.testing.assert_allclose(G1, [[2.0, 0.0], [0.0, 2.0 / 3.0]], atol=1e-13)
    G2 = gram_matrix(2)
    assert G2[0, 2] == pytest.approx(-2.0 / 3.0, abs=1e-13)
    assert G2[2, 2] == pytest.approx(14.0 / 15.0, abs=1e-13)
    np.testing.assert_allclose(G2, G2.T, atol=1e-14)


def test_reconstruct_constant_and_identity():
    spec = BasisSpec(order_max=2)
    ones = reconstruct(MomentVector(values=np.array([2.0, 0.0, -2.0 / 3.0])), spec,
                       np.array([-1.0, 0.0, 1.0]))
    np.testing.assert_allclose(ones, [1.0, 1.0, 1.0], atol=1e-12)
    ident = reconstruct(MomentVector(values=np.array([0.0, 2.0 / 3.0, 0.0])), spec,
                        np.array([0.5]))
    np.testing.assert_allclose(ident, [0.5], atol=1e-12)


def test_reconstruct_cubic_round_trip():
    N = 3
    spec = BasisSpec(order_max=N)
    rule = default_rule(N)
    m = moment_transform(rule.nodes**3, spec, rule)
    grid = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(reconstruct(m, spec, grid), grid**3, atol=1e-10)


def test_round_trip_all_degrees():
    # every polynomial of degree <= N survives transform + reconstruct
    rng = np.random.default_rng(2)
    for N in (0, 1, 2, 5, 9):
        spec = BasisSpec(order_max=N)
        rule = default_rule(N)
        coeffs = rng.uniform(-2, 2, size=N + 1)
        poly = np.polynomial.Polynomial(coeffs)
        m = moment_transform(poly(rule.nodes), spec, rule)
        grid = np.linspace(-1, 1, 101)
        np.testing.assert_allclose(reconstruct(m, spec, grid), poly(grid), atol=1e-9)


def test_round_trip_on_affine_domain():
    # Bloch-style domain: samples of beta -> beta**2 on [0.6, 1.4]
    delta = 0.4
    spec = BasisSpec(order_max=4, center=1.0, halfwidth=delta, measure_scale=delta)
    rule = default_rule(4)
    beta = spec.from_canonical(rule.nodes)
    m = moment_transform(beta**2, spec, rule)
    grid = np.linspace(0.6, 1.4, 33)
    np.testing.assert_allclose(reconstruct(m, spec, grid), grid**2, atol=1e-9)


def test_moment_vector_block_access():
    m = MomentVector(values=np.arange(6.0), block_dim=3)
    assert m.order == 1
    np.testing.assert_array_equal(m.block(1), [3.0, 4.0, 5.0])


def test_moment_vector_rejects_nonfinite():
    with pytest.raises(AssertionError):
        MomentVector(values=np.array([1.0, np.nan]))
