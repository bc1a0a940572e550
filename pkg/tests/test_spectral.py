import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcoord.acceptance import random_spd_space, random_transform, rho_space
from funcoord.errors import NonHermitianError, SingularTransformError
from funcoord.grid import SampledFunction, derivative_op, make_grid, multiplication_op, pairing, sample
from funcoord.linop import DUAL, LinOp
from funcoord.spaces import l2_space
from funcoord.spectral import (eigen_clusters, fix_phase, generalized_eigs, metric_from_unbounded,
                               offdiag_mass, proper_basis, spectral_decomposition,
                               verify_proper_basis_orthogonality)
from funcoord.transforms import conjugate_operator, hermitian_conjugate, pullback_functional

seeds = st.integers(0, 2 ** 32 - 1)
CIRCLE = make_grid([(0.0, 2 * math.pi, 64, True)])
UNIFORM = make_grid([(0.0, 1.0, 32, True)])


def cvec(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def hermitian_in(space, rng):
    """Random operator Hermitian with respect to ``space``: ``M^{-1} H``."""
    n = space.grid.size
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return LinOp(np.linalg.solve(space.gram, h + h.conj().T), space.grid, space.grid)


@pytest.fixture(scope="module")
def momentum_pairs():
    return generalized_eigs(derivative_op(CIRCLE).scaled(-1j))


class TestGeneralizedEigs:
    def test_integer_spectrum(self, momentum_pairs):
        lam = np.array([p.eigenvalue for p in momentum_pairs])
        for p in range(-10, 11):
            assert np.min(np.abs(lam - p)) < 1e-8

    @pytest.mark.parametrize("p", [-10, -3, 1, 7, 10])
    def test_plane_wave_functionals(self, momentum_pairs, p):
        pair = min(momentum_pairs, key=lambda q: abs(q.eigenvalue - p))
        expected = fix_phase(np.exp(1j * p * CIRCLE.nodes[:, 0]))
        assert pair.functional.side == DUAL
        assert np.max(np.abs(pair.functional.values - expected)) < 1e-6
        assert pair.residual < 1e-8

    def test_sorted(self, momentum_pairs):
        lam = [p.eigenvalue for p in momentum_pairs]
        keys = [(round(v.real, 9), round(v.imag, 9)) for v in lam]
        assert keys == sorted(keys)

    def test_position(self):
        g = make_grid([(-1.0, 1.0, 17)])
        pairs = generalized_eigs(multiplication_op(g, lambda x: x))
        np.testing.assert_array_equal([p.eigenvalue.real for p in pairs], g.nodes[:, 0])
        for k, p in enumerate(pairs):
            spike = np.zeros(g.size)
            spike[k] = 1.0
            np.testing.assert_allclose(p.functional.values, spike, atol=1e-15)

    def test_identity(self):
        pairs = generalized_eigs(LinOp(np.eye(32), UNIFORM, UNIFORM))
        assert all(p.eigenvalue == 1 for p in pairs)
        assert eigen_clusters([p.eigenvalue for p in pairs]) == [(1 + 0j, 32)]

    def test_defective(self):
        g = make_grid([(0.0, 1.0, 4)])
        jordan = np.eye(4) + np.diag(np.ones(3), 1)
        with pytest.raises(SingularTransformError):
            generalized_eigs(LinOp(jordan, g, g))

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_eigen_relation(self, seed):
        rng = np.random.default_rng(seed)
        g = make_grid([(0.0, 1.0, 12)])
        A = LinOp(rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12)), g, g)
        for pair in generalized_eigs(A):
            phi = SampledFunction(g, cvec(rng, 12))
            lhs = pairing(pair.functional, A(phi))
            rhs = pair.eigenvalue * pairing(pair.functional, phi)
            assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(lhs))

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_hermitian_real(self, seed):
        A = hermitian_in(l2_space(UNIFORM), np.random.default_rng(seed))
        lam = np.array([p.eigenvalue for p in generalized_eigs(A)])
        assert np.max(np.abs(lam.imag)) < 1e-10 * np.max(np.abs(lam))

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_conjugation_covariance(self, seed):
        rng = np.random.default_rng(seed)
        g = make_grid([(0.0, 1.0, 12)])
        h = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        A = LinOp(h + h.conj().T, g, g)
        om = random_transform(g, rng)
        At = conjugate_operator(om, A)
        pairs = generalized_eigs(A)
        pairs_t = generalized_eigs(At)
        np.testing.assert_allclose([p.eigenvalue.real for p in pairs_t], [p.eigenvalue.real for p in pairs],
                                   atol=1e-8 * max(1.0, abs(pairs[0].eigenvalue)))
        for p in pairs:
            ft = pullback_functional(om, p.functional)
            psi = SampledFunction(g, cvec(rng, 12))
            lhs = pairing(ft, At(psi))
            assert abs(lhs - p.eigenvalue * pairing(ft, psi)) < 1e-8 * max(1.0, abs(lhs))

    def test_clusters(self):
        out = eigen_clusters([0.0, 1.0, 1.0 + 1e-12, 2.0])
        assert [m for _, m in out] == [1, 2, 1]
        np.testing.assert_allclose([v for v, _ in out], [0, 1, 2], atol=1e-11)


class TestProperBasis:
    def test_diagonal_operator(self):
        d = np.arange(32, dtype=float)[::-1]
        res = proper_basis(LinOp(np.diag(d), UNIFORM, UNIFORM), l2_space(UNIFORM))
        k = np.abs(res.kappa.matrix)
        # one entry per row and column: a scaled permutation
        assert np.all(np.sum(k > 1e-12, axis=0) == 1)
        assert np.all(np.sum(k > 1e-12, axis=1) == 1)
        np.testing.assert_allclose(res.eigenvalues.values, np.sort(d))

    def test_momentum(self):
        A = derivative_op(CIRCLE).scaled(-1j)
        res = proper_basis(A, l2_space(CIRCLE))
        lam = res.eigenvalues.values
        np.testing.assert_allclose(lam, np.round(lam), atol=1e-9)
        assert res.residual < 1e-9
        # rows of kappa are plane waves up to phase
        x = CIRCLE.nodes[:, 0]
        for j in (5, 20, 40):
            p = int(round(lam[j]))
            row = res.kappa.matrix[j]
            if p == 0:
                continue
            overlap = abs(np.vdot(np.exp(-1j * p * x), row)) / (np.linalg.norm(row) * 8.0)
            assert overlap == pytest.approx(1.0, abs=1e-9)

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_random_hermitian(self, seed):
        res = proper_basis(hermitian_in(l2_space(UNIFORM), np.random.default_rng(seed)), l2_space(UNIFORM))
        assert res.residual < 1e-10

    def test_non_hermitian(self):
        with pytest.raises(NonHermitianError):
            proper_basis(derivative_op(CIRCLE), l2_space(CIRCLE))

    def test_l2_orthogonal(self):
        s = l2_space(UNIFORM)
        res = proper_basis(hermitian_in(s, np.random.default_rng(1)), s)
        assert verify_proper_basis_orthogonality(res, s)["offdiag"] < 1e-10

    def test_smoothing_space_orthogonal(self):
        s = rho_space()
        res = proper_basis(hermitian_in(s, np.random.default_rng(2)), s)
        assert verify_proper_basis_orthogonality(res, s)["offdiag"] < 1e-8

    def test_non_eigen_basis_control(self):
        s = random_spd_space(UNIFORM, np.random.default_rng(3))
        res = proper_basis(hermitian_in(s, np.random.default_rng(4)), s)
        rng = np.random.default_rng(5)
        basis = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        assert verify_proper_basis_orthogonality(res, s, basis)["offdiag"] > 1e-2

    def test_agrees_with_generalized_eigs(self):
        s = l2_space(UNIFORM)
        A = hermitian_in(s, np.random.default_rng(6))
        res = proper_basis(A, s)
        pairs = generalized_eigs(A)
        w = UNIFORM.weights
        for j, p in enumerate(pairs):
            assert p.eigenvalue.real == pytest.approx(res.eigenvalues.values[j], abs=1e-10)
            row = fix_phase(np.conj(res.kappa.matrix[j]) / w)
            assert np.max(np.abs(row - p.functional.values)) < 1e-8


@pytest.fixture(scope="module")
def case():
    s = random_spd_space(UNIFORM, np.random.default_rng(7))
    A = hermitian_in(s, np.random.default_rng(8))
    return s, A, proper_basis(A, s)


class TestDecomposition:
    def test_eigenvector_spike(self, case):
        s, A, res = case
        j = 11
        coeffs, c = spectral_decomposition(SampledFunction(UNIFORM, res.vectors[:, j]), res)
        spike = np.zeros(32)
        spike[j] = 1.0
        np.testing.assert_allclose(coeffs.values, spike, atol=1e-10)
        assert 0 < c <= 1

    def test_parseval(self, case):
        s, A, res = case
        phi = SampledFunction(UNIFORM, cvec(np.random.default_rng(9), 32))
        coeffs, _ = spectral_decomposition(phi, res)
        a = verify_proper_basis_orthogonality(res, s)["diagonal"]
        assert np.sum(a * np.abs(coeffs.values) ** 2) == pytest.approx(s.norm(phi) ** 2, rel=1e-9)

    def test_action_law(self, case):
        s, A, res = case
        phi = SampledFunction(UNIFORM, cvec(np.random.default_rng(10), 32))
        lhs = spectral_decomposition(A(phi), res)[0].values
        rhs = res.eigenvalues.values * spectral_decomposition(phi, res)[0].values
        assert np.max(np.abs(lhs - rhs)) < 1e-9 * np.max(np.abs(rhs))

    def test_functional_through_basis(self, case):
        s, A, res = case
        rng = np.random.default_rng(11)
        f = SampledFunction(UNIFORM, cvec(rng, 32), DUAL)
        phi = SampledFunction(UNIFORM, cvec(rng, 32))
        inv = LinOp(res.vectors, res.kappa.codomain, UNIFORM)
        ft = inv.adjoint()(f)
        coeffs = spectral_decomposition(phi, res)[0]
        lhs = pairing(f, A(phi))
        rhs = pairing(ft, SampledFunction(coeffs.grid, res.eigenvalues.values * coeffs.values))
        assert abs(lhs - rhs) < 1e-9 * abs(lhs)

    def test_hermitian_conjugate_consistent(self, case):
        s, A, res = case
        assert np.max(np.abs(hermitian_conjugate(A, s).matrix - A.matrix)) < 1e-8 * np.max(np.abs(A.matrix))


class TestUnbounded:
    def test_identity(self):
        s = metric_from_unbounded(LinOp(np.eye(32), UNIFORM, UNIFORM), l2_space(UNIFORM))
        np.testing.assert_allclose(s.metric.matrix, np.eye(32), atol=1e-14)

    def test_shifted_derivative(self):
        A = derivative_op(CIRCLE) + LinOp(np.eye(64), CIRCLE, CIRCLE)
        s = metric_from_unbounded(A, l2_space(CIRCLE))
        l2 = l2_space(CIRCLE)
        rng = np.random.default_rng(12)
        for _ in range(20):
            f = SampledFunction(CIRCLE, cvec(rng, 64))
            assert abs(s.norm(A(f)) - l2.norm(f)) < 1e-9 * l2.norm(f)

    def test_diagonal_growth(self):
        A = LinOp(np.diag(np.arange(1.0, 33.0)), UNIFORM, UNIFORM)
        s = metric_from_unbounded(A, l2_space(UNIFORM))
        l2 = l2_space(UNIFORM)
        f = SampledFunction(UNIFORM, cvec(np.random.default_rng(13), 32))
        assert s.norm(A(f)) / l2.norm(f) == pytest.approx(1.0, abs=1e-10)

    def test_singular(self):
        with pytest.raises(SingularTransformError):
            metric_from_unbounded(derivative_op(CIRCLE), l2_space(CIRCLE))

    def test_requires_l2(self):
        s = random_spd_space(UNIFORM, np.random.default_rng(14))
        with pytest.raises(ValueError):
            metric_from_unbounded(LinOp(np.eye(32), UNIFORM, UNIFORM), s)


def test_offdiag_mass():
    assert offdiag_mass(np.eye(3)) == 0.0
    assert offdiag_mass(np.zeros((2, 2))) == 0.0
    assert offdiag_mass(np.ones((2, 2))) == pytest.approx(math.sqrt(0.5))
