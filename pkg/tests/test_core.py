import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermalize.core import (
    SIGMA_X,
    SIGMA_Z,
    check_density_matrix,
    clamp_and_renormalize,
    hermitian_eigendecomposition,
    is_density_matrix,
    is_repairable,
    matrix_function,
    maximally_mixed,
    pure_to_density,
    rk4_step_matrix,
)
from thermalize.errors import DomainError, InvalidDensityMatrix, NotHermitian

from conftest import random_density


def test_eigendecomposition_identity():
    vals, vecs = hermitian_eigendecomposition(np.eye(2))
    assert np.allclose(vals, [1, 1])
    assert np.allclose(vecs.conj().T @ vecs, np.eye(2), atol=1e-9)


def test_eigendecomposition_pauli_x():
    vals, _ = hermitian_eigendecomposition(SIGMA_X)
    assert np.allclose(vals, [-1, 1], atol=1e-12)


def test_eigendecomposition_pure_projector():
    vals, _ = hermitian_eigendecomposition([[0.8, 0.4], [0.4, 0.2]])
    assert np.allclose(vals, [0, 1], atol=1e-12)


def test_eigendecomposition_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        hermitian_eigendecomposition([[1, 1], [0, 1]])


@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3)))
def test_eigendecomposition_of_diagonal_returns_sorted_entries(d):
    vals, _ = hermitian_eigendecomposition(np.diag(d))
    assert np.allclose(vals, np.sort(d), atol=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_eigendecomposition_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = a + a.conj().T
    vals, vecs = hermitian_eigendecomposition(m)
    assert np.all(np.diff(vals) >= 0)
    assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.conj().T - m)) <= 1e-9
    assert np.max(np.abs(vecs.conj().T @ vecs - np.eye(n))) <= 1e-9


def test_matrix_function_examples():
    assert np.allclose(matrix_function(np.diag([4.0, 9.0]), np.sqrt), np.diag([2, 3]))
    assert np.allclose(matrix_function(SIGMA_Z, np.abs), np.eye(2))
    assert np.allclose(matrix_function(np.diag([np.e, np.e**2]), np.log), np.diag([1, 2]))


def test_matrix_function_domain_error():
    with pytest.raises(DomainError):
        matrix_function(np.diag([-1.0, 1.0]), np.log)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_matrix_function_identity(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = a + a.conj().T
    assert np.max(np.abs(matrix_function(m, lambda x: x) - m)) <= 1e-9


def test_pure_to_density_examples():
    assert np.allclose(pure_to_density([1, 0]), [[1, 0], [0, 0]])
    psi1 = np.array([2, 1]) / np.sqrt(5)
    psi2 = np.array([3, 1]) / np.sqrt(10)
    assert np.allclose(pure_to_density(psi1), [[0.8, 0.4], [0.4, 0.2]], atol=1e-15)
    assert np.allclose(pure_to_density(psi2), [[0.9, 0.3], [0.3, 0.1]], atol=1e-15)


def test_pure_to_density_requires_normalization():
    with pytest.raises(ValueError):
        pure_to_density([1, 1])


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_random_states_pass_validator(seed, n):
    rho = random_density(np.random.default_rng(seed), n)
    assert is_density_matrix(rho)
    check_density_matrix(rho)
    vals = np.linalg.eigvalsh(rho)
    assert abs(np.trace(rho).real - 1) <= 1e-10 and vals.min() >= -1e-10


def test_validator_distinguishes_repairable():
    slightly_bad = np.diag([1 + 1e-8, -1e-8])
    assert not is_density_matrix(slightly_bad)
    assert is_repairable(slightly_bad)
    fixed = clamp_and_renormalize(slightly_bad)
    assert is_density_matrix(fixed)
    very_bad = np.diag([1.5, -0.5])
    assert not is_repairable(very_bad)
    with pytest.raises(InvalidDensityMatrix):
        check_density_matrix(very_bad)


def test_maximally_mixed():
    assert np.allclose(maximally_mixed(4), np.eye(4) / 4)


def test_rk4_step_matrix_matches_scalar_rk4():
    lam, h = -0.7, 0.3
    expected = 1 + lam * h + (lam * h) ** 2 / 2 + (lam * h) ** 3 / 6 + (lam * h) ** 4 / 24
    assert rk4_step_matrix(np.array([[lam]]), h)[0, 0] == pytest.approx(expected, rel=1e-15)
