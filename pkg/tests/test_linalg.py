import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_flow_lab.errors import EvaluationError, InputError
from spectral_flow_lab.linalg import (
    as_hermitian,
    eigh,
    eigvalsh,
    fredholm_det,
    matrix_function,
    unitarity_residual,
)

from conftest import random_hermitian


def test_eigh_identity():
    es = eigh(np.eye(2))
    np.testing.assert_allclose(es.eigenvalues, [1, 1])
    np.testing.assert_allclose(es.eigenvectors.conj().T @ es.eigenvectors, np.eye(2), atol=1e-14)


def test_eigh_diagonal_sorted():
    np.testing.assert_allclose(eigh(np.diag([3.0, -1.0])).eigenvalues, [-1, 3])


def test_eigh_pauli_x():
    np.testing.assert_allclose(eigh([[0, 1], [1, 0]]).eigenvalues, [-1, 1], atol=1e-15)


def test_eigh_is_deterministic(rng):
    h = random_hermitian(rng, 20)
    a, b = eigh(h), eigh(h)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_eigvalsh_matches_eigh(rng):
    h = random_hermitian(rng, 15)
    np.testing.assert_allclose(eigvalsh(h), eigh(h).eigenvalues, atol=1e-12)


def test_projector_closed_convention():
    es = eigh(np.diag([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(es.projector(1.0), np.diag([1.0, 1.0, 0.0]))
    assert es.count(1.0) == 2
    assert es.count(0.999) == 1


def test_non_hermitian_rejected():
    with pytest.raises(InputError):
        as_hermitian([[0, 1], [0, 0]])
    with pytest.raises(InputError):
        as_hermitian(np.ones((2, 3)))


@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_eigh_orthonormal(n, seed):
    h = random_hermitian(np.random.default_rng(seed), n)
    u = eigh(h).eigenvectors
    assert np.linalg.norm(u.conj().T @ u - np.eye(n)) <= 1e-10


def test_matrix_function_identity_and_constant(rng):
    h = random_hermitian(rng, 5)
    np.testing.assert_allclose(matrix_function(h, lambda x: x), h, atol=1e-12)
    np.testing.assert_allclose(matrix_function(h, lambda x: np.ones_like(x)), np.eye(5), atol=1e-12)


def test_matrix_function_sin():
    out = matrix_function(np.diag([0.0, np.pi / 2]), np.sin)
    np.testing.assert_allclose(out, np.diag([0.0, 1.0]), atol=1e-15)


def test_matrix_function_non_finite():
    with pytest.raises(EvaluationError), np.errstate(divide="ignore"):
        matrix_function(np.diag([0.0, 1.0]), lambda x: 1.0 / x)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_matrix_function_multiplicative(n, seed):
    h = random_hermitian(np.random.default_rng(seed), n)
    f, g = np.cos, lambda x: np.exp(-x * x)
    lhs = matrix_function(h, lambda x: f(x) * g(x))
    rhs = matrix_function(h, f) @ matrix_function(h, g)
    assert np.linalg.norm(lhs - rhs) <= 1e-9


def test_fredholm_det_examples():
    assert fredholm_det(np.zeros((3, 3))) == pytest.approx(1.0)
    assert fredholm_det(np.diag([1.0, 2.0])) == pytest.approx(6.0)


def test_fredholm_det_rank_one(rng):
    x = rng.normal(size=4) + 1j * rng.normal(size=4)
    y = rng.normal(size=4) + 1j * rng.normal(size=4)
    assert fredholm_det(np.outer(x, y.conj())) == pytest.approx(1 + y.conj() @ x, rel=1e-12)


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_fredholm_det_dimension_swap(n, m, seed):
    rng = np.random.default_rng(seed)
    a = (rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))) / 2
    b = (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))) / 2
    d1, d2 = fredholm_det(a @ b), fredholm_det(b @ a)
    assert abs(d1 - d2) <= 1e-9 * max(1.0, abs(d1))


def test_unitarity_residual():
    assert unitarity_residual(np.eye(3)) == 0.0
    assert unitarity_residual(2 * np.eye(1)) == pytest.approx(3.0)
