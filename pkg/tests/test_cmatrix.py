import numpy as np
import pytest
from hypothesis import given, strategies as st

from ando_lab.cmatrix import (DEFAULT_TOL, Tolerances, complement_basis, hermitian_sqrt, operator_norm,
                              unitarity_defect, unitary_completion)
from ando_lab.errors import InvalidInput, NotPSD, ShapeMismatch
from _gen import cplx


def test_norm_identity():
    assert operator_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-15)


def test_norm_single_singular_value():
    assert operator_norm([[0, 2], [0, 0]]) == pytest.approx(2.0, abs=1e-15)


def test_norm_matches_power_iteration(rng):
    M = cplx(rng, 5, 5)
    G = M.conj().T @ M
    x = cplx(rng, 5)
    for _ in range(2000):
        x = G @ x
        x /= np.linalg.norm(x)
    lam = np.real(x.conj() @ G @ x)
    assert operator_norm(M) == pytest.approx(np.sqrt(lam), abs=1e-10)


def test_sqrt_trivial_cases():
    assert np.allclose(hermitian_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(hermitian_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    assert np.allclose(hermitian_sqrt(np.diag([-1e-12, 1.0])), np.diag([0.0, 1.0]), atol=1e-14)


def test_sqrt_rejects_negative():
    with pytest.raises(NotPSD):
        hermitian_sqrt(np.diag([-0.5, 1.0]))


@given(st.integers(1, 6), st.integers(0, 10_000))
def test_sqrt_squares_back(n, seed):
    r = np.random.default_rng(seed)
    A = cplx(r, n, n)
    P = A @ A.conj().T
    S = hermitian_sqrt(P)
    assert np.allclose(S, S.conj().T, atol=1e-12)
    assert operator_norm(S @ S - P) <= 1e-10 * max(1.0, operator_norm(P))
    assert np.linalg.eigvalsh(S).min() >= -1e-12


def test_completion_full_unitary(rng):
    from scipy.stats import unitary_group
    Q = unitary_group.rvs(3, random_state=rng)
    assert np.allclose(unitary_completion(np.eye(3), Q), Q, atol=1e-13)


def test_completion_empty_is_identity():
    U = unitary_completion(np.zeros((2, 0)), np.zeros((2, 0)))
    assert np.allclose(U, np.eye(2))


def test_completion_maps_e1_to_e2():
    e1, e2 = np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])
    U = unitary_completion(e1, e2)
    assert np.allclose(U @ e1, e2)
    assert unitarity_defect(U) < 1e-14


@given(st.integers(1, 7), st.data())
def test_completion_postconditions(n, data):
    k = data.draw(st.integers(0, n))
    r = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    V = np.linalg.qr(cplx(r, n, n))[0][:, :k]
    W = np.linalg.qr(cplx(r, n, n))[0][:, :k]
    U = unitary_completion(V, W)
    assert unitarity_defect(U) < 1e-12
    assert operator_norm(U @ V - W) < 1e-12 if k else True


def test_completion_shape_errors():
    with pytest.raises(ShapeMismatch):
        unitary_completion(np.eye(2)[:, :1], np.eye(3)[:, :1])
    with pytest.raises(InvalidInput):
        unitary_completion(np.array([[2.0], [0.0]]), np.array([[1.0], [0.0]]))


def test_complement_is_orthogonal(rng):
    V = np.linalg.qr(cplx(rng, 5, 2))[0]
    C = complement_basis(V)
    assert C.shape == (5, 3)
    assert np.allclose(C.conj().T @ V, 0, atol=1e-13)
    assert np.allclose(C.conj().T @ C, np.eye(3), atol=1e-13)


def test_tolerance_overrides():
    t = DEFAULT_TOL.updated(residual_tol=1e-6)
    assert isinstance(t, Tolerances) and t.residual_tol == 1e-6
    with pytest.raises((InvalidInput, TypeError, ValueError)):
        DEFAULT_TOL.updated(nonsense=1.0)
