"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.  All
routines here are deterministic for a fixed input: LAPACK drivers without
randomized pivoting, and sign/phase normalisation wherever a factorization
leaves a choice.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np
import scipy.linalg as sla
from scipy.stats import unitary_group

from .errors import InvalidInput, NotPSD, ShapeMismatch


@dataclass(frozen=True)
class Tolerances:
    contraction_slack: float = 1e-9
    hermitian_psd_clamp: float = 1e-10
    unimodular_margin: float = 1e-8
    residual_tol: float = 1e-8
    rank_tol: float = 1e-10

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and np.isfinite(value) and value > 0):
                raise InvalidInput(f"tolerance {f.name} must be a positive number, got {value!r}")

    def updated(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidInput(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)


DEFAULT_TOL = Tolerances()


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Coerce ``M`` to a finite 2-D complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def adjoint(M) -> np.ndarray:
    return np.conj(np.asarray(M)).T


def operator_norm(M) -> float:
    """Largest singular value."""
    A = as_matrix(M)
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A, check_finite=False)[0])


def is_square(M) -> bool:
    return M.ndim == 2 and M.shape[0] == M.shape[1]


def hermitian_part_check(P: np.ndarray, tol: Tolerances) -> None:
    scale = max(1.0, operator_norm(P))
    if operator_norm(P - adjoint(P)) > tol.residual_tol * scale:
        raise InvalidInput("matrix is not Hermitian")


def psd_eigh(P, tol: Tolerances = DEFAULT_TOL):
    """Eigen-decomposition of a Hermitian matrix with the PSD clamp applied.

    Returns ``(w, V)`` with ``w >= 0``.
    """
    P = as_matrix(P)
    if not is_square(P):
        raise ShapeMismatch(f"expected a square matrix, got {P.shape}")
    hermitian_part_check(P, tol)
    H = 0.5 * (P + adjoint(P))
    w, V = np.linalg.eigh(H)
    if w.size and w[0] < -tol.hermitian_psd_clamp:
        raise NotPSD(f"eigenvalue {w[0]:.3e} below -{tol.hermitian_psd_clamp:g}")
    return np.clip(w, 0.0, None), V


def hermitian_sqrt(P, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    w, V = psd_eigh(P, tol)
    Q = (V * np.sqrt(w)) @ adjoint(V)
    return 0.5 * (Q + adjoint(Q))


def _positive_diagonal(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    # fix the phase freedom of a QR factorization: diag(R) real >= 0
    d = np.diag(R)[: Q.shape[1]]
    phase = np.ones(Q.shape[1], dtype=complex)
    nz = np.abs(d) > 0
    phase[: d.size][nz] = d[nz] / np.abs(d[nz])
    return Q * phase


def complement_basis(V: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of ``V``.

    Column-pivoted QR of ``I - V V*``; columns come out in pivot order.
    """
    n, k = V.shape
    if n == k:
        return np.zeros((n, 0), dtype=complex)
    P = np.eye(n, dtype=complex) - V @ adjoint(V)
    Q, R, _ = sla.qr(P, pivoting=True, mode="economic")
    Q = _positive_diagonal(Q, R)
    C = Q[:, : n - k]
    # one re-orthogonalisation pass against V keeps the result clean
    C = C - V @ (adjoint(V) @ C)
    Q2, R2 = np.linalg.qr(C)
    return _positive_diagonal(Q2, R2)


def range_basis(M: np.ndarray, rank_tol: float = DEFAULT_TOL.rank_tol):
    """Orthonormal basis of the range, via SVD.  Returns ``(U_r, s_r, Vh_r)``."""
    if M.size == 0:
        return (np.zeros((M.shape[0], 0), dtype=complex), np.zeros(0),
                np.zeros((0, M.shape[1]), dtype=complex))
    U, s, Vh = sla.svd(M, full_matrices=False, lapack_driver="gesvd")
    r = int(np.sum(s > rank_tol * max(1.0, s[0])))
    return U[:, :r], s[:r], Vh[:r]


def orthonormality_defect(V: np.ndarray) -> float:
    k = V.shape[1]
    if k == 0:
        return 0.0
    return operator_norm(adjoint(V) @ V - np.eye(k))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if n == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return unitary_group.rvs(n, random_state=rng)


def unitary_completion(V, W, tol: Tolerances = DEFAULT_TOL, mixing=None) -> np.ndarray:
    """Unitary ``U`` with ``U @ V == W`` for orthonormal column sets ``V``, ``W``.

    The complements of both column sets are built by :func:`complement_basis`
    and paired in pivot order.  ``mixing``, if given, is a unitary of the
    complement dimension inserted between the two complement bases.
    """
    V = as_matrix(V, "V")
    W = as_matrix(W, "W")
    if V.shape[0] != W.shape[0]:
        raise ShapeMismatch(f"ambient dimensions differ: {V.shape[0]} vs {W.shape[0]}")
    if V.shape[1] != W.shape[1]:
        raise ShapeMismatch(f"column counts differ: {V.shape[1]} vs {W.shape[1]}")
    if orthonormality_defect(V) > tol.residual_tol or orthonormality_defect(W) > tol.residual_tol:
        raise InvalidInput("columns are not orthonormal")
    Vc = complement_basis(V)
    Wc = complement_basis(W)
    if mixing is not None:
        mixing = as_matrix(mixing, "mixing")
        if mixing.shape != (Wc.shape[1], Wc.shape[1]):
            raise ShapeMismatch("mixing unitary has the wrong size")
        Wc = Wc @ mixing
    U = W @ adjoint(V) + Wc @ adjoint(Vc)
    return U


def unitarity_defect(U: np.ndarray) -> float:
    if U.size == 0:
        return 0.0
    return operator_norm(adjoint(U) @ U - np.eye(U.shape[1]))


def commutator_norm(X: np.ndarray, Y: np.ndarray) -> float:
    return operator_norm(X @ Y - Y @ X)


def spectral_radius(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def block_diag(*blocks) -> np.ndarray:
    return sla.block_diag(*blocks).astype(complex) if blocks else np.zeros((0, 0), dtype=complex)


def solve(M: np.ndarray, rhs: np.ndarray, cond_limit: float):
    """``M^{-1} rhs`` with a condition-number guard; returns ``(x, cond)``."""
    if M.size == 0:
        return np.zeros((0, rhs.shape[1]), dtype=complex), 1.0
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > cond_limit:
        return None, cond
    return sla.solve(M, rhs), cond
