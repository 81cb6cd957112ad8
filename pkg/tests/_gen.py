"""Random generators shared by the test modules."""
import numpy as np
from scipy.stats import unitary_group

from ando_lab.fock import TruncatedFock, creation_matrix
from ando_lab.polynomial import BivariatePolyMatrix


def cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def strict_contraction(rng, n, rho=0.9):
    """Random ``n x n`` matrix with norm ``rho`` (so spectral radius <= rho)."""
    A = cplx(rng, n, n)
    return rho * A / np.linalg.norm(A, 2)


def jordan(k, lam=0.0):
    return lam * np.eye(k) + np.diag(np.ones(k - 1), -1)


def poly_in(rng, T, degree=2, norm=None):
    """Random polynomial in ``T`` rescaled to operator norm ``norm`` (random in [0.3, 0.9] by default)."""
    c = cplx(rng, degree + 1)
    M = sum(c[j] * np.linalg.matrix_power(T, j) for j in range(degree + 1))
    target = rng.uniform(0.3, 0.9) if norm is None else norm
    return target * M / np.linalg.norm(M, 2)


def commuting_pair(rng, n, rho=0.9):
    """Two polynomials in one random strict contraction; spectra have modulus < 1."""
    T = strict_contraction(rng, n, rho)
    return poly_in(rng, T), poly_in(rng, T)


def random_poly(rng, k=1, deg=5, terms=6):
    entries = [[[(int(rng.integers(0, deg + 1)), 0, 0) for _ in range(0)] for _ in range(k)] for _ in range(k)]
    for r in range(k):
        for s in range(k):
            for _ in range(terms):
                zd = int(rng.integers(0, deg + 1))
                wd = int(rng.integers(0, deg + 1 - zd))
                entries[r][s].append((zd, wd, complex(*rng.normal(size=2))))
    return BivariatePolyMatrix.from_terms(entries)


def commuting_unitaries(rng, n):
    """Jointly diagonal unitaries with a few repeated eigenvalues."""
    W = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
    pool = np.exp(2j * np.pi * rng.random(max(1, n // 2)))
    d1 = rng.choice(pool, n)
    d2 = np.exp(2j * np.pi * rng.random(n))
    d2[: n // 3] = d2[0]
    return W @ np.diag(d1) @ W.conj().T, W @ np.diag(d2) @ W.conj().T


def pure_row(rng, n, dim, norm=None):
    """Row tuple with row norm ``norm`` < 1, hence pure."""
    mats = [cplx(rng, dim, dim) for _ in range(n)]
    s = np.linalg.norm(np.hstack(mats), 2)
    target = rng.uniform(0.3, 0.95) if norm is None else norm
    return [target * M / s for M in mats]


def nilpotent_triple(rng, n1, n2, depth=2, m=2):
    """``(T1, T1p, T2)`` with nilpotent creation tuples and ``T1_i T2_j = T2_j T1p_i``.

    ``T1`` is a scaled truncated left-creation tuple on a Fock space of
    depth ``depth``; ``T1p = T1 (x) I_m``; every ``T2_j`` is a combination of
    right-creation words tensored with row vectors.  Random unitary changes
    of basis hide the structure.
    """
    F = TruncatedFock(n1, depth)
    S = [creation_matrix("left", i, F) for i in range(1, n1 + 1)]
    R = [creation_matrix("right", i, F) for i in range(1, n1 + 1)]
    c = rng.uniform(0.3, 1.0)
    T1 = [c * s for s in S]
    T1p = [np.kron(t, np.eye(m)) for t in T1]
    T2 = []
    for _ in range(n2):
        M = np.zeros((F.dim, F.dim * m), dtype=complex)
        for w in F.words:
            Rw = np.eye(F.dim)
            for a in w:
                Rw = Rw @ R[a - 1]
            y = cplx(rng, m)
            M += rng.normal() * np.kron(Rw, y.conj()[None, :])
        T2.append(M)
    s = np.linalg.norm(np.hstack(T2), 2)
    scale = rng.uniform(0.3, 1.0)
    T2 = [scale * M / s for M in T2]
    W = unitary_group.rvs(F.dim, random_state=rng)
    Wp = unitary_group.rvs(F.dim * m, random_state=rng)
    return ([W @ t @ W.conj().T for t in T1], [Wp @ t @ Wp.conj().T for t in T1p],
            [W @ t @ Wp.conj().T for t in T2])


def cnu_matrix(rng, n, rho=0.9):
    """Contraction with spectral radius <= ``rho``, often with repeated eigenvalues (Jordan chains)."""
    distinct = int(rng.integers(1, n + 1))
    pool = [0.85 * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random()) for _ in range(distinct)]
    diag = np.array([pool[int(rng.integers(0, distinct))] for _ in range(n)])
    A = np.diag(diag) + np.triu(0.3 * cplx(rng, n, n), 1)
    W = unitary_group.rvs(n, random_state=rng) if n > 1 else np.eye(1)
    T = W @ A @ W.conj().T
    s = np.linalg.norm(T, 2)
    if s > 0.99:
        T = T * 0.99 / s
    assert max(abs(np.linalg.eigvals(T))) <= rho
    return T
