"""Bivariate matrix polynomials, free and hereditary polynomials, torus sup-norms."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .cmatrix import DEFAULT_TOL, Tolerances, adjoint, as_matrix, operator_norm
from .contraction import RowContraction, row_contraction
from .errors import InvalidInput, NotCommuting, ShapeMismatch


class BivariatePolyMatrix:
    """A ``k_rows x k_cols`` matrix ``[p_rs]`` of polynomials in ``C[z, w]``.

    Stored densely: ``coeffs[r, s, m, n]`` is the coefficient of ``z^m w^n``
    in ``p_rs``.  Trailing all-zero degrees are trimmed.
    """

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 4:
            raise InvalidInput(f"coefficient array must be 4-dimensional, got {c.ndim}")
        if not np.all(np.isfinite(c)):
            raise InvalidInput("non-finite polynomial coefficient")
        if c.shape[0] == 0 or c.shape[1] == 0:
            raise InvalidInput("polynomial matrix must have at least one entry")
        if c.shape[2] == 0 or c.shape[3] == 0:
            c = np.zeros(c.shape[:2] + (1, 1), dtype=complex)
        nz = np.argwhere(np.any(c != 0, axis=(0, 1)))
        if nz.size:
            c = c[:, :, : nz[:, 0].max() + 1, : nz[:, 1].max() + 1]
        else:
            c = c[:, :, :1, :1]
        self.coeffs = c
        self.coeffs.setflags(write=False)

    @classmethod
    def from_terms(cls, entries):
        """``entries[r][s]`` is an iterable of ``(zdeg, wdeg, coeff)``; duplicates are summed."""
        k_rows = len(entries)
        if k_rows == 0:
            raise InvalidInput("empty polynomial matrix")
        k_cols = len(entries[0])
        dz = dw = 0
        for row in entries:
            if len(row) != k_cols:
                raise ShapeMismatch("ragged polynomial matrix")
            for terms in row:
                for zd, wd, _ in terms:
                    if int(zd) != zd or int(wd) != wd or zd < 0 or wd < 0:
                        raise InvalidInput(f"exponents must be non-negative integers, got ({zd}, {wd})")
                    dz, dw = max(dz, int(zd)), max(dw, int(wd))
        c = np.zeros((k_rows, k_cols, dz + 1, dw + 1), dtype=complex)
        for r, row in enumerate(entries):
            for s, terms in enumerate(row):
                for zd, wd, a in terms:
                    c[r, s, int(zd), int(wd)] += complex(a)
        return cls(c)

    @classmethod
    def scalar(cls, terms):
        return cls.from_terms([[list(terms)]])

    @classmethod
    def constant(cls, value):
        arr = np.atleast_2d(np.array(value, dtype=complex))
        return cls(arr.reshape(arr.shape + (1, 1)))

    @property
    def k_rows(self) -> int:
        return self.coeffs.shape[0]

    @property
    def k_cols(self) -> int:
        return self.coeffs.shape[1]

    @property
    def deg_z(self) -> int:
        return self.coeffs.shape[2] - 1

    @property
    def deg_w(self) -> int:
        return self.coeffs.shape[3] - 1

    @property
    def total_degree(self) -> int:
        nz = np.argwhere(np.any(self.coeffs != 0, axis=(0, 1)))
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def terms(self):
        """Yield ``(r, s, zdeg, wdeg, coeff)`` for the non-zero coefficients."""
        for r, s, m, n in np.argwhere(self.coeffs != 0):
            yield int(r), int(s), int(m), int(n), complex(self.coeffs[r, s, m, n])

    def swap(self) -> "BivariatePolyMatrix":
        """``p(z, w) -> p(w, z)``."""
        return BivariatePolyMatrix(np.swapaxes(self.coeffs, 2, 3))

    def scale(self, c) -> "BivariatePolyMatrix":
        return BivariatePolyMatrix(complex(c) * self.coeffs)

    def __add__(self, other):
        a, b = self.coeffs, other.coeffs
        if a.shape[:2] != b.shape[:2]:
            raise ShapeMismatch("polynomial matrices have different shapes")
        dz, dw = max(a.shape[2], b.shape[2]), max(a.shape[3], b.shape[3])
        c = np.zeros(a.shape[:2] + (dz, dw), dtype=complex)
        c[:, :, : a.shape[2], : a.shape[3]] += a
        c[:, :, : b.shape[2], : b.shape[3]] += b
        return BivariatePolyMatrix(c)

    def __sub__(self, other):
        return self + other.scale(-1)

    def __matmul__(self, other):
        if self.k_cols != other.k_rows:
            raise ShapeMismatch("inner dimensions of the polynomial matrices differ")
        a, b = self.coeffs, other.coeffs
        out = np.zeros((self.k_rows, other.k_cols, a.shape[2] + b.shape[2] - 1,
                        a.shape[3] + b.shape[3] - 1), dtype=complex)
        for r in range(self.k_rows):
            for s in range(other.k_cols):
                for t in range(self.k_cols):
                    out[r, s] += convolve2d(a[r, t], b[t, s])
        return BivariatePolyMatrix(out)

    def at(self, z, w) -> np.ndarray:
        """Scalar evaluation, returns the ``k_rows x k_cols`` matrix ``[p_rs(z, w)]``."""
        zp = complex(z) ** np.arange(self.deg_z + 1)
        wp = complex(w) ** np.arange(self.deg_w + 1)
        return np.einsum("rsmn,m,n->rs", self.coeffs, zp, wp)

    def key(self):
        return (self.coeffs.shape, self.coeffs.tobytes())

    def __eq__(self, other):
        return isinstance(other, BivariatePolyMatrix) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"BivariatePolyMatrix({self.k_rows}x{self.k_cols}, deg_z={self.deg_z}, deg_w={self.deg_w})"


def _check_commute(M1, M2, tol: Tolerances):
    res = operator_norm(M1 @ M2 - M2 @ M1)
    if res > tol.residual_tol * (1 + operator_norm(M1)) * (1 + operator_norm(M2)):
        raise NotCommuting(f"arguments do not commute (residual {res:.3e})")


def eval_bivariate(P: BivariatePolyMatrix, M1, M2, tol: Tolerances = DEFAULT_TOL,
                   check: bool = True) -> np.ndarray:
    """Block matrix ``[p_rs(M1, M2)]``.

    Horner's scheme in ``z``; the coefficient of each power of ``z`` is a
    polynomial in ``M2`` assembled from the precomputed powers of ``M2``.
    """
    M1 = as_matrix(M1, "M1")
    M2 = as_matrix(M2, "M2")
    if M1.shape != M2.shape or M1.shape[0] != M1.shape[1]:
        raise ShapeMismatch(f"arguments must be square of equal size, got {M1.shape}, {M2.shape}")
    if check:
        _check_commute(M1, M2, tol)
    n = M1.shape[0]
    powers = np.empty((P.deg_w + 1, n, n), dtype=complex)
    powers[0] = np.eye(n)
    for k in range(1, P.deg_w + 1):
        powers[k] = powers[k - 1] @ M2
    inner = np.tensordot(P.coeffs, powers, axes=([3], [0]))
    acc = inner[:, :, -1]
    for m in range(P.deg_z - 1, -1, -1):
        acc = acc @ M1 + inner[:, :, m]
    return acc.transpose(0, 2, 1, 3).reshape(P.k_rows * n, P.k_cols * n)


def eval_monomial_sum(P: BivariatePolyMatrix, M1, M2) -> np.ndarray:
    """Naive ``sum a_mn M1^m M2^n``; slow reference evaluation."""
    M1, M2 = as_matrix(M1), as_matrix(M2)
    n = M1.shape[0]
    out = np.zeros((P.k_rows * n, P.k_cols * n), dtype=complex)
    for r, s, m, k, a in P.terms():
        out[r * n:(r + 1) * n, s * n:(s + 1) * n] += (
            a * np.linalg.matrix_power(M1, m) @ np.linalg.matrix_power(M2, k))
    return out


# --- free and hereditary polynomials -------------------------------------------------


def _word(w, name):
    try:
        letters = tuple(int(i) for i in w)
    except (TypeError, ValueError):
        raise InvalidInput(f"{name} must be a sequence of generator indices") from None
    if any(i < 1 for i in letters):
        raise InvalidInput(f"{name} contains an index < 1")
    return letters


@dataclass(frozen=True)
class FreePoly:
    """``sum coeff * X_alpha Y_beta`` over terms ``(alpha, beta, coeff)`` (1-based letters)."""

    terms: tuple

    def __init__(self, terms):
        norm = tuple((_word(a, "xword"), _word(b, "yword"), complex(c)) for a, b, c in terms)
        object.__setattr__(self, "terms", norm)

    @classmethod
    def from_bivariate(cls, P: BivariatePolyMatrix):
        if (P.k_rows, P.k_cols) != (1, 1):
            raise ShapeMismatch("only scalar bivariate polynomials convert to free polynomials")
        return cls([((1,) * m, (1,) * n, a) for _, _, m, n, a in P.terms()])


@dataclass(frozen=True)
class HereditaryPoly:
    """``sum coeff * X_alpha Y_beta Y_sigma^* X_gamma^*`` over terms ``(alpha, beta, sigma, gamma, coeff)``."""

    terms: tuple

    def __init__(self, terms):
        norm = tuple((_word(a, "alpha"), _word(b, "beta"), _word(s, "sigma"),
                      _word(g, "gamma"), complex(c)) for a, b, s, g, c in terms)
        object.__setattr__(self, "terms", norm)


def _check_pair(T1: RowContraction, T2: RowContraction, tol: Tolerances):
    if T1.dim != T2.dim:
        raise ShapeMismatch("tuples act on different spaces")
    for A in T1:
        for B in T2:
            _check_commute(A, B, tol)


def _check_letters(word, n, name):
    if any(i > n for i in word):
        raise InvalidInput(f"{name} {word} uses a generator beyond {n}")


def eval_free(p: FreePoly, T1, T2, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    T1, T2 = row_contraction(T1, tol), row_contraction(T2, tol)
    _check_pair(T1, T2, tol)
    out = np.zeros((T1.dim, T1.dim), dtype=complex)
    for a, b, c in p.terms:
        _check_letters(a, T1.n, "xword")
        _check_letters(b, T2.n, "yword")
        out += c * T1.word(a) @ T2.word(b)
    return out


def eval_hereditary(q: HereditaryPoly, T1, T2, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    T1, T2 = row_contraction(T1, tol), row_contraction(T2, tol)
    _check_pair(T1, T2, tol)
    out = np.zeros((T1.dim, T1.dim), dtype=complex)
    for a, b, s, g, c in q.terms:
        _check_letters(a, T1.n, "alpha")
        _check_letters(g, T1.n, "gamma")
        _check_letters(b, T2.n, "beta")
        _check_letters(s, T2.n, "sigma")
        out += c * T1.word(a) @ T2.word(b) @ adjoint(T2.word(s)) @ adjoint(T1.word(g))
    return out


# --- torus sup-norm ----------------------------------------------------------------


def _pointwise_norms(vals):
    # vals: (k_rows, k_cols, ...) -> largest singular value at every point
    kr, kc = vals.shape[:2]
    if kr == 1 or kc == 1:
        return np.sqrt(np.sum(np.abs(vals) ** 2, axis=(0, 1)))
    if kc > kr:
        vals = np.conj(np.swapaxes(vals, 0, 1))
        kr, kc = kc, kr
    if kc == 2:
        # largest eigenvalue of the 2 x 2 Gram of the columns, in closed form
        u, v = vals[:, 0], vals[:, 1]
        a = np.sum(u.real ** 2 + u.imag ** 2, axis=0)
        d = np.sum(v.real ** 2 + v.imag ** 2, axis=0)
        b = np.sum(np.conj(u) * v, axis=0)
        lam = 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + (b.real ** 2 + b.imag ** 2))
        return np.sqrt(np.maximum(lam, 0))
    G = np.einsum("rs...,rt...->st...", np.conj(vals), vals)
    G = np.moveaxis(G, (0, 1), (-2, -1))
    return np.sqrt(np.maximum(np.linalg.eigvalsh(G)[..., -1], 0))


def torus_grid_norms(P: BivariatePolyMatrix, grid: int, chunk: int = 256):
    """Yield ``(row_indices, norms)`` blocks of ``||P(e^{i theta_a}, e^{i phi_b})||`` on a ``grid x grid`` mesh."""
    c = P.coeffs
    Fw = grid * np.fft.ifft(c, n=grid, axis=3)           # (kr, kc, dz+1, grid)
    m = np.arange(c.shape[2])
    for start in range(0, grid, chunk):
        idx = np.arange(start, min(grid, start + chunk))
        Ez = np.exp(2j * np.pi * np.outer(idx, m) / grid)    # (c, dz+1)
        vals = Ez @ Fw
        yield idx, _pointwise_norms(vals)


def coefficient_norm_sum(P: BivariatePolyMatrix) -> float:
    return float(sum(operator_norm(P.coeffs[:, :, m, n])
                     for m in range(P.coeffs.shape[2]) for n in range(P.coeffs.shape[3])))


def torus_sup_norm(P: BivariatePolyMatrix, grid: int = 2048):
    """Certified bracket ``(lo, hi)`` for ``sup_{D^2} ||P||``.

    ``lo`` is the largest norm on the ``grid x grid`` mesh of the torus.  The
    norm of ``P`` is Lipschitz in each angle with constant ``deg/2`` times its
    sup (Bernstein's inequality after a half-degree phase shift), so every
    dyadic sub-mesh of size ``g`` yields ``sup <= lo_g / (1 - pi (deg_z + deg_w) / (2 g))``;
    ``hi`` is the smallest such bound, capped by the sum of coefficient norms.
    """
    grid = int(grid)
    d = P.total_degree
    if grid < 4 * (d + 1):
        raise InvalidInput(f"grid {grid} is too coarse for total degree {d}; need >= {4 * (d + 1)}")
    spread = P.deg_z + P.deg_w
    if spread == 0:
        v = operator_norm(P.coeffs[:, :, 0, 0])
        return v, v
    strides = [1]
    while grid % (2 * strides[-1]) == 0 and grid // (2 * strides[-1]) >= 4 * (d + 1):
        strides.append(2 * strides[-1])
    lo = {s: 0.0 for s in strides}
    for idx, norms in torus_grid_norms(P, grid):
        for s in strides:
            rows = idx % s == 0
            if rows.any():
                lo[s] = max(lo[s], float(norms[rows][:, ::s].max()))
    hi = coefficient_norm_sum(P)
    for s in strides:
        x = math.pi * spread / (2 * (grid // s))
        if x < 1:
            hi = min(hi, lo[s] / (1 - x))
    lo_main = lo[1]
    return lo_main, max(hi, lo_main)


def fejer_smooth(P: BivariatePolyMatrix, m: int) -> BivariatePolyMatrix:
    """Damp the coefficient of ``z^a w^b`` by ``1 - (a + b) / (m + 1)``."""
    if m < P.total_degree:
        raise InvalidInput(f"m = {m} is below the total degree {P.total_degree}")
    a = np.arange(P.coeffs.shape[2])[:, None]
    b = np.arange(P.coeffs.shape[3])[None, :]
    factor = 1.0 - (a + b) / (m + 1.0)
    return BivariatePolyMatrix(P.coeffs * factor)


def fejer_deviation_bound(P: BivariatePolyMatrix, m: int) -> float:
    """``sum (a + b) / (m + 1) |coeff|`` over all entries; the deviation bound for scalar ``P``."""
    a = np.arange(P.coeffs.shape[2])[:, None]
    b = np.arange(P.coeffs.shape[3])[None, :]
    w = (a + b) / (m + 1.0)
    per_entry = np.sum(np.abs(P.coeffs) * w, axis=(2, 3))
    if P.k_rows == 1 and P.k_cols == 1:
        return float(per_entry[0, 0])
    return float(np.sqrt(np.sum(per_entry ** 2)))
