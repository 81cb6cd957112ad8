"""Truncated full Fock space over ``n`` generators.

Basis vectors ``e_alpha`` are indexed by words ``alpha`` of length at most
``L``, ordered by length and then lexicographically; ``e_()`` is index 0.
Vectors of ``F_L (x) K`` use the Kronecker layout: the coordinate of
``e_alpha (x) k_j`` sits at ``index(alpha) * dim K + j``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cmatrix import DEFAULT_TOL, Tolerances, adjoint, as_matrix, operator_norm
from .contraction import RowContraction, defect_space, is_pure, row_contraction
from .errors import InvalidInput, ShapeMismatch


def reverse(word) -> tuple:
    return tuple(reversed(word))


class TruncatedFock:
    def __init__(self, n: int, L: int):
        if n < 1 or L < 0:
            raise InvalidInput(f"need n >= 1 and L >= 0, got n={n}, L={L}")
        self.n = int(n)
        self.L = int(L)
        words = []
        for k in range(self.L + 1):
            words.extend(itertools.product(range(1, self.n + 1), repeat=k))
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}

    @property
    def dim(self) -> int:
        return len(self.words)

    def level(self, k: int) -> range:
        """Indices of the words of length ``k``."""
        start = sum(self.n ** j for j in range(k))
        return range(start, start + self.n ** k)

    def lengths(self) -> np.ndarray:
        return np.array([len(w) for w in self.words])

    def __repr__(self):
        return f"TruncatedFock(n={self.n}, L={self.L}, dim={self.dim})"


def creation_matrix(side: str, i: int, space: TruncatedFock) -> np.ndarray:
    """Left (``e_a -> e_{g_i a}``) or right (``e_a -> e_{a g_i}``) creation operator.

    Words of maximal length are sent to zero.
    """
    if side not in ("left", "right"):
        raise InvalidInput(f"side must be 'left' or 'right', got {side!r}")
    if not 1 <= i <= space.n:
        raise InvalidInput(f"generator {i} outside 1..{space.n}")
    S = np.zeros((space.dim, space.dim), dtype=complex)
    for col, w in enumerate(space.words):
        if len(w) < space.L:
            target = (i,) + w if side == "left" else w + (i,)
            S[space.index[target], col] = 1.0
    return S


class MultiAnalyticOp:
    """``sum_alpha R_alpha (x) theta_alpha`` from Fourier coefficients.

    ``R_alpha e_beta = e_{beta reverse(alpha)}``, so the operator sends
    ``e_beta (x) y`` to ``sum_alpha e_{beta reverse(alpha)} (x) theta_alpha y``.
    """

    def __init__(self, n: int, coeffs: dict, in_dim: int | None = None,
                 out_dim: int | None = None):
        if not coeffs and (in_dim is None or out_dim is None):
            raise InvalidInput("empty coefficient map needs explicit dimensions")
        self.n = int(n)
        self.coeffs = {}
        for w, theta in coeffs.items():
            w = tuple(int(a) for a in w)
            if any(not 1 <= a <= self.n for a in w):
                raise InvalidInput(f"coefficient word {w} uses letters outside 1..{self.n}")
            self.coeffs[w] = as_matrix(theta, f"theta{w}")
        shapes = {t.shape for t in self.coeffs.values()}
        if len(shapes) > 1:
            raise ShapeMismatch(f"coefficients have different shapes: {sorted(shapes)}")
        shape = shapes.pop() if shapes else (out_dim, in_dim)
        self.out_dim, self.in_dim = shape
        if (in_dim is not None and in_dim != self.in_dim) or (out_dim is not None and out_dim != self.out_dim):
            raise ShapeMismatch("declared dimensions disagree with the coefficients")

    @property
    def max_length(self) -> int:
        return max((len(w) for w in self.coeffs), default=0)

    def _check_space(self, space):
        if space.n != self.n:
            raise ShapeMismatch(f"operator has {self.n} generators, space has {space.n}")

    def apply(self, space: TruncatedFock, x) -> np.ndarray:
        self._check_space(space)
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != space.dim * self.in_dim:
            raise ShapeMismatch(f"vector length {x.shape[0]} != {space.dim * self.in_dim}")
        X = x.reshape(space.dim, self.in_dim, *x.shape[1:])
        out = np.zeros((space.dim, self.out_dim) + x.shape[1:], dtype=complex)
        for a, theta in self.coeffs.items():
            tail = reverse(a)
            for b, beta in enumerate(space.words):
                if len(beta) + len(a) <= space.L:
                    out[space.index[beta + tail]] += np.tensordot(theta, X[b], axes=(1, 0))
        return out.reshape((space.dim * self.out_dim,) + x.shape[1:])

    def apply_adjoint(self, space: TruncatedFock, x) -> np.ndarray:
        """Adjoint action; exact on the truncation because the adjoint shortens words."""
        self._check_space(space)
        x = np.asarray(x, dtype=complex)
        if x.shape[0] != space.dim * self.out_dim:
            raise ShapeMismatch(f"vector length {x.shape[0]} != {space.dim * self.out_dim}")
        X = x.reshape(space.dim, self.out_dim, *x.shape[1:])
        out = np.zeros((space.dim, self.in_dim) + x.shape[1:], dtype=complex)
        for g, gamma in enumerate(space.words):
            for cut in range(len(gamma) + 1):
                theta = self.coeffs.get(reverse(gamma[cut:]))
                if theta is not None:
                    out[space.index[gamma[:cut]]] += np.tensordot(adjoint(theta), X[g], axes=(1, 0))
        return out.reshape((space.dim * self.in_dim,) + x.shape[1:])

    def dense(self, space: TruncatedFock) -> np.ndarray:
        self._check_space(space)
        return self.apply(space, np.eye(space.dim * self.in_dim, dtype=complex))

    def coefficient_gram(self) -> np.ndarray:
        """``sum_alpha theta_alpha^* theta_alpha``."""
        G = np.zeros((self.in_dim, self.in_dim), dtype=complex)
        for theta in self.coeffs.values():
            G += adjoint(theta) @ theta
        return G

    @classmethod
    def from_dense(cls, M, space: TruncatedFock, in_dim: int, out_dim: int):
        """Read Fourier coefficients off the columns of ``e_() (x) y``."""
        M = as_matrix(M)
        if M.shape != (space.dim * out_dim, space.dim * in_dim):
            raise ShapeMismatch("dense operator does not match the space")
        col0 = M[:, :in_dim].reshape(space.dim, out_dim, in_dim)
        coeffs = {reverse(w): col0[i] for i, w in enumerate(space.words)}
        return cls(space.n, coeffs)


@dataclass(frozen=True)
class PoissonKernel:
    """Truncated kernel ``h -> sum_{|alpha| <= L} e_alpha (x) r^|alpha| Delta T_alpha^* h``.

    ``matrix`` has ``space.dim * defect_dim`` rows; ``isometry_tail`` is the
    exact value of ``||K^* K - I||`` and ``residual_tail`` bounds every
    intertwining residual ``||K r^|a| T_a^* - (S_a^* (x) I) K||``.
    """

    matrix: np.ndarray
    space: TruncatedFock
    defect_dim: int
    embed: np.ndarray
    isometry_tail: float
    residual_tail: float

    def block(self, word) -> np.ndarray:
        i = self.space.index[tuple(word)]
        d = self.defect_dim
        return self.matrix[i * d:(i + 1) * d]


def poisson_kernel(T, r: float, space: TruncatedFock, tol: Tolerances = DEFAULT_TOL) -> PoissonKernel:
    T = row_contraction(T, tol)
    if T.n != space.n:
        raise ShapeMismatch(f"tuple has {T.n} entries but the space has {space.n} generators")
    D = defect_space(T, r, tol)
    cert = is_pure(T, tol)
    if r == 1 and not cert.pure:
        warnings.warn("row contraction is not pure; the Poisson kernel is not isometric", stacklevel=2)
    d = D.rank
    adj = [adjoint(A) for A in T]
    # T_alpha^* = T_{i_k}^* ... T_{i_1}^*, built from the parent word alpha[:-1]
    stars = [np.eye(T.dim, dtype=complex)]
    for w in space.words[1:]:
        stars.append(adj[w[-1] - 1] @ stars[space.index[w[:-1]]])
    K = np.zeros((space.dim * d, T.dim), dtype=complex)
    for i, w in enumerate(space.words):
        K[i * d:(i + 1) * d] = r ** len(w) * (D.embed @ stars[i])
    tail = r ** (2 * (space.L + 1)) * cert.tail(space.L + 1)
    return PoissonKernel(K, space, d, D.embed, tail, math.sqrt(tail))


def kernel_intertwining_residual(K: PoissonKernel, T, r: float, word) -> float:
    """``||K r^|a| T_a^* - (S_a^* (x) I) K||`` for one word ``a``."""
    T = row_contraction(T, check=False)
    space, d = K.space, K.defect_dim
    lhs = K.matrix @ (r ** len(word) * T.adjoint_word(word))
    rhs = np.zeros_like(lhs)
    for i, beta in enumerate(space.words):
        j = space.index.get(tuple(word) + beta)
        if j is not None:
            rhs[i * d:(i + 1) * d] = K.matrix[j * d:(j + 1) * d]
    return operator_norm(lhs - rhs)


def constrained_projection_symmetric(space: TruncatedFock) -> np.ndarray:
    """Orthogonal projection onto the symmetric part of each level."""
    P = np.zeros((space.dim, space.dim))
    orbits: dict = {}
    for i, w in enumerate(space.words):
        orbits.setdefault(tuple(sorted(w)), []).append(i)
    for members in orbits.values():
        P[np.ix_(members, members)] = 1.0 / len(members)
    return P.astype(complex)
