"""Finite Blaschke model spaces and their compressed shifts.

For distinct roots ``lambda_i`` with multiplicities ``n_i`` the model space
``H^2 (-) b H^2`` is spanned by the kernel derivatives

    v^i_j(z) = j! z^j / (1 - conj(lambda_i) z)^(j+1),   0 <= j < n_i,

whose Gram matrix is known in closed form.  Orthonormalizing them in label
order gives, up to unimodular phases, the Takenaka-Malmquist-Walsh functions

    u_c(z) = sqrt(1 - |mu_c|^2) / (1 - conj(mu_c) z) * prod_{k<c} (z - mu_k) / (1 - conj(mu_k) z)

(``mu`` lists every root as often as its multiplicity).  The Cholesky
factor, the compressed shift and the constrained kernel all have closed
forms in that basis, so nothing is solved against the Gram matrix, which
becomes badly conditioned when roots of high multiplicity sit close together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cmatrix import DEFAULT_TOL, Tolerances, adjoint, as_matrix, operator_norm, spectral_radius
from .contraction import defect_space
from .errors import IllConditioned, InternalError, InvalidInput, NotCNU, NotContraction, ShapeMismatch

CLUSTER_RADIUS = 1e-7
# roundoff scale for the spread of a perturbed Jordan block: m eigenvalues
# drift by roughly (eps * cond)^(1/m)
_JORDAN_EPS = 1e-13
ILL_CONDITIONED_RADIUS = 1 - 1e-4
RESOLVENT_COND_LIMIT = 1e12


@dataclass(frozen=True)
class BlaschkeData:
    """Distinct roots inside the disk with their multiplicities."""

    roots: tuple          # ((lambda, multiplicity), ...)

    def __post_init__(self):
        for lam, n in self.roots:
            if int(n) != n or n < 1:
                raise InvalidInput(f"multiplicity of root {lam} must be a positive integer")
        lams = [lam for lam, _ in self.roots]
        for a in range(len(lams)):
            for b in range(a):
                if lams[a] == lams[b]:
                    raise InvalidInput(f"root {lams[a]} listed twice")

    @classmethod
    def create(cls, roots, tol: Tolerances = DEFAULT_TOL) -> "BlaschkeData":
        norm = tuple((complex(lam), int(n)) for lam, n in roots)
        for lam, _ in norm:
            if abs(lam) > 1 - tol.unimodular_margin:
                raise NotCNU(f"root {lam} is not inside the disk by the unimodular margin")
        return cls(norm)

    @property
    def N(self) -> int:
        return sum(n for _, n in self.roots)

    def basis_labels(self):
        """``[(i, j), ...]`` in the order used for every matrix of the model."""
        return [(i, j) for i, (_, n) in enumerate(self.roots) for j in range(n)]

    def __call__(self, z):
        out = 1.0 + 0j
        for lam, n in self.roots:
            out *= ((z - lam) / (1 - np.conj(lam) * z)) ** n
        return out

    def at_matrix(self, M) -> np.ndarray:
        """``b(M)`` for a matrix with spectrum inside the disk."""
        M = as_matrix(M)
        I = np.eye(M.shape[0], dtype=complex)
        out = I.copy()
        for lam, n in self.roots:
            factor = sla.solve(I - np.conj(lam) * M, M - lam * I)
            out = out @ np.linalg.matrix_power(factor, n)
        return out

    def minimal_polynomial_at(self, M) -> np.ndarray:
        """``prod (M - lambda_i)^(n_i)``."""
        M = as_matrix(M)
        I = np.eye(M.shape[0], dtype=complex)
        out = I.copy()
        for lam, n in self.roots:
            out = out @ np.linalg.matrix_power(M - lam * I, n)
        return out


def _cluster(eigs, radius, scale):
    # Single-linkage components whose linking radius depends on the component
    # size, so that the eigenvalues of a perturbed Jordan block stay together.
    # A component is split again with the radius of its own size until stable.
    def limit(m):
        return radius if m < 2 else max(radius, (_JORDAN_EPS * scale) ** (1.0 / m))

    def components(idx, thr):
        comps, seen = [], set()
        for start in idx:
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                p = stack.pop()
                comp.append(p)
                for q in idx:
                    if q not in seen and abs(eigs[p] - eigs[q]) <= thr:
                        seen.add(q)
                        stack.append(q)
            comps.append(sorted(comp))
        return comps

    def split(idx):
        parts = components(idx, limit(len(idx)))
        if len(parts) == 1:
            return parts
        return [c for part in parts for c in split(part)]

    return split(list(range(len(eigs))))


def minimal_polynomial(T, tol: Tolerances = DEFAULT_TOL, cluster_radius: float = CLUSTER_RADIUS) -> BlaschkeData:
    """Roots and multiplicities of the minimal polynomial of a c.n.u. contraction.

    Eigenvalues are clustered (see ``_cluster``); the multiplicity of each
    cluster is the nilpotency index of ``S - c I`` where ``S`` is the
    triangular Schur block of the cluster and ``c`` its mean.
    """
    T = as_matrix(T, "T")
    if T.shape[0] != T.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {T.shape}")
    if T.shape[0] == 0:
        raise InvalidInput("empty matrix has no model")
    norm = operator_norm(T)
    if norm > 1 + tol.contraction_slack:
        raise NotContraction(f"norm {norm:.12g} exceeds 1")
    eigs = np.diag(sla.schur(T, output="complex")[0])
    worst = float(np.max(np.abs(eigs)))
    if worst >= 1 - tol.unimodular_margin:
        raise NotCNU(f"eigenvalue of modulus {worst:.12g} on the unit circle")
    scale = max(1.0, norm)
    roots = []
    for members in _cluster(eigs, cluster_radius, scale):
        chosen = eigs[members]
        c = complex(np.mean(chosen))
        m = len(members)
        # Schur form with the cluster leading
        inside = lambda x, chosen=chosen: bool(np.min(np.abs(chosen - x)) <= 1e-12 * scale + 1e-300)
        S, _, sdim = sla.schur(T, output="complex", sort=inside)
        if sdim != m:
            # reordering did not isolate the cluster; use the algebraic multiplicity
            roots.append((c, m))
            continue
        Nc = S[:sdim, :sdim] - c * np.eye(sdim)
        index, P = m, np.eye(sdim, dtype=complex)
        for j in range(1, m + 1):
            P = P @ Nc
            if operator_norm(P) <= tol.rank_tol * scale ** j:
                index = j
                break
        roots.append((c, index))
    roots.sort(key=lambda t: (abs(t[0]), np.angle(t[0])))
    return BlaschkeData.create(roots, tol)


def _mixed_derivative(p: int, q: int, x: complex, y: complex) -> complex:
    """``d^p/dx^p d^q/dy^q 1/(1 - x y)`` in closed form."""
    w = 1.0 - x * y
    total = 0j
    for s in range(min(p, q) + 1):
        total += (math.comb(p, s) * math.factorial(q) // math.factorial(q - s)
                  * math.factorial(q + p - s) // math.factorial(q)
                  * x ** (q - s) * y ** (p - s) * w ** (-(q + p - s + 1)))
    return math.factorial(q) * total


def gram_matrix(b: BlaschkeData) -> np.ndarray:
    """``G[a, c] = <v_c, v_a>`` over the kernel-derivative basis."""
    labels = b.basis_labels()
    lam = [r for r, _ in b.roots]
    N = len(labels)
    G = np.empty((N, N), dtype=complex)
    for a, (i, j) in enumerate(labels):
        for c, (i2, j2) in enumerate(labels):
            G[a, c] = _mixed_derivative(j2, j, np.conj(lam[i2]), lam[i])
    return 0.5 * (G + adjoint(G))


def raw_backward_shift(b: BlaschkeData) -> np.ndarray:
    """Matrix of ``S^*`` on the kernel-derivative basis: ``v^i_j -> conj(l_i) v^i_j + j v^i_{j-1}``."""
    labels = b.basis_labels()
    pos = {lab: k for k, lab in enumerate(labels)}
    M = np.zeros((len(labels), len(labels)), dtype=complex)
    for k, (i, j) in enumerate(labels):
        M[k, k] = np.conj(b.roots[i][0])
        if j > 0:
            M[pos[(i, j - 1)], k] = j
    return M


@dataclass(frozen=True)
class ModelSpace:
    blaschke: BlaschkeData
    gram: np.ndarray
    chol: np.ndarray          # lower triangular, gram = chol chol^*
    B: np.ndarray             # compressed shift in the orthonormal basis
    phases: np.ndarray        # unimodular factors of the orthonormal basis functions
    annihilation: float       # ||b(B)||
    ill_conditioned: bool

    @property
    def N(self) -> int:
        return self.B.shape[0]


def spectrum_defect(B: np.ndarray, b: BlaschkeData) -> float:
    """Compare the eigenvalues of ``B`` with the roots of ``b``.

    Eigenvalues are assigned to the nearest root; returns ``inf`` if the
    counts differ from the multiplicities, else the largest distance
    between a root and the mean of its assigned eigenvalues.
    """
    eigs = np.linalg.eigvals(B)
    lams = np.array([lam for lam, _ in b.roots])
    owner = np.argmin(np.abs(eigs[:, None] - lams[None, :]), axis=1)
    worst = 0.0
    for i, (lam, n) in enumerate(b.roots):
        mine = eigs[owner == i]
        if mine.size != n:
            return float("inf")
        worst = max(worst, abs(np.mean(mine) - lam))
    return worst


def _expanded_roots(b: BlaschkeData) -> list:
    return [lam for lam, n in b.roots for _ in range(n)]


def _taylor_factors(mu: complex, at: complex, m: int):
    """Taylor coefficients (orders ``< m``) at ``at`` of ``1/(1 - conj(mu) z)`` and ``(z - mu)/(1 - conj(mu) z)``."""
    a = 1.0 - np.conj(mu) * at
    k = np.arange(m)
    inv = np.conj(mu) ** k / a ** (k + 1)
    lin = np.zeros(m, dtype=complex)
    lin[0] = at - mu
    if m > 1:
        lin[1] = 1.0
    return inv, np.convolve(lin, inv)[:m]


def orthonormal_factor(b: BlaschkeData):
    """Cholesky factor of the Gram matrix and the phases of the orthonormal basis.

    ``L[a, c] = u_c^(j)(lambda_i)`` for the label ``a = (i, j)``, with the phase of
    ``u_c`` chosen so that the diagonal is positive; then ``gram = L L^*``.
    """
    labels = b.basis_labels()
    pos = {lab: k for k, lab in enumerate(labels)}
    N = len(labels)
    L = np.zeros((N, N), dtype=complex)
    phases = np.ones(N, dtype=complex)
    fact = [float(math.factorial(j)) for j in range(max(n for _, n in b.roots))]
    prefix = []
    for _, n in b.roots:
        e = np.zeros(n, dtype=complex)
        e[0] = 1.0
        prefix.append(e)
    for c, mu in enumerate(_expanded_roots(b)):
        scale = math.sqrt(1.0 - abs(mu) ** 2)
        for i, (lam, n) in enumerate(b.roots):
            inv, blas = _taylor_factors(mu, lam, n)
            series = scale * np.convolve(inv, prefix[i])[:n]
            for j in range(n):
                L[pos[(i, j)], c] = fact[j] * series[j]
            prefix[i] = np.convolve(prefix[i], blas)[:n]
        d = L[c, c]
        if d == 0:
            raise IllConditioned("orthonormal model basis degenerated (roots too close)")
        phases[c] = np.conj(d) / abs(d)
        L[:, c] *= phases[c]
    return L, phases


def compressed_shift(b: BlaschkeData, phases: np.ndarray) -> np.ndarray:
    """``<S u_c, u_a>``: lower triangular with the roots on the diagonal."""
    mu = np.array(_expanded_roots(b))
    N = mu.size
    rad = np.sqrt(1.0 - np.abs(mu) ** 2)
    B = np.diag(mu).astype(complex)
    for c in range(N):
        run = 1.0 + 0j
        for a in range(c + 1, N):
            B[a, c] = rad[a] * rad[c] * run
            run *= -np.conj(mu[a])
    return np.conj(phases)[:, None] * B * phases[None, :]


def build_model_space(b: BlaschkeData, tol: Tolerances = DEFAULT_TOL) -> ModelSpace:
    G = gram_matrix(b)
    L, phases = orthonormal_factor(b)
    B = compressed_shift(b, phases)
    radius = max(abs(lam) for lam, _ in b.roots)
    ann = operator_norm(b.at_matrix(B))
    ms = ModelSpace(b, G, L, B, phases, ann, radius > ILL_CONDITIONED_RADIUS)
    _verify(ms)
    return ms


def _verify(ms: ModelSpace):
    if ms.ill_conditioned:
        return      # reported, not enforced
    if ms.annihilation > 1e-9:
        raise InternalError(f"b(B) does not vanish (norm {ms.annihilation:.3e})")
    nb = operator_norm(ms.B)
    if nb > 1 + 1e-10:
        raise InternalError(f"compressed shift has norm {nb:.15g} > 1")
    if spectral_radius(ms.B) >= 1:
        raise InternalError("compressed shift is not c.n.u.")


def model_of(T, tol: Tolerances = DEFAULT_TOL) -> ModelSpace:
    return build_model_space(minimal_polynomial(T, tol), tol)


def constrained_poisson_kernel_1d(T, ms: ModelSpace, tol: Tolerances = DEFAULT_TOL,
                                  defect_embed: np.ndarray | None = None) -> np.ndarray:
    """Exact compression of the Poisson kernel of ``T`` to the model space.

    Returns the ``(N * d) x dim`` matrix of ``h -> sum_b u_b (x) <K_T h, u_b>``
    where ``u_b`` is the orthonormal model basis and ``d`` the defect rank.
    ``defect_embed`` overrides the defect coordinates (rows ``Delta`` in an
    orthonormal basis of the defect space).
    """
    T = as_matrix(T, "T")
    n = T.shape[0]
    embed = defect_space([T], 1.0, tol).embed if defect_embed is None else as_matrix(defect_embed)
    d = embed.shape[0]
    Ts = adjoint(T)
    I = np.eye(n, dtype=complex)
    resolvent = {}
    for lam, _ in ms.blaschke.roots:
        Rlam = I - lam * Ts
        cond = np.linalg.cond(Rlam)
        if not np.isfinite(cond) or cond > RESOLVENT_COND_LIMIT:
            raise IllConditioned(f"resolvent at {lam} has condition number {cond:.3e}")
        resolvent[lam] = sla.solve(Rlam, I)
    # component along u_c is Delta * conj(u_c)(T^*), conj(u)(z) := conj(u(conj z))
    rows = []
    prefix = I.copy()
    for c, mu in enumerate(_expanded_roots(ms.blaschke)):
        inv = resolvent[mu]
        rows.append(np.conj(ms.phases[c]) * math.sqrt(1.0 - abs(mu) ** 2) * (embed @ inv @ prefix))
        prefix = prefix @ (Ts - np.conj(mu) * I) @ inv
    K = np.stack(rows) if rows else np.zeros((0, d, n), dtype=complex)
    return K.reshape(ms.N * d, n)
