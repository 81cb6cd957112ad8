"""Row contractions, defect operators and the unitary / c.n.u. split."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cmatrix import (DEFAULT_TOL, Tolerances, adjoint, as_matrix, operator_norm,
                      psd_eigh)
from .errors import InvalidInput, MarginViolation, NotCommuting, NotContraction, ShapeMismatch

# moduli in [1 - AMBIGUITY_FACTOR*margin, 1 - margin) cannot be classified safely
AMBIGUITY_FACTOR = 100.0


@dataclass(frozen=True)
class RowContraction:
    """An ``n``-tuple ``[T_1, ..., T_n]`` of ``dim x dim`` matrices with ``sum T_i T_i^* <= I``.

    Build it with :func:`row_contraction`, which validates the row norm.
    """

    entries: tuple
    dim: int
    row_norm: float

    @property
    def n(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def gram(self) -> np.ndarray:
        """``sum_i T_i T_i^*``."""
        G = np.zeros((self.dim, self.dim), dtype=complex)
        for T in self.entries:
            G += T @ adjoint(T)
        return G

    def word(self, letters) -> np.ndarray:
        """``T_alpha = T_{i_1} ... T_{i_k}`` for 1-based letters."""
        M = np.eye(self.dim, dtype=complex)
        for i in letters:
            M = M @ self.entries[i - 1]
        return M

    def adjoint_word(self, letters) -> np.ndarray:
        return adjoint(self.word(letters))


def row_contraction(entries, tol: Tolerances = DEFAULT_TOL, check: bool = True) -> RowContraction:
    if isinstance(entries, RowContraction):
        return entries
    if isinstance(entries, np.ndarray) and entries.ndim == 2:
        entries = [entries]
    mats = tuple(as_matrix(T, f"T[{i}]") for i, T in enumerate(entries))
    if not mats:
        raise InvalidInput("a row contraction needs at least one entry")
    dim = mats[0].shape[0]
    for i, T in enumerate(mats):
        if T.shape != (dim, dim):
            raise ShapeMismatch(f"T[{i}] has shape {T.shape}, expected {(dim, dim)}")
    row = np.hstack(mats) if dim else np.zeros((0, 0))
    norm = operator_norm(row)
    if check and norm > 1.0 + tol.contraction_slack:
        raise NotContraction(f"row norm {norm:.12g} exceeds 1")
    return RowContraction(mats, dim, norm)


@dataclass(frozen=True)
class CommutingPair:
    T1: RowContraction
    T2: RowContraction

    @property
    def dim(self) -> int:
        return self.T1.dim


def commuting_pair(T1, T2, tol: Tolerances = DEFAULT_TOL) -> CommutingPair:
    R1 = row_contraction(T1, tol)
    R2 = row_contraction(T2, tol)
    if R1.dim != R2.dim:
        raise ShapeMismatch(f"T1 acts on dimension {R1.dim}, T2 on {R2.dim}")
    for i, A in enumerate(R1):
        for j, B in enumerate(R2):
            res = operator_norm(A @ B - B @ A)
            bound = tol.residual_tol * (1 + operator_norm(A)) * (1 + operator_norm(B))
            if res > bound:
                raise NotCommuting(f"T1[{i}] and T2[{j}] do not commute (residual {res:.3e})")
    return CommutingPair(R1, R2)


@dataclass(frozen=True)
class Defect:
    """Defect operator together with coordinates on its range.

    ``embed`` is the ``d x dim`` map ``h -> Delta h`` written in an orthonormal
    basis of the defect space, so ``embed^* embed == Delta^2``.
    """

    delta: np.ndarray
    embed: np.ndarray

    @property
    def rank(self) -> int:
        return self.embed.shape[0]


def defect_from_gram(G: np.ndarray, r: float = 1.0, tol: Tolerances = DEFAULT_TOL) -> Defect:
    """Defect of a row operator given ``G = sum_i T_i T_i^*`` (the row may be rectangular)."""
    if not (0 < r <= 1):
        raise InvalidInput(f"r must lie in (0, 1], got {r}")
    P = np.eye(G.shape[0], dtype=complex) - r * r * G
    w, V = psd_eigh(P, tol)
    keep = w > tol.rank_tol * max(1.0, float(w.max(initial=0.0)))
    E = V[:, keep]
    s = np.sqrt(w[keep])
    delta = (E * s) @ adjoint(E)
    embed = s[:, None] * adjoint(E)
    return Defect(0.5 * (delta + adjoint(delta)), embed)


def defect_space(T, r: float = 1.0, tol: Tolerances = DEFAULT_TOL) -> Defect:
    T = row_contraction(T, tol)
    return defect_from_gram(T.gram(), r, tol)


def defect(T, r: float = 1.0, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """``(I - r^2 sum T_i T_i^*)^{1/2}``."""
    return defect_space(T, r, tol).delta


@dataclass
class PurityCertificate:
    pure: bool
    tails: list = field(default_factory=list)   # tails[k] = ||sum_{|alpha|=k} T_alpha T_alpha^*||
    decay_rate: float = float("nan")            # spectral radius of X -> sum T_i X T_i^*
    _T: RowContraction | None = None
    _X: np.ndarray | None = None

    def tail(self, L: int) -> float:
        """``||sum_{|alpha|=L} T_alpha T_alpha^*||``, extending the iteration if needed."""
        while len(self.tails) <= L:
            X = self._X
            X = sum(T @ X @ adjoint(T) for T in self._T.entries)
            self._X = 0.5 * (X + adjoint(X))
            self.tails.append(operator_norm(self._X))
        return self.tails[L]


def cp_map_spectral_radius(T: RowContraction) -> float:
    """Spectral radius of ``X -> sum T_i X T_i^*`` acting on ``dim x dim`` matrices."""
    if T.dim == 0:
        return 0.0
    if T.dim <= 48:
        # vec(T X T^*) = (conj(T) kron T) vec(X)
        M = sum(np.kron(np.conj(A), A) for A in T.entries)
        return float(np.max(np.abs(np.linalg.eigvals(M))))
    raise InvalidInput("purity certification is limited to dim <= 48")


def is_pure(T, tol: Tolerances = DEFAULT_TOL, extra_tail: int = 0) -> PurityCertificate:
    """Decide purity of a row contraction by iterating ``X_{k+1} = sum T_i X_k T_i^*``.

    The iterates give the truncation tails consumed by the Fock module.  When
    they do not reach ``1e-12`` within ``4*dim`` steps, purity is decided by
    the spectral radius of the completely positive map (geometric decay rate
    of the iterates) being below ``1 - unimodular_margin``.
    """
    T = row_contraction(T, tol)
    X = np.eye(T.dim, dtype=complex)
    cert = PurityCertificate(False, [operator_norm(X)], _T=T, _X=X)
    steps = max(4 * T.dim, 10) + extra_tail
    for k in range(1, steps + 1):
        if cert.tail(k) < 1e-12:
            cert.pure = True
            break
    rate = cp_map_spectral_radius(T)
    cert.decay_rate = rate
    if not cert.pure:
        cert.pure = rate < 1.0 - tol.unimodular_margin
    return cert


@dataclass(frozen=True)
class UnitarySplit:
    unitary_basis: np.ndarray     # columns span H_u
    cnu_basis: np.ndarray         # columns span H_cnu
    moduli: np.ndarray


def _check_reducing(T: np.ndarray, E: np.ndarray, F: np.ndarray, tol: Tolerances, what: str):
    if E.shape[1] == 0 or F.shape[1] == 0:
        return
    scale = max(1.0, operator_norm(T))
    off = max(operator_norm(adjoint(F) @ T @ E), operator_norm(adjoint(E) @ T @ F))
    if off > tol.residual_tol * scale:
        raise NotCommuting(f"{what} is not reducing (off-block residual {off:.3e})")


def unitary_cnu_split(T, tol: Tolerances = DEFAULT_TOL) -> UnitarySplit:
    """Split a contraction matrix into its unitary and completely non-unitary parts."""
    T = as_matrix(T, "T")
    if T.shape[0] != T.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got {T.shape}")
    n = T.shape[0]
    if operator_norm(T) > 1.0 + tol.contraction_slack:
        raise NotContraction(f"norm {operator_norm(T):.12g} exceeds 1")
    if n == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return UnitarySplit(empty, empty, np.zeros(0))
    margin = tol.unimodular_margin
    moduli = np.abs(np.linalg.eigvals(T))
    ambiguous = moduli[(moduli < 1 - margin) & (moduli >= 1 - AMBIGUITY_FACTOR * margin)]
    if ambiguous.size:
        raise MarginViolation(
            f"eigenvalue modulus {ambiguous[0]:.12g} is too close to 1 to classify",
            modulus=float(ambiguous[0]))
    Tt, Z, sdim = sla.schur(T, output="complex", sort=lambda x: abs(x) >= 1 - margin)
    Hu, Hc = Z[:, :sdim], Z[:, sdim:]
    try:
        _check_reducing(T, Hu, Hc, tol, "unimodular eigenspace")
    except NotCommuting as exc:
        raise MarginViolation(str(exc), modulus=float(moduli.max())) from None
    if sdim:
        Tu = adjoint(Hu) @ T @ Hu
        if operator_norm(adjoint(Tu) @ Tu - np.eye(sdim)) > tol.residual_tol * 10:
            raise MarginViolation("restriction to the unimodular part is not unitary",
                                  modulus=float(moduli.max()))
    return UnitarySplit(Hu, Hc, moduli)


CLASS_PATTERN = (("u", "u"), ("u", "cnu"), ("cnu", "u"), ("cnu", "cnu"))


@dataclass(frozen=True)
class StructureDecomposition:
    """Four mutually orthogonal blocks reducing both operators.

    ``bases[i]`` is a ``dim x dim_i`` isometry; ``blocks[i] = (T1_i, T2_i)``
    are the compressions.  Block classes follow :data:`CLASS_PATTERN`.
    """

    bases: tuple
    blocks: tuple

    def nonempty(self):
        return [i for i, E in enumerate(self.bases) if E.shape[1] > 0]

    def reconstruct(self):
        U = np.hstack(self.bases)
        T1 = U @ self._blockdiag(0) @ adjoint(U)
        T2 = U @ self._blockdiag(1) @ adjoint(U)
        return T1, T2

    def _blockdiag(self, j):
        return sla.block_diag(*[b[j] for b in self.blocks]).astype(complex)


def structure_decomposition(pair, tol: Tolerances = DEFAULT_TOL) -> StructureDecomposition:
    if isinstance(pair, CommutingPair):
        if pair.T1.n != 1 or pair.T2.n != 1:
            raise InvalidInput("structure decomposition needs single operators (n1 = n2 = 1)")
        T1, T2 = pair.T1[0], pair.T2[0]
    else:
        T1, T2 = (as_matrix(M) for M in pair)
        commuting_pair([T1], [T2], tol)

    def split_within(T, basis):
        # split T compressed to span(basis); returns (unitary part, cnu part) in ambient coordinates
        S = unitary_cnu_split(adjoint(basis) @ T @ basis, tol)
        return basis @ S.unitary_basis, basis @ S.cnu_basis

    n = T1.shape[0]
    I = np.eye(n, dtype=complex)
    Hu, Hc = split_within(T1, I)
    _check_reducing(T2, Hu, Hc, tol, "unitary part of T1 (for T2)")
    H1, H2 = split_within(T2, Hu)
    H3, H4 = split_within(T2, Hc)
    bases = (H1, H2, H3, H4)
    for a in range(4):
        rest = np.hstack([bases[b] for b in range(4) if b != a])
        _check_reducing(T1, bases[a], rest, tol, f"block {a + 1} (for T1)")
        _check_reducing(T2, bases[a], rest, tol, f"block {a + 1} (for T2)")
    blocks = tuple((adjoint(E) @ T1 @ E, adjoint(E) @ T2 @ E) for E in bases)
    return StructureDecomposition(bases, blocks)
