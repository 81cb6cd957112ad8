"""Unitary colligations built from commuting (or intertwined) row contractions.

Given row contractions ``T1`` on ``H``, ``T1p`` on ``H'`` and a row operator
``T2 = [T2_1 .. T2_n2]`` from ``H'`` into ``H`` with ``T1_i T2_j = T2_j T1p_i``,
the map

    X h = (Delta_1 h, Delta_2 T1_1^* h, ..., Delta_2 T1_n1^* h)
      |->  Y h = (Delta_1' T2_1^* h, ..., Delta_1' T2_n2^* h, Delta_2 h)

is isometric.  Any unitary ``U = [[A, B], [C, D]]`` extending it yields the
transfer function ``phi(z) = A^* + C^* (I - z D^*)^{-1} z B^*``.  Defect
spaces are always written in the coordinates of ``Defect.embed``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .cmatrix import (DEFAULT_TOL, Tolerances, adjoint, as_matrix, haar_unitary, operator_norm,
                      range_basis, spectral_radius, unitarity_defect, unitary_completion)
from .contraction import (defect_from_gram, is_pure, row_contraction, unitary_cnu_split)
from .errors import (IllConditioned, InternalError, InvalidInput, NotIntertwining, NotPure,
                     PadFailure, ShapeMismatch)
from .fock import MultiAnalyticOp, TruncatedFock, kernel_intertwining_residual, poisson_kernel
from .model_space import BlaschkeData, build_model_space, constrained_poisson_kernel_1d, minimal_polynomial

COND_LIMIT = 1e12


def _row_operator(T2, tol: Tolerances, name="T2"):
    mats = [as_matrix(M, f"{name}[{j}]") for j, M in enumerate(T2)]
    if not mats:
        raise InvalidInput(f"{name} needs at least one entry")
    shape = mats[0].shape
    for j, M in enumerate(mats):
        if M.shape != shape:
            raise ShapeMismatch(f"{name}[{j}] has shape {M.shape}, expected {shape}")
    norm = operator_norm(np.hstack(mats))
    if norm > 1 + tol.contraction_slack:
        from .errors import NotContraction
        raise NotContraction(f"{name} has row norm {norm:.12g} > 1")
    return mats


@dataclass(frozen=True)
class DefectIsometry:
    X: np.ndarray
    Y: np.ndarray
    E1: np.ndarray      # defect coordinates of T1   (d1 x dim)
    E2: np.ndarray      # defect coordinates of T2   (d2 x dim)
    E1p: np.ndarray     # defect coordinates of T1p  (d1p x dim')
    n1: int
    n2: int
    energy_residual: float

    @property
    def d1(self):
        return self.E1.shape[0]

    @property
    def d2(self):
        return self.E2.shape[0]

    @property
    def d1p(self):
        return self.E1p.shape[0]


def intertwining_isometry(T1, T2, T1p=None, tol: Tolerances = DEFAULT_TOL) -> DefectIsometry:
    """Build ``X`` and ``Y``; ``T1p`` defaults to ``T1`` (the commuting case)."""
    R1 = row_contraction(T1, tol)
    R1p = R1 if T1p is None else row_contraction(T1p, tol)
    if R1.n != R1p.n:
        raise ShapeMismatch(f"T1 has {R1.n} entries but T1p has {R1p.n}")
    T2 = _row_operator(T2, tol)
    if T2[0].shape != (R1.dim, R1p.dim):
        raise ShapeMismatch(f"T2 entries must be {R1.dim} x {R1p.dim}, got {T2[0].shape}")
    for i in range(R1.n):
        for j, M in enumerate(T2):
            res = operator_norm(R1[i] @ M - M @ R1p[i])
            if res > tol.residual_tol * (1 + operator_norm(R1[i])) * (1 + operator_norm(M)):
                raise NotIntertwining(f"T1[{i}] T2[{j}] != T2[{j}] T1p[{i}] (residual {res:.3e})")
    E1 = defect_from_gram(R1.gram(), 1.0, tol).embed
    E1p = defect_from_gram(R1p.gram(), 1.0, tol).embed
    E2 = defect_from_gram(sum(M @ adjoint(M) for M in T2), 1.0, tol).embed
    X = np.vstack([E1] + [E2 @ adjoint(T) for T in R1])
    Y = np.vstack([E1p @ adjoint(M) for M in T2] + [E2])
    energy = operator_norm(adjoint(X) @ X - adjoint(Y) @ Y)
    if energy > 1e-9:
        raise InternalError(f"defect energy identity fails (residual {energy:.3e})")
    return DefectIsometry(X, Y, E1, E2, E1p, R1.n, len(T2), energy)


@dataclass(frozen=True)
class UnitaryColligation:
    """``U = [[A, B], [C, D]]`` with ``B = [B_1 .. B_n1]`` and ``D = [D_1 .. D_n1]``.

    Input coordinates of ``U``: ``D_T1 (+) pad_in (+) n1 copies of D_T2``;
    output coordinates: ``n2 copies of D_T1' (+) pad_out (+) D_T2``.
    """

    U: np.ndarray
    d1: int
    d2: int
    d1p: int
    n1: int
    n2: int
    pad_in: int
    pad_out: int
    mode: str = "canonical"
    seed: int | None = None
    unitarity: float = 0.0
    restriction: float = 0.0

    @property
    def top(self) -> int:
        return self.n2 * self.d1p + self.pad_out

    @property
    def left(self) -> int:
        return self.d1 + self.pad_in

    @property
    def A(self):
        return self.U[: self.top, : self.left]

    @property
    def B(self):
        return self.U[: self.top, self.left:]

    @property
    def C(self):
        return self.U[self.top:, : self.left]

    @property
    def D(self):
        return self.U[self.top:, self.left:]

    def B_block(self, i: int):
        """``B_i`` for 1-based ``i``."""
        return self.B[:, (i - 1) * self.d2: i * self.d2]

    def D_block(self, i: int):
        return self.D[:, (i - 1) * self.d2: i * self.d2]

    @property
    def phi_in(self) -> int:
        return self.top

    @property
    def phi_out(self) -> int:
        return self.left


def pad_sizes(iso: DefectIsometry, pad_policy: str = "minimal"):
    delta = iso.n2 * iso.d1p + iso.d2 - iso.d1 - iso.n1 * iso.d2
    if pad_policy == "none":
        if delta:
            raise PadFailure(f"ambient dimensions differ by {delta} and padding is disabled")
        return 0, 0
    if pad_policy != "minimal":
        raise InvalidInput(f"unknown pad policy {pad_policy!r}")
    return max(delta, 0), max(-delta, 0)


def unitary_extension(iso: DefectIsometry, mode: str = "canonical", seed: int | None = None,
                      pad_policy: str = "minimal", tol: Tolerances = DEFAULT_TOL) -> UnitaryColligation:
    a, b = pad_sizes(iso, pad_policy)
    top = iso.n2 * iso.d1p
    Xp = np.vstack([iso.X[: iso.d1], np.zeros((a, iso.X.shape[1])), iso.X[iso.d1:]])
    Yp = np.vstack([iso.Y[:top], np.zeros((b, iso.Y.shape[1])), iso.Y[top:]])
    P, s, Qh = range_basis(Xp, tol.rank_tol)
    W = Yp @ adjoint(Qh) / s if s.size else np.zeros((Yp.shape[0], 0), dtype=complex)
    if mode == "canonical":
        mixing = None
    elif mode == "sampled":
        if seed is None:
            raise InvalidInput("sampled extensions need a seed")
        mixing = haar_unitary(Xp.shape[0] - P.shape[1], np.random.default_rng(seed))
    else:
        raise InvalidInput(f"unknown extension mode {mode!r}")
    U = unitary_completion(P, W, tol.updated(residual_tol=max(tol.residual_tol, 1e-8)), mixing)
    col = UnitaryColligation(U, iso.d1, iso.d2, iso.d1p, iso.n1, iso.n2, a, b, mode, seed,
                             unitarity_defect(U), operator_norm(U @ Xp - Yp))
    if col.unitarity > 1e-10:
        raise InternalError(f"extension is not unitary (defect {col.unitarity:.3e})")
    if col.restriction > 1e-9:
        raise InternalError(f"extension does not restrict to the isometry (residual {col.restriction:.3e})")
    return col


def sampled_extensions(iso: DefectIsometry, samples: int, seed: int = 0, pad_policy: str = "minimal",
                       tol: Tolerances = DEFAULT_TOL):
    """The canonical extension followed by ``samples`` Haar-mixed ones with seeds derived from ``seed``."""
    out = [unitary_extension(iso, "canonical", None, pad_policy, tol)]
    seeds = np.random.SeedSequence(seed).generate_state(samples) if samples else []
    for s in seeds:
        out.append(unitary_extension(iso, "sampled", int(s), pad_policy, tol))
    return out


# --- transfer functions ----------------------------------------------------------


def _need_single(col):
    if col.n1 != 1:
        raise InvalidInput("scalar-argument evaluation needs n1 = 1")


def transfer_eval_scalar(col: UnitaryColligation, z: complex) -> np.ndarray:
    _need_single(col)
    z = complex(z)
    if abs(z) >= 1:
        raise InvalidInput(f"|z| = {abs(z)} is not inside the unit disk")
    As, Bs, Cs, Ds = adjoint(col.A), adjoint(col.B), adjoint(col.C), adjoint(col.D)
    I = np.eye(col.d2, dtype=complex)
    return As + Cs @ sla.solve(I - z * Ds, z * Bs) if col.d2 else As.copy()


def transfer_eval_at_matrix(col: UnitaryColligation, M) -> np.ndarray:
    """``I (x) A^* + (I (x) C^*)(I - M (x) D^*)^{-1}(M (x) B^*)``."""
    _need_single(col)
    M = as_matrix(M, "M")
    m = M.shape[0]
    Im = np.eye(m, dtype=complex)
    out = np.kron(Im, adjoint(col.A))
    if col.d2 == 0:
        return out
    if spectral_radius(M) * operator_norm(col.D) >= 1:
        raise IllConditioned("resolvent (I - M (x) D^*) may not exist: rho(M) ||D|| >= 1")
    R = np.eye(m * col.d2, dtype=complex) - np.kron(M, adjoint(col.D))
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(f"resolvent condition number {cond:.3e}")
    return out + np.kron(Im, adjoint(col.C)) @ sla.solve(R, np.kron(M, adjoint(col.B)))


def taylor_coefficients(col: UnitaryColligation, count: int):
    """``c_0 = A^*``, ``c_k = C^* (D^*)^(k-1) B^*``."""
    _need_single(col)
    out = [adjoint(col.A)]
    P = adjoint(col.C)
    for _ in range(1, count):
        out.append(P @ adjoint(col.B))
        P = P @ adjoint(col.D)
    return out


def transfer_series_fock(col: UnitaryColligation, space: TruncatedFock) -> MultiAnalyticOp:
    """Fourier coefficients ``theta_() = A^*`` and ``theta_(a_1..a_q i) = C^* D_a1^* .. D_aq^* B_i^*``."""
    if space.n != col.n1:
        raise ShapeMismatch(f"space has {space.n} generators, colligation has n1 = {col.n1}")
    coeffs = {(): adjoint(col.A)}
    prefix = {(): adjoint(col.C)}
    Ds = [adjoint(col.D_block(i)) for i in range(1, col.n1 + 1)]
    Bs = [adjoint(col.B_block(i)) for i in range(1, col.n1 + 1)]
    for w in space.words[1:]:
        coeffs[w] = prefix[w[:-1]] @ Bs[w[-1] - 1]
        if len(w) < space.L:
            prefix[w] = prefix[w[:-1]] @ Ds[w[-1] - 1]
    return MultiAnalyticOp(col.n1, coeffs)


def _boundary_reduction(col: UnitaryColligation, tol: Tolerances):
    # The unitary part of D is invisible to B and C (U is unitary), so it can
    # be dropped; what remains has spectral radius < 1 and extends to the circle.
    split = unitary_cnu_split(col.D, tol)
    Hc = split.cnu_basis
    return adjoint(col.A), adjoint(col.C) @ Hc, adjoint(Hc) @ adjoint(col.D) @ Hc, adjoint(Hc) @ adjoint(col.B)


@dataclass
class TransferFunction:
    """``scale * phi`` for a colligation ``col`` (``col`` is None for the zero function)."""

    col: UnitaryColligation | None
    scale: float = 1.0
    in_dim: int = 0
    out_dim: int = 0
    _reduced: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.col is not None:
            self.in_dim, self.out_dim = self.col.phi_in, self.col.phi_out

    def __call__(self, z) -> np.ndarray:
        if self.col is None:
            return np.zeros((self.out_dim, self.in_dim), dtype=complex)
        return self.scale * transfer_eval_scalar(self.col, z)

    def at_matrix(self, M) -> np.ndarray:
        if self.col is None:
            m = as_matrix(M).shape[0]
            return np.zeros((m * self.out_dim, m * self.in_dim), dtype=complex)
        return self.scale * transfer_eval_at_matrix(self.col, M)

    def boundary(self, theta, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        """Value at ``e^{i theta}`` (continuous extension)."""
        if self.col is None:
            return np.zeros((self.out_dim, self.in_dim), dtype=complex)
        if self._reduced is None:
            self._reduced = _boundary_reduction(self.col, tol)
        As, Cs, Ds, Bs = self._reduced
        z = np.exp(1j * theta)
        if Ds.shape[0] == 0:
            return self.scale * As
        return self.scale * (As + Cs @ sla.solve(np.eye(Ds.shape[0]) - z * Ds, z * Bs))

    def grid_norm(self, radius: float = 1.0, points: int = 512) -> float:
        theta = 2 * np.pi * np.arange(points) / points
        if radius == 1.0:
            return max(operator_norm(self.boundary(t)) for t in theta)
        return max(operator_norm(self(radius * np.exp(1j * t))) for t in theta)

    def boundary_sup(self, points: int = 2048, refine: int = 4) -> float:
        """Supremum of ``||value||`` on the circle: grid search plus local refinement of the best points."""
        if self.col is None:
            return 0.0
        theta = 2 * np.pi * np.arange(points) / points
        vals = np.array([operator_norm(self.boundary(t)) for t in theta])
        best = float(vals.max())
        h = 2 * np.pi / points
        for k in np.argsort(vals)[::-1][:refine]:
            res = minimize_scalar(lambda t: -operator_norm(self.boundary(t)),
                                  bounds=(theta[k] - h, theta[k] + h), method="bounded",
                                  options={"xatol": 1e-12})
            best = max(best, -float(res.fun))
        return best


def isometry_condition_check(col: UnitaryColligation, r_sequence=(0.9, 0.99, 0.999),
                             tol: Tolerances = DEFAULT_TOL):
    """Is ``phi(R)`` an isometry?

    Returns ``(likely, scores)`` with ``scores[r] = (1 - r^2) ||B Y_r B^*||``,
    ``Y_r = sum_k r^{2k} sum_{|a| = k} D_a D_a^*``.  For ``n1 = 1`` the answer is
    exact: isometric iff the range of ``B^*`` lies in the c.n.u. part of ``D``.
    """
    d2 = col.d2
    scores = {}
    Ds = [col.D_block(i) for i in range(1, col.n1 + 1)]
    for r in r_sequence:
        if d2 == 0:
            scores[r] = 0.0
            continue
        # Stein equation  Y = I + r^2 sum_i D_i Y D_i^*
        L = np.eye(d2 * d2, dtype=complex) - r * r * sum(np.kron(D, np.conj(D)) for D in Ds)
        Y = np.linalg.solve(L, np.eye(d2, dtype=complex).reshape(-1)).reshape(d2, d2)
        scores[r] = (1 - r * r) * operator_norm(col.B @ Y @ adjoint(col.B))
    if col.n1 == 1:
        if d2 == 0:
            return True, scores
        split = unitary_cnu_split(col.D, tol)
        leak = operator_norm(adjoint(split.unitary_basis) @ adjoint(col.B)) if split.unitary_basis.shape[1] else 0.0
        return bool(leak <= tol.residual_tol), scores
    vals = [scores[r] for r in r_sequence]
    likely = all(b <= a + 1e-12 for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-2
    return likely, scores


# --- the dilation pair -----------------------------------------------------------


def _pad_rows(K: np.ndarray, N: int, d: int, total: int) -> np.ndarray:
    """Embed ``C^N (x) C^d`` into ``C^N (x) C^total`` (extra coordinates zero)."""
    if total == d:
        return K
    out = np.zeros((N, total, K.shape[1]), dtype=complex)
    out[:, :d] = K.reshape(N, d, K.shape[1])
    return out.reshape(N * total, K.shape[1])


@dataclass
class AndoDilation:
    model: object
    colligation: UnitaryColligation
    phi: TransferFunction
    K: np.ndarray
    V1: np.ndarray          # B_1 (x) I
    V2: np.ndarray          # phi(B_1)
    certificates: dict

    def ok(self) -> bool:
        return all(v["pass"] for v in self.certificates.values())


CERT_LIMITS = {"isometry": 1e-9, "covariance_T1": 1e-9, "covariance_T2": 1e-8,
               "commutation": 1e-10, "contractivity": 1e-9}


def ando_dilation_pair(T1, T2, mode: str = "canonical", seed: int | None = None,
                       tol: Tolerances = DEFAULT_TOL, model=None) -> AndoDilation:
    """Commuting pair ``(B_1 (x) I, phi(B_1))`` on ``model (x) D_T1`` dilating ``(T1, T2)``."""
    T1 = as_matrix(T1, "T1")
    T2 = as_matrix(T2, "T2")
    iso = intertwining_isometry([T1], [T2], tol=tol)
    col = unitary_extension(iso, mode, seed, "none", tol)
    ms = model if model is not None else build_model_space(minimal_polynomial(T1, tol), tol)
    K = constrained_poisson_kernel_1d(T1, ms, tol, defect_embed=iso.E1)
    phi = TransferFunction(col)
    V1 = np.kron(ms.B, np.eye(iso.d1))
    V2 = phi.at_matrix(ms.B)
    n = T1.shape[0]
    vals = {
        "isometry": operator_norm(adjoint(K) @ K - np.eye(n)),
        "covariance_T1": operator_norm(K @ adjoint(T1) - adjoint(V1) @ K),
        "covariance_T2": operator_norm(K @ adjoint(T2) - adjoint(V2) @ K),
        "commutation": operator_norm(V1 @ V2 - V2 @ V1),
        "contractivity": max(0.0, operator_norm(V2) - 1.0),
    }
    certs = {k: {"value": v, "limit": CERT_LIMITS[k], "pass": bool(v <= CERT_LIMITS[k])}
             for k, v in vals.items()}
    return AndoDilation(ms, col, phi, K, V1, V2, certs)


def lcm_blaschke(*datas: BlaschkeData, tol: Tolerances = DEFAULT_TOL, merge: float = 1e-7) -> BlaschkeData:
    """Roots of all inputs with the largest multiplicity seen (roots within ``merge`` identified)."""
    roots: list = []
    for b in datas:
        for lam, n in b.roots:
            for k, (mu, m) in enumerate(roots):
                if abs(mu - lam) <= merge:
                    roots[k] = (mu, max(m, n))
                    break
            else:
                roots.append((lam, n))
    return BlaschkeData.create(roots, tol)


@dataclass
class LiftResult:
    psi: TransferFunction
    scale: float
    certificates: dict


def commutant_lift(T, Tp, A, mode: str = "canonical", seed: int | None = None,
                   tol: Tolerances = DEFAULT_TOL, grid: int = 512) -> LiftResult:
    """Contractive-times-``||A||`` symbol ``Psi`` with ``K_{T'} A^* = Psi(R)^* K_T``.

    ``A`` maps the space of ``Tp`` into that of ``T`` and satisfies ``A Tp = T A``.
    """
    T = as_matrix(T, "T")
    Tp = as_matrix(Tp, "Tp")
    A = as_matrix(A, "A")
    if A.shape != (T.shape[0], Tp.shape[0]):
        raise ShapeMismatch(f"A must be {T.shape[0]} x {Tp.shape[0]}, got {A.shape}")
    for name, M in (("T", T), ("Tp", Tp)):
        if not is_pure([M], tol).pure:
            raise NotPure(f"{name} is not a pure contraction")
    res = operator_norm(A @ Tp - T @ A)
    nA = operator_norm(A)
    if res > tol.residual_tol * (1 + nA) * (1 + max(operator_norm(T), operator_norm(Tp))):
        raise NotIntertwining(f"A Tp != T A (residual {res:.3e})")
    if nA == 0:
        d = defect_from_gram(T @ adjoint(T), 1.0, tol).embed.shape[0]
        dp = defect_from_gram(Tp @ adjoint(Tp), 1.0, tol).embed.shape[0]
        psi = TransferFunction(None, 0.0, dp, d)
        return LiftResult(psi, 0.0, {"upper": {"value": 0.0, "pass": True},
                                     "interpolation": {"value": 0.0, "pass": True}})
    iso = intertwining_isometry([T], [A / nA], [Tp], tol)
    col = unitary_extension(iso, mode, seed, "minimal", tol)
    psi = TransferFunction(col, nA)
    upper = psi.grid_norm(0.99, grid)
    boundary = psi.boundary_sup()
    # interpolation on the joint model of T and Tp
    b = lcm_blaschke(minimal_polynomial(T, tol), minimal_polynomial(Tp, tol), tol=tol)
    ms = build_model_space(b, tol)
    K = constrained_poisson_kernel_1d(T, ms, tol, defect_embed=iso.E1)
    Kp = constrained_poisson_kernel_1d(Tp, ms, tol, defect_embed=iso.E1p)
    K = _pad_rows(K, ms.N, iso.d1, col.phi_out)
    Kp = _pad_rows(Kp, ms.N, iso.d1p, col.phi_in)
    interp = operator_norm(Kp @ adjoint(A) - adjoint(psi.at_matrix(ms.B)) @ K)
    certs = {
        "upper": {"value": upper, "limit": nA + 1e-8, "pass": bool(upper <= nA + 1e-8)},
        "boundary_norm": {"value": boundary, "target": nA,
                          "pass": bool(nA - 1e-6 <= boundary <= nA + 1e-8)},
        "interpolation": {"value": interp, "limit": 1e-8, "pass": bool(interp <= 1e-8)},
    }
    return LiftResult(psi, nA, certs)


# --- truncated verification of the Fock-space relations ------------------------------


def series_identity_residual(iso: DefectIsometry, col: UnitaryColligation, T1, L: int) -> float:
    """Residual of ``Y_top = A X_0 + B [sum_{p<=L} Z_p T1_i^*]_i`` with
    ``Z_0 = C X_0`` and ``Z_p = sum_j D_j Z_{p-1} T1_j^*`` (``X_0`` the padded ``Delta_1``)."""
    R1 = row_contraction(T1, check=False)
    X0 = np.vstack([iso.E1, np.zeros((col.pad_in, iso.E1.shape[1]))])
    top = iso.n2 * iso.d1p
    Ytop = np.vstack([iso.Y[:top], np.zeros((col.pad_out, iso.Y.shape[1]))])
    adj = [adjoint(T) for T in R1]
    Z = col.C @ X0
    total = Z.copy()
    for _ in range(L):
        Z = sum(col.D_block(j + 1) @ Z @ adj[j] for j in range(R1.n))
        total = total + Z
    series = np.vstack([total @ adj[i] for i in range(R1.n)])
    return operator_norm(Ytop - col.A @ X0 - col.B @ series)


def verify_intertwining_dilation(T1, T1p, T2, col: UnitaryColligation, space: TruncatedFock,
                                 tol: Tolerances = DEFAULT_TOL, iso: DefectIsometry | None = None) -> dict:
    """Residuals of the three Fock-space intertwining relations and the series identity at truncation ``L``.

    Each entry holds the residual and the bound it must respect.
    """
    R1 = row_contraction(T1, tol)
    R1p = row_contraction(T1p, tol)
    c1, c1p = is_pure(R1, tol), is_pure(R1p, tol)
    if not c1.pure or not c1p.pure:
        raise NotPure("T1 and T1p must be pure row contractions")
    if iso is None:
        iso = intertwining_isometry(R1, T2, R1p, tol)
    L = space.L
    K1 = poisson_kernel(R1, 1.0, space, tol)
    K1p = poisson_kernel(R1p, 1.0, space, tol)
    if K1.defect_dim != iso.d1 or K1p.defect_dim != iso.d1p:
        raise InternalError("defect ranks disagree between kernel and isometry")
    # the kernels and the isometry share defect coordinates only up to a unitary;
    # rebuild the kernels in the isometry's coordinates
    K1m = _recoordinate(K1.matrix, space.dim, K1.embed, iso.E1)
    K1pm = _recoordinate(K1p.matrix, space.dim, K1p.embed, iso.E1p)
    slack = 1e-8
    out = {}
    res = max((kernel_intertwining_residual(K1, R1, 1.0, (i,)) for i in range(1, R1.n + 1)), default=0.0)
    out["S_intertwining_T1"] = {"residual": res, "bound": K1.residual_tail + slack}
    res = max((kernel_intertwining_residual(K1p, R1p, 1.0, (i,)) for i in range(1, R1p.n + 1)), default=0.0)
    out["S_intertwining_T1p"] = {"residual": res, "bound": K1p.residual_tail + slack}
    phi = transfer_series_fock(col, space)
    K1pad = _pad_rows(K1m, space.dim, iso.d1, col.phi_out)
    image = phi.apply_adjoint(space, K1pad)            # (dim F * phi_in) x dim H
    image = image.reshape(space.dim, col.phi_in, -1)
    T2m = _row_operator(T2, tol)
    worst = 0.0
    for j, M in enumerate(T2m):
        lhs = K1pm @ adjoint(M)
        rhs = image[:, j * iso.d1p:(j + 1) * iso.d1p].reshape(space.dim * iso.d1p, -1)
        worst = max(worst, operator_norm(lhs - rhs))
    out["phi_intertwining_T2"] = {"residual": worst, "bound": K1.residual_tail + slack}
    tail = np.sqrt(c1.tail(L + 2))
    out["series_identity"] = {"residual": series_identity_residual(iso, col, R1, L),
                              "bound": operator_norm(col.B) * tail + slack}
    for v in out.values():
        v["pass"] = bool(v["residual"] <= v["bound"])
    return out


def _recoordinate(K: np.ndarray, blocks: int, old_embed: np.ndarray, new_embed: np.ndarray) -> np.ndarray:
    # both embeds are d x dim with orthonormal-row structure up to the same Delta;
    # the unitary between the coordinate systems is new_embed * pinv(old_embed)
    if old_embed.shape[0] == 0:
        return K
    W = new_embed @ np.linalg.pinv(old_embed)
    d = old_embed.shape[0]
    Kb = K.reshape(blocks, d, K.shape[1])
    return np.einsum("ef,bfn->ben", W, Kb).reshape(blocks * new_embed.shape[0], K.shape[1])
