"""Model-based norm bounds for polynomials in commuting contractive matrices.

:class:`BoundEngine` caches everything that depends only on the pair (models,
sampled unitary extensions, the structure decomposition) so that many
polynomials can be checked against the same pair cheaply.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .cmatrix import DEFAULT_TOL, Tolerances, adjoint, as_matrix, operator_norm
from .contraction import commuting_pair, structure_decomposition, unitary_cnu_split
from .dilation import TransferFunction, intertwining_isometry, sampled_extensions
from .errors import AndoLabError, InvalidInput, MarginViolation, NotCNU, NotCommuting
from .model_space import ModelSpace, build_model_space, minimal_polynomial
from .polynomial import BivariatePolyMatrix, eval_bivariate, torus_sup_norm

EIGENSPACE_THRESHOLD = 1e-8
ADVISORY_RADIUS = 1 - 1e-4


@dataclass(frozen=True)
class BoundConfig:
    grid: int = 2048
    extensions: int = 16
    seed: int = 0
    chain_tol: float = 1e-7
    tol: Tolerances = DEFAULT_TOL


@dataclass
class OrderedDilations:
    """Model of the first operator and the dilation pairs for every sampled extension."""

    model: ModelSpace
    V1: np.ndarray
    V2s: list
    seeds: list

    @property
    def ill_conditioned(self) -> bool:
        return self.model.ill_conditioned


def _dilations(T1, T2, config: BoundConfig) -> OrderedDilations:
    tol = config.tol
    ms = build_model_space(minimal_polynomial(T1, tol), tol)
    iso = intertwining_isometry([T1], [T2], tol=tol)
    cols = sampled_extensions(iso, config.extensions, config.seed, "none", tol)
    V1 = np.kron(ms.B, np.eye(iso.d1))
    V2s = [TransferFunction(c).at_matrix(ms.B) for c in cols]
    return OrderedDilations(ms, V1, V2s, [c.seed for c in cols])


def _eigen_clusters(U: np.ndarray, radius: float = 1e-7):
    """Eigenvalues and orthonormal eigenspace bases of a normal matrix."""
    S, Z = sla.schur(U, output="complex")
    d = np.diag(S)
    groups: list = []
    for k, lam in enumerate(d):
        for g in groups:
            if abs(d[g[0]] - lam) <= radius:
                g.append(k)
                break
        else:
            groups.append([k])
    return [(complex(np.mean(d[g])), Z[:, g]) for g in groups]


def _check_unitary(M, tol, name):
    split = unitary_cnu_split(M, tol)
    if split.cnu_basis.shape[1]:
        raise MarginViolation(f"{name} is not unitary", modulus=float(split.moduli.min()))


def _check_cnu(M, tol, name):
    split = unitary_cnu_split(M, tol)
    if split.unitary_basis.shape[1]:
        raise NotCNU(f"{name} has a unitary part")


class BoundEngine:
    def __init__(self, T1, T2, config: BoundConfig = BoundConfig()):
        self.config = config
        pair = commuting_pair([as_matrix(T1, "T1")], [as_matrix(T2, "T2")], config.tol)
        self.T1 = pair.T1[0]
        self.T2 = pair.T2[0]
        self._am3_cache: dict = {}

    # -- cached pair data -----------------------------------------------------

    @cached_property
    def order12(self) -> OrderedDilations:
        return _dilations(self.T1, self.T2, self.config)

    @cached_property
    def order21(self) -> OrderedDilations:
        return _dilations(self.T2, self.T1, self.config)

    @cached_property
    def decomposition(self):
        return structure_decomposition((self.T1, self.T2), self.config.tol)

    @cached_property
    def _block4(self) -> "BoundEngine":
        dec = self.decomposition
        if dec.nonempty() == [3]:
            return self          # the whole space is the c.n.u. block; reuse our dilations
        A, B = dec.blocks[3]
        return BoundEngine(A, B, self.config)

    @cached_property
    def classes(self):
        tol = self.config.tol
        c1 = unitary_cnu_split(self.T1, tol)
        c2 = unitary_cnu_split(self.T2, tol)
        kind = lambda s: ("cnu" if s.unitary_basis.shape[1] == 0 else
                          "unitary" if s.cnu_basis.shape[1] == 0 else "mixed")
        return kind(c1), kind(c2)

    # -- bounds -------------------------------------------------------------------

    def direct_norm(self, P: BivariatePolyMatrix) -> float:
        return operator_norm(eval_bivariate(P, self.T1, self.T2, self.config.tol))

    @staticmethod
    def _am3_values(dil: OrderedDilations, P, tol):
        return [operator_norm(eval_bivariate(P, dil.V1, V2, tol, check=False)) for V2 in dil.V2s]

    def am3(self, P: BivariatePolyMatrix, swapped: bool = False) -> dict:
        """Minimum over the canonical and sampled extensions of ``||P(B (x) I, phi(B))||``."""
        key = (P.key(), swapped)
        if key in self._am3_cache:
            return self._am3_cache[key]
        dil = self.order21 if swapped else self.order12
        Q = P.swap() if swapped else P
        values = self._am3_values(dil, Q, self.config.tol)
        out = self._am3_cache[key] = {"value": min(values), "values": values, "seeds": dil.seeds,
                                      "ill_conditioned": dil.ill_conditioned}
        return out

    def min_both_orders(self, P) -> dict:
        a, b = self.am3(P), self.am3(P, swapped=True)
        return {"value": min(a["value"], b["value"]), "order12": a["value"], "order21": b["value"],
                "ill_conditioned": a["ill_conditioned"] or b["ill_conditioned"]}

    def unitary_pure(self, P, swapped: bool = False) -> dict:
        U, C = (self.T2, self.T1) if swapped else (self.T1, self.T2)
        Q = P.swap() if swapped else P
        return _unitary_pure(U, C, Q, self.config.tol)

    def two_unitary(self, P) -> float:
        return _two_unitary(self.T1, self.T2, P, self.config.tol)

    def general(self, P) -> dict:
        dec = self.decomposition
        cfg = self.config
        blocks = {}
        for i in dec.nonempty():
            A, B = dec.blocks[i]
            if i == 0:
                blocks["block1_two_unitary"] = _two_unitary(A, B, P, cfg.tol)
            elif i == 1:
                blocks["block2_unitary_pure"] = _unitary_pure(A, B, P, cfg.tol)["value"]
            elif i == 2:
                blocks["block3_pure_unitary"] = _unitary_pure(B, A, P.swap(), cfg.tol)["value"]
            else:
                blocks["block4_min_both_orders"] = self._block4.min_both_orders(P)["value"]
        return {"value": max(blocks.values()), "blocks": blocks}

    def torus(self, P) -> tuple:
        return torus_sup_norm(P, self.config.grid)

    # -- chain verification ---------------------------------------------------------

    def report(self, P: BivariatePolyMatrix) -> "BoundReport":
        cfg = self.config
        rep = BoundReport(direct_norm=self.direct_norm(P))
        c1, c2 = self.classes

        def attempt(name, fn):
            try:
                return fn()
            except AndoLabError as exc:
                rep.skipped[name] = f"{type(exc).__name__}: {exc}"
                return None

        if c1 == "cnu":
            r = attempt("am3_order12", lambda: self.am3(P))
            if r:
                rep.am3_order12 = r["value"]
                rep.sampled_values = r["values"]
                rep.seeds = r["seeds"]
                rep.flags["ill_conditioned_order12"] = r["ill_conditioned"]
        if c2 == "cnu":
            r = attempt("am3_order21", lambda: self.am3(P, swapped=True))
            if r:
                rep.am3_order21 = r["value"]
                rep.flags["ill_conditioned_order21"] = r["ill_conditioned"]
        if rep.am3_order12 is not None and rep.am3_order21 is not None:
            rep.min_both_orders = min(rep.am3_order12, rep.am3_order21)
        if c1 == "unitary" and c2 == "cnu":
            r = attempt("unitary_pure", lambda: self.unitary_pure(P))
            if r:
                rep.unitary_pure = r["value"]
                rep.unitary_pure_coarse = r["coarse"]
        if c1 == "unitary" and c2 == "unitary":
            v = attempt("two_unitary_exact", lambda: self.two_unitary(P))
            if v is not None:
                rep.two_unitary_exact = v
        g = attempt("general", lambda: self.general(P))
        if g:
            rep.general_composite = g["value"]
            rep.general_blocks = g["blocks"]
        rep.torus_bracket = self.torus(P)
        rep.extensions = cfg.extensions
        rep.chain_tol = cfg.chain_tol
        rep.verdicts = compute_verdicts(rep)
        return rep


AM3_TYPE_FIELDS = ("am3_order12", "am3_order21", "min_both_orders", "unitary_pure", "general_composite")


def compute_verdicts(rep: "BoundReport") -> list:
    """Inequality verdicts from the numbers stored in a report (also used for replay)."""
    tol = rep.chain_tol
    advisory = any(v for k, v in rep.flags.items() if k.startswith("ill_conditioned"))
    out = []

    def verdict(name, lhs, rhs):
        margin = rhs + tol - lhs
        status = "pass" if margin >= 0 else ("advisory" if advisory else "fail")
        out.append({"inequality": name, "lhs": lhs, "rhs": rhs, "margin": margin, "status": status})

    present = {f: getattr(rep, f) for f in AM3_TYPE_FIELDS if getattr(rep, f) is not None}
    for name, value in present.items():
        verdict(f"direct <= {name}", rep.direct_norm, value)
    if rep.two_unitary_exact is not None:
        verdict("direct <= two_unitary_exact", rep.direct_norm, rep.two_unitary_exact)
        verdict("two_unitary_exact <= direct", rep.two_unitary_exact, rep.direct_norm)
    hi = rep.torus_bracket[1]
    for name, value in present.items():
        verdict(f"{name} <= torus_hi", value, hi)
    verdict("direct <= torus_hi", rep.direct_norm, hi)
    return out


def _unitary_pure(U, C, P, tol) -> dict:
    """``max_lambda ||P(lambda, B_lambda)||`` over the eigenvalues of the unitary ``U``."""
    _check_unitary(U, tol, "first operator")
    _check_cnu(C, tol, "second operator")
    full = build_model_space(minimal_polynomial(C, tol), tol)
    fine, coarse = 0.0, 0.0
    for lam, E in _eigen_clusters(U):
        rest = np.eye(U.shape[0]) - E @ adjoint(E)
        off = operator_norm(rest @ C @ E) + operator_norm(E.conj().T @ C @ rest)
        if off > tol.residual_tol * max(1.0, operator_norm(C)):
            raise NotCommuting(f"eigenspace of {lam:.6g} does not reduce the second operator")
        Cl = adjoint(E) @ C @ E
        ms = build_model_space(minimal_polynomial(Cl, tol), tol)
        fine = max(fine, operator_norm(eval_bivariate(P, lam * np.eye(ms.N), ms.B, tol, check=False)))
        coarse = max(coarse, operator_norm(eval_bivariate(P, lam * np.eye(full.N), full.B, tol, check=False)))
    return {"value": fine, "coarse": coarse}


def _two_unitary(U1, U2, P, tol) -> float:
    _check_unitary(U1, tol, "first operator")
    _check_unitary(U2, tol, "second operator")
    best = 0.0
    for lam, E1 in _eigen_clusters(U1):
        for mu, E2 in _eigen_clusters(U2):
            s = np.linalg.svd(adjoint(E1) @ E2, compute_uv=False)
            if s.size and s[0] >= 1 - EIGENSPACE_THRESHOLD:
                best = max(best, operator_norm(P.at(lam, mu)))
    return best


@dataclass
class BoundReport:
    direct_norm: float
    am3_order12: float | None = None
    am3_order21: float | None = None
    min_both_orders: float | None = None
    sampled_values: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    extensions: int = 0
    unitary_pure: float | None = None
    unitary_pure_coarse: float | None = None
    two_unitary_exact: float | None = None
    general_composite: float | None = None
    general_blocks: dict = field(default_factory=dict)
    torus_bracket: tuple = (float("nan"), float("nan"))
    verdicts: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    chain_tol: float = 1e-7

    @classmethod
    def from_dict(cls, data: dict) -> "BoundReport":
        known = set(cls.__dataclass_fields__)
        rep = cls(**{k: v for k, v in data.items() if k in known})
        rep.torus_bracket = tuple(rep.torus_bracket)
        return rep

    @property
    def failures(self):
        return [v for v in self.verdicts if v["status"] == "fail"]

    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["torus_bracket"] = list(self.torus_bracket)
        out["seeds"] = [s if s is None else int(s) for s in self.seeds]
        return out


# --- functional entry points ------------------------------------------------------


def bound_am3(T1, T2, P, samples: int = 16, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> float:
    eng = BoundEngine(T1, T2, BoundConfig(extensions=samples, seed=seed, tol=tol))
    _check_cnu(eng.T1, tol, "T1")
    return eng.am3(P)["value"]


def bound_min_both_orders(T1, T2, P, samples: int = 16, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> float:
    eng = BoundEngine(T1, T2, BoundConfig(extensions=samples, seed=seed, tol=tol))
    return eng.min_both_orders(P)["value"]


def bound_unitary_pure(T1, T2, P, tol: Tolerances = DEFAULT_TOL) -> dict:
    commuting_pair([as_matrix(T1)], [as_matrix(T2)], tol)
    return _unitary_pure(as_matrix(T1), as_matrix(T2), P, tol)


def bound_two_unitary_exact(T1, T2, P, tol: Tolerances = DEFAULT_TOL) -> float:
    commuting_pair([as_matrix(T1)], [as_matrix(T2)], tol)
    if (P.k_rows, P.k_cols) != (1, 1):
        raise InvalidInput("the two-unitary bound takes a scalar polynomial")
    return _two_unitary(as_matrix(T1), as_matrix(T2), P, tol)


def bound_general(T1, T2, P, samples: int = 16, seed: int = 0, tol: Tolerances = DEFAULT_TOL) -> dict:
    return BoundEngine(T1, T2, BoundConfig(extensions=samples, seed=seed, tol=tol)).general(P)


def verify_chain(T1, T2, P, config: BoundConfig = BoundConfig()) -> BoundReport:
    return BoundEngine(T1, T2, config).report(P)
