"""Command-line front end.

Exit codes: 0 success / all verdicts pass, 1 verification failure,
2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bounds import BoundConfig, BoundEngine, BoundReport, compute_verdicts
from .cmatrix import DEFAULT_TOL, Tolerances
from .contraction import CLASS_PATTERN, commuting_pair, structure_decomposition
from .dilation import (ando_dilation_pair, commutant_lift, intertwining_isometry, isometry_condition_check,
                       taylor_coefficients, unitary_extension, verify_intertwining_dilation)
from .errors import InvalidInput, NotCommuting, NumericalFailure
from .fock import TruncatedFock
from .polynomial import BivariatePolyMatrix, FreePoly, HereditaryPoly

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


# --- JSON decoding ------------------------------------------------------------------


def _scalar(x, path):
    if isinstance(x, bool):
        raise InvalidInput("expected a number or [re, im]", path)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise InvalidInput("expected a number or [re, im]", path)


def decode_matrix(data, path="$"):
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise InvalidInput("expected a non-empty list of rows", path)
    width = len(data[0])
    rows = []
    for i, row in enumerate(data):
        if len(row) != width:
            raise InvalidInput(f"row has {len(row)} entries, expected {width}", f"{path}[{i}]")
        rows.append([_scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    M = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise InvalidInput("non-finite entry", path)
    return M


def encode_matrix(M):
    M = np.asarray(M)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _matrix_list(data, key, path):
    if key not in data:
        raise InvalidInput(f"missing field {key!r}", path)
    value = data[key]
    if not isinstance(value, list) or not value:
        raise InvalidInput("expected a non-empty list of matrices", f"{path}.{key}")
    return [decode_matrix(m, f"{path}.{key}[{i}]") for i, m in enumerate(value)]


def _tolerances(data, path):
    over = data.get("tolerances", {})
    if not isinstance(over, dict):
        raise InvalidInput("tolerances must be an object", f"{path}.tolerances")
    try:
        return DEFAULT_TOL.updated(**{k: float(v) for k, v in over.items()})
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc), f"{path}.tolerances") from None


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from None


def parse_pair(data):
    """``(T1, T2, tolerances)`` for single-operator pair files."""
    if not isinstance(data, dict):
        raise InvalidInput("pair file must be a JSON object", "$")
    tol = _tolerances(data, "$")
    T1 = _matrix_list(data, "T1", "$")
    T2 = _matrix_list(data, "T2", "$")
    if len(T1) != 1 or len(T2) != 1:
        raise InvalidInput("this command needs single operators (one matrix in T1 and in T2)", "$")
    if "dim" in data and data["dim"] != T1[0].shape[0]:
        raise InvalidInput(f"dim {data['dim']} disagrees with T1", "$.dim")
    for key, M in (("T1", T1[0]), ("T2", T2[0])):
        if M.shape[0] != M.shape[1] or M.shape != T1[0].shape:
            raise InvalidInput(f"expected a square matrix of size {T1[0].shape[0]}", f"$.{key}[0]")
    try:
        commuting_pair(T1, T2, tol)
    except NotCommuting as exc:
        raise InvalidInput(str(exc), "$.T2[0]") from None
    return T1[0], T2[0], tol


def parse_poly(data):
    if not isinstance(data, dict):
        raise InvalidInput("polynomial file must be a JSON object", "$")
    kind = data.get("kind", "bivariate")
    if kind == "bivariate":
        entries = data.get("entries")
        if not isinstance(entries, list) or not entries:
            raise InvalidInput("expected a non-empty matrix of term lists", "$.entries")
        decoded = []
        for r, row in enumerate(entries):
            if not isinstance(row, list):
                raise InvalidInput("expected a row of term lists", f"$.entries[{r}]")
            out_row = []
            for s, terms in enumerate(row):
                p = f"$.entries[{r}][{s}]"
                if not isinstance(terms, list):
                    raise InvalidInput("expected a list of [zdeg, wdeg, coeff] terms", p)
                out = []
                for t, term in enumerate(terms):
                    if not (isinstance(term, list) and len(term) == 3):
                        raise InvalidInput("term must be [zdeg, wdeg, coeff]", f"{p}[{t}]")
                    zd, wd, c = term
                    if not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in (zd, wd)):
                        raise InvalidInput("exponents must be non-negative integers", f"{p}[{t}]")
                    out.append((zd, wd, _scalar(c, f"{p}[{t}][2]")))
                out_row.append(out)
            decoded.append(out_row)
        for key, n in (("k_rows", len(decoded)), ("k_cols", len(decoded[0]))):
            if key in data and data[key] != n:
                raise InvalidInput(f"{key} = {data[key]} disagrees with entries", f"$.{key}")
        try:
            return BivariatePolyMatrix.from_terms(decoded)
        except InvalidInput as exc:
            raise InvalidInput(str(exc), "$.entries") from None
    if kind in ("free", "hereditary"):
        terms = data.get("terms")
        if not isinstance(terms, list):
            raise InvalidInput("expected a list of terms", "$.terms")
        keys = ("x", "y") if kind == "free" else ("alpha", "beta", "sigma", "gamma")
        out = []
        for t, term in enumerate(terms):
            p = f"$.terms[{t}]"
            if not isinstance(term, dict):
                raise InvalidInput("term must be an object", p)
            words = []
            for k in keys:
                w = term.get(k, [])
                if not isinstance(w, list) or not all(isinstance(a, int) and a >= 1 for a in w):
                    raise InvalidInput("word must be a list of generator indices >= 1", f"{p}.{k}")
                words.append(w)
            out.append((*words, _scalar(term.get("coeff", 1), f"{p}.coeff")))
        return FreePoly(out) if kind == "free" else HereditaryPoly(out)
    raise InvalidInput(f"unknown polynomial kind {kind!r}", "$.kind")


def as_bivariate(poly):
    if isinstance(poly, BivariatePolyMatrix):
        return poly
    if isinstance(poly, FreePoly):
        terms = []
        for x, y, c in poly.terms:
            if any(a != 1 for a in x + y):
                raise InvalidInput("free polynomials with more than one generator per variable "
                                   "need row-tuple commands", "$.terms")
            terms.append((len(x), len(y), c))
        return BivariatePolyMatrix.scalar(terms)
    raise InvalidInput("hereditary polynomials cannot be bounded by this command", "$.kind")


# --- output ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return encode_matrix(x) if x.ndim == 2 else [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    return x


def emit(command, payload, out_path):
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "tool_version": __version__,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    doc.update(_jsonable(payload))
    text = json.dumps(doc, indent=2, sort_keys=False)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# --- commands ---------------------------------------------------------------------------


def _config(args, tol):
    return BoundConfig(grid=args.grid, extensions=args.extensions, seed=args.seed, tol=tol)


def _bound_report(args):
    T1, T2, tol = parse_pair(load_json(args.pair))
    P = as_bivariate(parse_poly(load_json(args.poly)))
    return BoundEngine(T1, T2, _config(args, tol)).report(P)


def cmd_bound(args):
    rep = _bound_report(args)
    emit("bound", {"report": rep.to_dict(), "grid": args.grid, "seed": args.seed}, args.out)
    return EXIT_OK


def cmd_verify(args):
    if args.replay:
        doc = load_json(args.replay)
        if not isinstance(doc, dict) or not isinstance(doc.get("report"), dict):
            raise InvalidInput("replay file has no report object", "$.report")
        try:
            rep = BoundReport.from_dict(doc["report"])
            rep.verdicts = compute_verdicts(rep)
        except (TypeError, KeyError, IndexError) as exc:
            raise InvalidInput(f"malformed report: {exc}", "$.report") from None
    else:
        if not (args.pair and args.poly):
            raise InvalidInput("verify needs PAIR and POLY files, or --replay")
        rep = _bound_report(args)
    emit("verify", {"report": rep.to_dict(), "passed": rep.passed()}, args.out)
    return EXIT_OK if rep.passed() else EXIT_FAIL


def cmd_dilate(args):
    T1, T2, tol = parse_pair(load_json(args.pair))
    mode = "canonical" if args.seed is None else "sampled"
    dl = ando_dilation_pair(T1, T2, mode, args.seed, tol)
    col = dl.colligation
    likely, scores = isometry_condition_check(col, tol=tol)
    payload = {
        "model": {"roots": [[lam, n] for lam, n in dl.model.blaschke.roots], "B": dl.model.B,
                  "ill_conditioned": dl.model.ill_conditioned},
        "colligation": {"A": col.A, "B": col.B, "C": col.C, "D": col.D, "mode": col.mode, "seed": col.seed,
                        "pad_in": col.pad_in, "pad_out": col.pad_out,
                        "unitarity_defect": col.unitarity, "restriction_residual": col.restriction},
        "phi_at_model": dl.V2,
        "isometric_symbol": {"likely": likely, "scores": {str(r): v for r, v in scores.items()}},
        "certificates": dl.certificates,
        "passed": dl.ok(),
    }
    emit("dilate", payload, args.out)
    return EXIT_OK if dl.ok() else EXIT_FAIL


def cmd_decompose(args):
    T1, T2, tol = parse_pair(load_json(args.pair))
    dec = structure_decomposition((T1, T2), tol)
    blocks = []
    for i, (E, (A, B)) in enumerate(zip(dec.bases, dec.blocks)):
        blocks.append({"index": i + 1, "classes": list(CLASS_PATTERN[i]), "dim": E.shape[1],
                       "basis": E if E.shape[1] else [], "T1": A if E.shape[1] else [],
                       "T2": B if E.shape[1] else []})
    emit("decompose", {"blocks": blocks, "nonempty": [i + 1 for i in dec.nonempty()]}, args.out)
    return EXIT_OK


def cmd_lift(args):
    data = load_json(args.triple)
    if not isinstance(data, dict):
        raise InvalidInput("triple file must be a JSON object", "$")
    tol = _tolerances(data, "$")
    mats = {}
    for key in ("T", "Tp", "A"):
        if key not in data:
            raise InvalidInput(f"missing field {key!r}", "$")
        mats[key] = decode_matrix(data[key], f"$.{key}")
    mode = "canonical" if args.seed is None else "sampled"
    res = commutant_lift(mats["T"], mats["Tp"], mats["A"], mode, args.seed, tol)
    coeffs = ([] if res.psi.col is None else
              [res.scale * c for c in taylor_coefficients(res.psi.col, args.terms)])
    ok = all(c["pass"] for c in res.certificates.values())
    emit("lift", {"scale": res.scale, "taylor_coefficients": coeffs, "certificates": res.certificates,
                  "passed": ok}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_fock_verify(args):
    data = load_json(args.rowpair)
    if not isinstance(data, dict):
        raise InvalidInput("row-pair file must be a JSON object", "$")
    tol = _tolerances(data, "$")
    T1 = _matrix_list(data, "T1", "$")
    T1p = _matrix_list(data, "T1p", "$") if "T1p" in data else T1
    T2 = _matrix_list(data, "T2", "$")
    iso = intertwining_isometry(T1, T2, T1p, tol)
    mode = "canonical" if args.seed is None else "sampled"
    col = unitary_extension(iso, mode, args.seed, "minimal", tol)
    table = verify_intertwining_dilation(T1, T1p, T2, col, TruncatedFock(len(T1), args.max_len), tol, iso)
    ok = all(v["pass"] for v in table.values())
    emit("fock-verify", {"max_len": args.max_len, "pad_in": col.pad_in, "pad_out": col.pad_out,
                         "residuals": table, "passed": ok}, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="ando-lab", description="Model-based dilations and norm bounds "
                                "for commuting contractive matrices.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def bound_flags(sp):
        sp.add_argument("--grid", type=int, default=2048, help="torus grid points per axis")
        sp.add_argument("--extensions", type=int, default=16, help="number of sampled unitary extensions")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="write the JSON report here instead of stdout")

    sp = sub.add_parser("bound", help="compute all applicable bounds for p(T1, T2)")
    sp.add_argument("pair")
    sp.add_argument("poly")
    bound_flags(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("verify", help="check the inequality chain; exit 1 on any failed verdict")
    sp.add_argument("pair", nargs="?")
    sp.add_argument("poly", nargs="?")
    sp.add_argument("--replay", help="recompute verdicts from a saved report instead")
    bound_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("dilate", help="build the model dilation of a pair with T1 c.n.u.")
    sp.add_argument("pair")
    sp.add_argument("--seed", type=int, default=None, help="sample a Haar-mixed extension (default: canonical)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_dilate)

    sp = sub.add_parser("decompose", help="unitary / c.n.u. block decomposition of a pair")
    sp.add_argument("pair")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("lift", help="commutant lifting of A with A Tp = T A")
    sp.add_argument("triple")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--terms", type=int, default=16, help="Taylor coefficients to report")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_lift)

    sp = sub.add_parser("fock-verify", help="truncated Fock-space check of the dilation relations")
    sp.add_argument("rowpair")
    sp.add_argument("--max-len", type=int, default=8)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fock_verify)
    return p


def _threads_hint():
    raw = os.environ.get("ANDO_LAB_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise InvalidInput(f"ANDO_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads_hint()
        for name in ("grid", "extensions", "max_len", "terms"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 0:
                raise InvalidInput(f"--{name.replace('_', '-')} must be non-negative")
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
