import numpy as np
import pytest

from ando_lab.bounds import (BoundConfig, BoundEngine, BoundReport, bound_am3, bound_general,
                             bound_min_both_orders, bound_two_unitary_exact, bound_unitary_pure,
                             compute_verdicts, verify_chain)
from ando_lab.cmatrix import operator_norm
from ando_lab.errors import InvalidInput, NotCNU
from ando_lab.polynomial import BivariatePolyMatrix, eval_bivariate
from _gen import commuting_pair, commuting_unitaries, jordan, random_poly, strict_contraction

ZW = BivariatePolyMatrix.scalar([(1, 1, 1.0)])


def example2_poly(a, b, k, ell):
    return BivariatePolyMatrix.scalar([(1, 0, a), (k, ell, b)])


@pytest.mark.parametrize("k", [2, 3, 4])
@pytest.mark.parametrize("a,b,ell", [(1, 1, 1), (0.3, 0.7, 2)])
def test_am3_example_two(k, a, b, ell):
    J = jordan(k)
    eng = BoundEngine(J, J, BoundConfig(extensions=8))
    res = eng.am3(example2_poly(a, b, k, ell))
    assert all(abs(v - a) <= 1e-9 for v in res["values"])


def test_am3_constant():
    T1, T2 = jordan(3), 0.5 * jordan(3)
    assert bound_am3(T1, T2, BivariatePolyMatrix.constant(2 - 1j), samples=4) == pytest.approx(abs(2 - 1j))


@pytest.mark.parametrize("k", [2, 3])
def test_am3_example_three(k):
    J = jordan(k)
    for n in (k, k + 2, 2 * k):
        P = BivariatePolyMatrix.scalar([(j, 1, 1.0) for j in range(n + 1)])
        assert bound_am3(J, J, P, samples=8) <= k + 1e-9


def test_am3_needs_cnu_first_operator(rng):
    U, _ = commuting_unitaries(rng, 2)
    with pytest.raises((NotCNU, Exception)):
        bound_am3(U, 0.5 * np.eye(2), ZW)


def test_both_orders_symmetric_input(rng):
    T = strict_contraction(rng, 3, 0.8)
    P = BivariatePolyMatrix.scalar([(1, 0, 1.0), (0, 1, 1.0), (2, 1, 0.5), (1, 2, 0.5)])
    eng = BoundEngine(T, T, BoundConfig(extensions=4))
    res = eng.min_both_orders(P)
    assert res["order12"] == pytest.approx(res["order21"], abs=1e-9)


def test_both_orders_picks_smaller_side():
    J = jordan(3)
    P = BivariatePolyMatrix.scalar([(1, 0, 0.3), (0, 1, 0.9)])
    eng = BoundEngine(J, 0.5 * J, BoundConfig(extensions=4))
    res = eng.min_both_orders(P)
    assert res["value"] == min(res["order12"], res["order21"])


def test_both_orders_dominate_direct_norm(rng):
    for _ in range(100):
        T1, T2 = commuting_pair(rng, int(rng.integers(1, 5)))
        P = random_poly(rng, 1, deg=3, terms=4)
        direct = operator_norm(eval_bivariate(P, T1, T2))
        assert bound_min_both_orders(T1, T2, P, samples=2) >= direct - 1e-7


def test_unitary_pure_identity(rng):
    C = strict_contraction(rng, 3, 0.8)
    P = random_poly(rng, 1, deg=3)
    got = bound_unitary_pure(np.eye(3), C, P)["value"]
    eng = BoundEngine(C, C, BoundConfig(extensions=0))
    B = eng.order12.model.B
    assert got == pytest.approx(operator_norm(eval_bivariate(P, np.eye(B.shape[0]), B)), abs=1e-12)


def test_unitary_pure_diagonal():
    res = bound_unitary_pure(np.diag([1.0, -1.0]), np.diag([0.5, 1 / 3]), ZW)
    assert res["value"] == pytest.approx(0.5)


def test_unitary_pure_coarse_dominates(rng):
    for _ in range(10):
        U, _ = commuting_unitaries(rng, 4)
        C = 0.3 * U + 0.2 * np.eye(4)
        res = bound_unitary_pure(U, C, random_poly(rng, 1, deg=3))
        assert res["coarse"] >= res["value"] - 1e-12


def test_two_unitary_trivial(rng):
    P = random_poly(rng)
    assert bound_two_unitary_exact(np.eye(2), np.eye(2), P) == pytest.approx(abs(P.at(1, 1)[0, 0]))


def test_two_unitary_diagonal():
    P = BivariatePolyMatrix.scalar([(1, 0, 1.0), (0, 1, 1.0)])
    T1, T2 = np.diag([1.0, -1.0]), np.eye(2)
    assert bound_two_unitary_exact(T1, T2, P) == pytest.approx(2.0)
    assert operator_norm(T1 + T2) == pytest.approx(2.0)


def test_two_unitary_equals_direct(rng):
    for _ in range(20):
        U1, U2 = commuting_unitaries(rng, int(rng.integers(1, 6)))
        P = random_poly(rng)
        direct = operator_norm(eval_bivariate(P, U1, U2))
        assert abs(bound_two_unitary_exact(U1, U2, P) - direct) <= 1e-10


def test_two_unitary_needs_scalar_poly():
    with pytest.raises(InvalidInput):
        bound_two_unitary_exact(np.eye(2), np.eye(2), BivariatePolyMatrix.constant(np.eye(2)))


def test_general_reductions(rng):
    U1, U2 = commuting_unitaries(rng, 3)
    P = random_poly(rng)
    g = bound_general(U1, U2, P, samples=2)
    assert list(g["blocks"]) == ["block1_two_unitary"]
    assert g["value"] == pytest.approx(bound_two_unitary_exact(U1, U2, P))
    T1, T2 = commuting_pair(rng, 3)
    g = bound_general(T1, T2, P, samples=2)
    assert list(g["blocks"]) == ["block4_min_both_orders"]
    assert g["value"] == pytest.approx(bound_min_both_orders(T1, T2, P, samples=2))


def test_general_mixed_blocks():
    T1, T2 = np.diag([1.0, 0.5]), np.diag([1 / 3, 0.5j])
    g = bound_general(T1, T2, ZW, samples=4)
    assert g["blocks"]["block2_unitary_pure"] == pytest.approx(1 / 3)
    assert set(g["blocks"]) == {"block2_unitary_pure", "block4_min_both_orders"}
    assert g["value"] >= operator_norm(T1 @ T2) - 1e-7


def test_chain_example_two():
    J = jordan(3)
    a, b = 0.3, 0.7
    rep = verify_chain(J, J, example2_poly(a, b, 3, 2), BoundConfig(grid=512, extensions=4))
    assert rep.passed()
    assert rep.am3_order12 == pytest.approx(a, abs=1e-9)
    assert rep.direct_norm <= a + 1e-9
    assert rep.torus_bracket[0] <= a + b + 1e-12 <= rep.torus_bracket[1] + 1e-9


def test_chain_zero_pair():
    rep = verify_chain(np.zeros((1, 1)), np.zeros((1, 1)), ZW, BoundConfig(grid=64, extensions=2))
    assert rep.passed()
    for v in (rep.direct_norm, rep.am3_order12, rep.am3_order21, rep.general_composite):
        assert v == pytest.approx(0, abs=1e-14)
    assert rep.torus_bracket[0] == pytest.approx(1.0)


def test_chain_random_pairs(rng):
    failures = 0
    for _ in range(20):
        T1, T2 = commuting_pair(rng, int(rng.integers(1, 6)))
        eng = BoundEngine(T1, T2, BoundConfig(grid=256, extensions=4))
        for _ in range(5):
            rep = eng.report(random_poly(rng, int(rng.integers(1, 3)), deg=5))
            failures += len(rep.failures)
    assert failures == 0


def test_extensions_only_lower_the_bound(rng):
    T1, T2 = commuting_pair(rng, 4)
    P = random_poly(rng)
    few = BoundEngine(T1, T2, BoundConfig(extensions=2)).am3(P)["value"]
    many = BoundEngine(T1, T2, BoundConfig(extensions=10)).am3(P)["value"]
    assert many <= few + 1e-15


def test_scale_covariance(rng):
    T1, T2 = commuting_pair(rng, 3)
    P = random_poly(rng)
    eng = BoundEngine(T1, T2, BoundConfig(extensions=3))
    assert eng.am3(P.scale(2.5))["value"] == pytest.approx(2.5 * eng.am3(P)["value"], rel=1e-12)


def test_report_round_trip_and_replay(rng):
    T1, T2 = commuting_pair(rng, 3)
    rep = verify_chain(T1, T2, random_poly(rng), BoundConfig(grid=128, extensions=2))
    back = BoundReport.from_dict(rep.to_dict())
    assert compute_verdicts(back) == rep.verdicts
    back.am3_order12 = rep.direct_norm - 1.0
    assert any(v["status"] == "fail" for v in compute_verdicts(back))
