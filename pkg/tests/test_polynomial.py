from functools import reduce

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ando_lab.cmatrix import operator_norm
from ando_lab.errors import InvalidInput, NotCommuting
from ando_lab.polynomial import (BivariatePolyMatrix, FreePoly, HereditaryPoly, eval_bivariate,
                                 eval_free, eval_hereditary, eval_monomial_sum, fejer_deviation_bound,
                                 fejer_smooth, torus_grid_norms, torus_sup_norm)
from _gen import commuting_pair, poly_in, random_poly, strict_contraction

Z = BivariatePolyMatrix.scalar([(1, 0, 1)])
ZW = BivariatePolyMatrix.scalar([(1, 1, 1)])


def _prod(mats, dim):
    return reduce(np.matmul, mats, np.eye(dim, dtype=complex))


def test_eval_z_returns_T1(rng):
    T1, T2 = commuting_pair(rng, 3)
    assert np.allclose(eval_bivariate(Z, T1, T2), T1)


def test_eval_zw_on_scalars():
    assert eval_bivariate(ZW, [[0.5]], [[0.4]])[0, 0] == pytest.approx(0.2)


@given(st.integers(1, 2), st.integers(0, 10_000))
def test_eval_matches_monomial_sum(k, seed):
    r = np.random.default_rng(seed)
    T1, T2 = commuting_pair(r, 4)
    P = random_poly(r, k)
    assert operator_norm(eval_bivariate(P, T1, T2) - eval_monomial_sum(P, T1, T2)) < 1e-10


def test_eval_is_homomorphism(rng):
    T1, T2 = commuting_pair(rng, 4)
    P, Q = random_poly(rng, 2, deg=3), random_poly(rng, 2, deg=3)
    lhs = eval_bivariate(P @ Q, T1, T2)
    rhs = eval_bivariate(P, T1, T2) @ eval_bivariate(Q, T1, T2)
    assert operator_norm(lhs - rhs) < 1e-10 * (1 + operator_norm(rhs))
    assert operator_norm(eval_bivariate(P + Q, T1, T2) - eval_bivariate(P, T1, T2)
                         - eval_bivariate(Q, T1, T2)) < 1e-10


def test_eval_rejects_non_commuting():
    with pytest.raises(NotCommuting):
        eval_bivariate(ZW, np.diag([0.5, 0.1]), np.array([[0, 0.5], [0, 0]]))


def test_swap_exchanges_variables(rng):
    T1, T2 = commuting_pair(rng, 3)
    P = random_poly(rng)
    assert np.allclose(eval_bivariate(P.swap(), T2, T1), eval_bivariate(P, T1, T2), atol=1e-12)


def _commuting_tuples(rng, n1, n2, dim=4):
    T = strict_contraction(rng, dim, 0.8)
    T1 = [poly_in(rng, T, norm=0.5 / np.sqrt(n1)) for _ in range(n1)]
    T2 = [poly_in(rng, T, norm=0.5 / np.sqrt(n2)) for _ in range(n2)]
    return T1, T2


def test_free_simple_product(rng):
    T1, T2 = _commuting_tuples(rng, 2, 2)
    p = FreePoly([((1,), (2,), 1.0)])
    assert np.allclose(eval_free(p, T1, T2), T1[0] @ T2[1])


def test_free_reduces_to_bivariate(rng):
    T1, T2 = commuting_pair(rng, 3)
    P = random_poly(rng)
    p = FreePoly.from_bivariate(P)
    assert operator_norm(eval_free(p, [T1], [T2]) - eval_bivariate(P, T1, T2)) < 1e-12


def _random_word(rng, n, maxlen=3):
    return tuple(int(a) for a in rng.integers(1, n + 1, size=rng.integers(0, maxlen + 1)))


@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_free_matches_term_oracle(n1, n2, seed):
    r = np.random.default_rng(seed)
    T1, T2 = _commuting_tuples(r, n1, n2)
    terms = [(_random_word(r, n1), _random_word(r, n2), complex(*r.normal(size=2))) for _ in range(5)]
    oracle = sum(c * _prod([T1[a - 1] for a in x] + [T2[b - 1] for b in y], 4) for x, y, c in terms)
    assert operator_norm(eval_free(FreePoly(terms), T1, T2) - oracle) < 1e-10


def test_hereditary_scalar():
    t = 0.3 + 0.4j
    q = HereditaryPoly([((1,), (), (), (1,), 1.0)])
    assert eval_hereditary(q, [[[t]]], [[[0.2]]])[0, 0] == pytest.approx(t * np.conj(t))


def test_hereditary_without_adjoints_is_free(rng):
    T1, T2 = _commuting_tuples(rng, 2, 1)
    terms = [((1, 2), (1,), 0.5), ((2,), (), -1j)]
    q = HereditaryPoly([(a, b, (), (), c) for a, b, c in terms])
    assert np.allclose(eval_hereditary(q, T1, T2), eval_free(FreePoly(terms), T1, T2))


@given(st.integers(0, 10_000))
def test_hereditary_matches_term_oracle(seed):
    r = np.random.default_rng(seed)
    T1, T2 = _commuting_tuples(r, 2, 2)
    terms = [(_random_word(r, 2), _random_word(r, 2), _random_word(r, 2), _random_word(r, 2),
              complex(*r.normal(size=2))) for _ in range(4)]
    oracle = 0
    for a, b, s, g, c in terms:
        left = _prod([T1[i - 1] for i in a] + [T2[i - 1] for i in b], 4)
        right = _prod([T2[i - 1] for i in s] + [T1[i - 1] for i in g], 4)
        oracle = oracle + c * left @ right.conj().T
    assert operator_norm(eval_hereditary(HereditaryPoly(terms), T1, T2) - oracle) < 1e-10


def test_letter_out_of_range():
    with pytest.raises(InvalidInput):
        eval_free(FreePoly([((3,), (), 1.0)]), [[[0.1]]], [[[0.1]]])


@pytest.mark.parametrize("n", [1, 3, 6])
def test_torus_geometric_sum(n):
    P = BivariatePolyMatrix.scalar([(j, 0, 1.0) for j in range(n + 1)])
    lo, hi = torus_sup_norm(P, 1024)
    assert lo == pytest.approx(n + 1, abs=1e-12)
    assert lo <= n + 1 + 1e-12 <= hi + 1e-12


def test_torus_constant_is_exact():
    lo, hi = torus_sup_norm(BivariatePolyMatrix.constant(-2 + 1j), 64)
    assert lo == hi == pytest.approx(np.sqrt(5))


def test_torus_grid_too_coarse():
    with pytest.raises(InvalidInput):
        torus_sup_norm(BivariatePolyMatrix.scalar([(5, 5, 1.0)]), 16)


def test_torus_grid_norms_match_direct_evaluation(rng):
    P = random_poly(rng, 2, deg=3)
    grid = 32
    for idx, norms in torus_grid_norms(P, grid, chunk=7):
        for a_pos, a in enumerate(idx[:3]):
            for b in (0, 5, 31):
                z, w = np.exp(2j * np.pi * a / grid), np.exp(2j * np.pi * b / grid)
                assert norms[a_pos, b] == pytest.approx(operator_norm(P.at(z, w)), abs=1e-12)


@pytest.mark.parametrize("k,count,fine", [(1, 100, 4096), (2, 10, 2048)])
def test_torus_bracket_refinement(rng, k, count, fine):
    for _ in range(count):
        P = random_poly(rng, k, deg=5)
        lo1, hi1 = torus_sup_norm(P, 256)
        lo2, hi2 = torus_sup_norm(P, fine)
        assert lo2 >= lo1 - 1e-12
        assert hi2 <= hi1 + 1e-12
        assert lo2 <= hi2


def test_torus_bracket_contains_dense_maximum(rng):
    P = random_poly(rng, 1, deg=4)
    lo, hi = torus_sup_norm(P, 64)
    t = np.linspace(0, 2 * np.pi, 700, endpoint=False)
    z, w = np.meshgrid(np.exp(1j * t), np.exp(1j * t))
    dense = max(abs(P.at(a, b)[0, 0]) for a, b in zip(z.ravel()[::7], w.ravel()[::7]))
    assert dense <= hi + 1e-12


def test_fejer_constant_untouched():
    P = BivariatePolyMatrix.scalar([(0, 0, 3.0), (1, 2, 1.0)])
    assert fejer_smooth(P, 7).coeffs[0, 0, 0, 0] == 3.0


def test_fejer_linear_coefficient():
    assert fejer_smooth(Z, 9).coeffs[0, 0, 1, 0] == pytest.approx(0.9)


def test_fejer_needs_m_at_least_degree():
    with pytest.raises(InvalidInput):
        fejer_smooth(BivariatePolyMatrix.scalar([(3, 0, 1.0)]), 2)


@given(st.integers(0, 10_000), st.sampled_from([1, 2, 10]))
def test_fejer_deviation_bound(seed, mult):
    r = np.random.default_rng(seed)
    P = random_poly(r, deg=4)
    m = mult * max(P.total_degree, 1)
    lo, _ = torus_sup_norm(fejer_smooth(P, m) - P, 256)
    assert lo <= fejer_deviation_bound(P, m) + 1e-9
