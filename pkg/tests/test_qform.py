"""Tests for exact quadratic-form algebra and pair file I/O."""

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.exact import identity, mat_vec
from qlab.qform import (
    HomQuad3,
    QuadraticPair,
    SingularTransform,
    SymMatrix3,
    change_of_variables,
    evaluate,
    gradient,
    lin_product,
    loads_pair,
    load_pair,
    pair_hash,
    pair_to_json,
    restrict_to_plane,
    save_pair,
)

rationals = st.fractions(
    min_value=Fraction(-20), max_value=Fraction(20), max_denominator=8
)
coeff6 = st.lists(rationals, min_size=6, max_size=6)
point3 = st.lists(rationals, min_size=3, max_size=3)


def pair_rs_st():
    # (r^2 + s^2, st)
    return QuadraticPair.from_quadratic_coeffs([1, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1])


def pair_sphere_mixed():
    # (r^2 + s^2 + t^2, rs + rt + st)
    return QuadraticPair.from_quadratic_coeffs([1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1])


def test_evaluate_examples():
    assert evaluate(pair_rs_st(), (1, 1, 1)) == (2, 1)
    assert evaluate(pair_rs_st(), (0, 0, 0)) == (0, 0)
    assert evaluate(pair_sphere_mixed(), (1, 2, 3)) == (14, 11)


def test_gradient_examples():
    g1, g2 = gradient(pair_sphere_mixed(), (1, 2, 3))
    assert g1 == (2, 4, 6)
    assert gradient(pair_rs_st(), (0, 0, 0))[1] == (0, 0, 0)
    assert gradient(pair_sphere_mixed(), (1, 0, 0))[1] == (0, 1, 1)


@given(coeff6, coeff6, point3, point3)
@settings(max_examples=100)
def test_gradient_linear_and_euler(c1, c2, u, v):
    try:
        pair = QuadraticPair.from_quadratic_coeffs(c1, c2)
    except ValueError:
        return
    for A in pair.matrices():
        gu, gv = A.gradient_at(u), A.gradient_at(v)
        guv = A.gradient_at([a + b for a, b in zip(u, v)])
        assert guv == tuple(a + b for a, b in zip(gu, gv))
        # Euler identity: v . grad Q(v) = 2 Q(v)
        assert sum(x * g for x, g in zip(u, gu)) == 2 * A.evaluate(u)


def test_change_of_variables_examples():
    p = pair_sphere_mixed()
    assert change_of_variables(p, identity(3), identity(2)) == p
    swapped = change_of_variables(p, identity(3), [[0, 1], [1, 0]])
    assert swapped.A1 == p.A2 and swapped.A2 == p.A1
    # substitution (r,s,t) -> (s,t,r) on (r^2-s^2, s^2-t^2)
    M = [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    p2 = QuadraticPair.from_rows(
        [[1, 0, 0], [0, -1, 0], [0, 0, 0]], [[0, 0, 0], [0, 1, 0], [0, 0, -1]]
    )
    out = change_of_variables(p2, M)
    assert out.A1.rows() == [[0, 0, 0], [0, 1, 0], [0, 0, -1]]
    assert out.A2.rows() == [[-1, 0, 0], [0, 0, 0], [0, 0, 1]]


def test_change_of_variables_singular_rejected():
    p = pair_rs_st()
    with pytest.raises(SingularTransform):
        change_of_variables(p, [[1, 0, 0], [0, 1, 0], [1, 1, 0]])
    with pytest.raises(SingularTransform):
        change_of_variables(p, identity(3), [[1, 1], [1, 1]])


@given(coeff6, coeff6)
@settings(max_examples=100)
def test_change_of_variables_roundtrip(c1, c2):
    from qlab.exact import inverse, det, mat

    try:
        pair = QuadraticPair.from_quadratic_coeffs(c1, c2)
    except ValueError:
        return
    M = mat([[1, 2, 0], [0, 1, 5], [3, 0, 1]])
    beta = mat([[2, 1], [1, 1]])
    assert det(M) != 0 and det(beta) != 0
    fwd = change_of_variables(pair, M, beta)
    back = change_of_variables(fwd, inverse(M), inverse(beta))
    assert back == pair


@given(coeff6, coeff6, point3)
@settings(max_examples=100)
def test_change_of_variables_pointwise(c1, c2, v):
    """Q'_i(v) = beta_i1 Q1(Mv) + beta_i2 Q2(Mv)."""
    try:
        pair = QuadraticPair.from_quadratic_coeffs(c1, c2)
    except ValueError:
        return
    M = [[1, 1, 0], [0, 1, 1], [1, 0, 2]]
    beta = [[1, 3], [0, 2]]
    out = change_of_variables(pair, M, beta)
    Mv = mat_vec([[Fraction(x) for x in row] for row in M], [Fraction(x) for x in v])
    q1, q2 = evaluate(pair, Mv)
    o1, o2 = evaluate(out, v)
    assert o1 == 1 * q1 + 3 * q2
    assert o2 == 2 * q2


def test_restrict_examples():
    Qt2 = SymMatrix3.from_quadratic_coeffs([0, 0, 1, 0, 0, 0])
    rp = restrict_to_plane(Qt2, 0, 1, 0)
    assert rp.quad_coeffs() == (1, 0, 0)
    assert (rp.d, rp.e, rp.f) == (0, 0, 0)
    Q = SymMatrix3.from_quadratic_coeffs([1, 2, 3, 4, 5, 6])
    assert restrict_to_plane(Q, 0, 1, 1).quad_coeffs() == (9, 11, 21)
    assert restrict_to_plane(Q, 7, 0, 0).quad_coeffs() == (1, 2, 4)


@given(coeff6, rationals, rationals, rationals)
@settings(max_examples=200)
def test_restrict_quadratic_part_alpha_free(c, alpha, beta, gamma):
    Q = SymMatrix3.from_quadratic_coeffs(c)
    with_alpha = restrict_to_plane(Q, alpha, beta, gamma)
    without = restrict_to_plane(Q, 0, beta, gamma)
    assert with_alpha.quad_coeffs() == without.quad_coeffs()


@given(coeff6, rationals, rationals, rationals, rationals, rationals)
@settings(max_examples=200)
def test_restrict_agrees_with_substitution(c, alpha, beta, gamma, r, s):
    Q = SymMatrix3.from_quadratic_coeffs(c)
    rp = restrict_to_plane(Q, alpha, beta, gamma)
    t = alpha + beta * r + gamma * s
    assert rp.evaluate(r, s) == Q.evaluate((r, s, t))


def test_symmetry_validated():
    with pytest.raises(ValueError):
        SymMatrix3.from_rows([[1, 2, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        loads_pair('{"A1": [[0,1,0],[0,0,0],[0,0,0]], "A2": [[1,0,0],[0,1,0],[0,0,1]]}')


def test_zero_pair_rejected():
    with pytest.raises(ValueError):
        QuadraticPair.from_quadratic_coeffs([0] * 6, [0] * 6)


def test_pair_json_roundtrip(tmp_path):
    p = QuadraticPair.from_quadratic_coeffs(
        [1, Fraction(-1, 2), 0, Fraction(1, 3), 0, 0], [0, 0, 1, 0, 0, 0]
    )
    path = tmp_path / "pair.json"
    save_pair(p, path)
    assert load_pair(path) == p
    # numeric entries parse exactly, including decimal literals
    q = loads_pair('{"A1": [[1,0,0],[0,0.5,0],[0,0,0]], "A2": [[0,0,0],[0,0,0],[0,0,1]]}')
    assert q.A1.a22 == Fraction(1, 2)


def test_pair_hash_stable_and_format_insensitive():
    p = pair_rs_st()
    h = pair_hash(p)
    assert len(h) == 12 and all(ch in "0123456789abcdef" for ch in h)
    q = loads_pair('{"A2": [[0,0,0],[0,0,"1/2"],[0,"0.5",0]], "A1": [[1,0,0],[0,1.0,0],[0,0,0]]}')
    assert pair_hash(q) == h
    assert json.loads(pair_to_json(p))["A1"][0][0] == "1"


def test_lin_product():
    # (r + 2s)(3t) = 3rt + 6st
    got = lin_product((1, 2, 0), (0, 0, 3))
    assert got == HomQuad3.from_coeffs([0, 0, 0, 0, 3, 6])
    # square of r+s+t
    sq = lin_product((1, 1, 1), (1, 1, 1))
    assert sq.coeffs == (1, 1, 1, 2, 2, 2)


@given(point3, point3, point3)
@settings(max_examples=100)
def test_lin_product_pointwise(u, v, p):
    q = lin_product(u, v)
    lu = sum(Fraction(a) * Fraction(b) for a, b in zip(u, p))
    lv = sum(Fraction(a) * Fraction(b) for a, b in zip(v, p))
    assert q.evaluate(p) == lu * lv
