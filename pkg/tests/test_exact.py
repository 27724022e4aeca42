"""Property tests for the exact rational linear algebra kernel."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.exact import (
    SingularMatrixError,
    det,
    frac,
    identity,
    inverse,
    mat,
    mat_mul,
    mat_vec,
    nullspace,
    rank,
    rref,
    solve,
    transpose,
)

rationals = st.fractions(
    min_value=Fraction(-50), max_value=Fraction(50), max_denominator=12
)


def square(n):
    return st.lists(st.lists(rationals, min_size=n, max_size=n), min_size=n, max_size=n)


def test_frac_coercions():
    assert frac(3) == Fraction(3)
    assert frac("2/7") == Fraction(2, 7)
    assert frac("-0.25") == Fraction(-1, 4)
    assert frac(0.5) == Fraction(1, 2)
    assert frac(0.1) == Fraction(1, 10)  # decimal reading, not binary
    with pytest.raises(TypeError):
        frac(True)
    with pytest.raises(TypeError):
        frac(None)


def test_rref_known():
    r, pivots = rref(mat([[1, 2, 3], [2, 4, 6], [1, 1, 1]]))
    assert pivots == [0, 1]
    assert r[2] == [0, 0, 0]


@given(square(3))
@settings(max_examples=200)
def test_det_matches_rank(a):
    a = mat(a)
    d = det(a)
    assert (d != 0) == (rank(a) == 3)


@given(square(3), square(3))
@settings(max_examples=100)
def test_det_multiplicative(a, b):
    a, b = mat(a), mat(b)
    assert det(mat_mul(a, b)) == det(a) * det(b)


@given(square(3))
@settings(max_examples=200)
def test_inverse_roundtrip(a):
    a = mat(a)
    if det(a) == 0:
        with pytest.raises(SingularMatrixError):
            inverse(a)
    else:
        assert mat_mul(a, inverse(a)) == identity(3)
        assert mat_mul(inverse(a), a) == identity(3)


@given(st.lists(st.lists(rationals, min_size=4, max_size=4), min_size=2, max_size=5))
@settings(max_examples=200)
def test_rank_nullity(a):
    a = mat(a)
    ns = nullspace(a)
    assert rank(a) + len(ns) == 4
    for v in ns:
        assert mat_vec(a, v) == [Fraction(0)] * len(a)
    # basis vectors of the kernel are independent
    if ns:
        assert rank(ns) == len(ns)


@given(square(3), st.lists(rationals, min_size=3, max_size=3))
@settings(max_examples=200)
def test_solve(a, b):
    a = mat(a)
    x = solve(a, b)
    if det(a) != 0:
        assert x is not None
        assert mat_vec(a, x) == [frac(v) for v in b]
    elif x is not None:
        assert mat_vec(a, x) == [frac(v) for v in b]


def test_solve_inconsistent():
    assert solve([[1, 1], [1, 1]], [0, 1]) is None


@given(square(4))
@settings(max_examples=100)
def test_det_transpose(a):
    a = mat(a)
    assert det(a) == det(transpose(a))


def test_rref_idempotent():
    a = mat([[2, 4], [1, 3]])
    r1, p1 = rref(a)
    r2, p2 = rref(r1)
    assert r1 == r2 and p1 == p2
