"""Tests for the plane-restriction case split and cylinder frames.

Frozen values come from an independent symbolic oracle (generic-coefficient
expansions) run before the module was written.
"""

import random
from fractions import Fraction as F

import pytest

from qlab.cylgeom import (
    CASE1_A,
    CASE2_B,
    CASE3_C,
    CaseHypothesisFailed,
    CylinderFrame,
    EtaViolated,
    SubcaseHypothesisFailed,
    case_split,
    cylinder_frame_case1,
    cylinder_frame_case3,
    form1_identity_check,
    swap_rs,
)
from qlab.qform import QuadraticPair


def P(c1, c2):
    return QuadraticPair.from_quadratic_coeffs(c1, c2)


NORMAL_11 = P(["1/2", "1/2", 0, 0, 0, 0], [0, "1/2", "1/2", 0, 0, 0])


def rnd_frac(rng, span=9, den=4):
    return F(rng.randint(-span, span), rng.randint(1, den))


# ---------------------------------------------------------------------------
# form1 identity
# ---------------------------------------------------------------------------


def test_form1_all_zero():
    rep = form1_identity_check((0, 0, 0, 0, 0, 0), 0, 0)
    assert rep.equal and rep.lhs == 0 and rep.rhs == 0


def test_form1_frozen_example():
    # oracle: both sides equal 45
    rep = form1_identity_check((1, 2, 3, 4, 5, 6), 1, 1)
    assert rep.equal
    assert rep.lhs == 45 and rep.rhs == 45


def test_form1_random_exact():
    rng = random.Random(20260814)
    for _ in range(10**4):
        coeffs = tuple(rnd_frac(rng) for _ in range(6))
        beta, gamma = rnd_frac(rng), rnd_frac(rng)
        rep = form1_identity_check(coeffs, beta, gamma)
        assert rep.equal
        assert rep.lhs == rep.rhs


def test_form1_generic_symbolic():
    sp = pytest.importorskip("sympy")
    A, B, C, D, E, F_, be, ga = sp.symbols("A B C D E F beta gamma")
    m = sp.Matrix(
        [
            [2 * A + E * be, D + F_ * be, E + 2 * C * be],
            [D + E * ga, 2 * B + F_ * ga, F_ + 2 * C * ga],
        ]
    )
    det1 = sp.det(m[:, [0, 1]])
    det2 = sp.det(m[:, [1, 2]])
    det3 = sp.det(sp.Matrix([[m[1, 0], m[1, 2]], [m[0, 0], m[0, 2]]]))
    a = A + C * be**2 + E * be
    b = B + C * ga**2 + F_ * ga
    c = D + 2 * C * be * ga + E * ga + F_ * be
    # the signed quantities are exact negatives, so absolute values agree
    assert sp.expand((det1 - be * det2 - ga * det3) + (c**2 - 4 * a * b)) == 0


# ---------------------------------------------------------------------------
# case split
# ---------------------------------------------------------------------------


def test_case_split_normal_form_case1():
    cs = case_split(NORMAL_11, (0, 0, 0), F(1, 2))
    assert cs.case == CASE1_A
    assert (cs.a, cs.b, cs.c) == (F(1, 2), F(1, 2), 0)
    assert cs.selected_form == 1


def test_case_split_eta_violated():
    # restricted max coefficient is 1/2 for both forms, below eta = 1
    with pytest.raises(EtaViolated):
        case_split(NORMAL_11, (0, 0, 0), 1)


def test_case_split_case2():
    pair = P([0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0])
    cs = case_split(pair, (0, 0, 0), 1)
    assert cs.case == CASE2_B
    assert (cs.a, cs.b, cs.c) == (0, 1, 0)


def test_case_split_case3_frozen():
    pair = P(["1/8", "1/8", 0, 2, 0, 0], [0, 0, 1, 0, 0, 0])
    cs = case_split(pair, (0, 0, 0), 1)
    assert cs.case == CASE3_C
    assert abs(cs.c * cs.c - 4 * cs.a * cs.b) == F(63, 16)
    assert F(63, 16) >= F(3, 4)


def test_case_split_selects_second_form():
    # first form restricts to zero on the plane t = 0
    pair = P([0, 0, 1, 0, 0, 0], [1, 0, 0, 0, 0, 0])
    cs = case_split(pair, (0, 0, 0), 1)
    assert cs.selected_form == 2
    assert cs.case == CASE1_A


def test_case_split_case3_bound_property():
    # random instances engineered to land in case 3
    rng = random.Random(7)
    eta = F(1)
    for _ in range(100):
        a = F(rng.randint(-1, 1), 4)          # |a| <= 1/4 = eta/4
        b = F(rng.randint(-1, 1), 4)
        c = F(rng.choice([-1, 1])) * (1 + F(rng.randint(0, 8), 4))
        pair = P([a, b, 0, c, 0, 0], [0, 0, 1, 0, 0, 0])
        cs = case_split(pair, (0, 0, 0), eta)
        assert cs.case == CASE3_C
        assert abs(cs.c) >= eta
        assert abs(cs.c**2 - 4 * cs.a * cs.b) >= 3 * eta**2 / 4


def test_case_split_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        case_split(NORMAL_11, (0, 0, 0), 0)


def test_swap_rs_maps_case2_to_case1():
    coeffs = (0, 1, 0, 0, 0, 0)
    swapped, plane = swap_rs(coeffs, (0, 0, 0))
    pair = P(list(swapped), [0, 0, 1, 0, 0, 0])
    cs = case_split(pair, plane, 1)
    assert cs.case == CASE1_A


def test_swap_rs_involution():
    coeffs = tuple(map(F, (1, 2, 3, 4, 5, 6)))
    plane = tuple(map(F, (7, 8, 9)))
    back_coeffs, back_plane = swap_rs(*swap_rs(coeffs, plane))
    assert back_coeffs == coeffs and back_plane == plane


# ---------------------------------------------------------------------------
# case-1 frames
# ---------------------------------------------------------------------------


def test_case1_frozen_example():
    # oracle: Q = r^2, plane (0,0,0), s0 = 0
    fr = cylinder_frame_case1((1, 0, 0, 0, 0, 0), 0, 0, 0, 0)
    assert fr.subcase == 1
    assert fr.u[0] == (0, 2, 0, 0)
    assert fr.u[1] == (0, 0, 2, 0)
    assert abs(fr.det) == 4
    assert fr.audit["identity_product"] == 4
    assert fr.w[0] == (1, 0, 0, 0) and fr.w[1] == (0, 0, 0, 1)


def test_case1_subcase_preference():
    # beta = 0, E = 0, A = 1: subcase-2 quantity vanishes, subcase 1 applies
    fr = cylinder_frame_case1((1, 0, 5, 0, 0, 0), 0, 0, 0, 0)
    assert fr.subcase == 1
    assert fr.audit["q2"] == 0


def test_case1_subcase2():
    # A = 0, E = 0, C = 1, beta = 1: q1 = 0 but q2 = 2
    fr = cylinder_frame_case1((0, 0, 1, 0, 0, 0), 0, 1, 0, 0, eta=1)
    assert fr.subcase == 2
    assert fr.det != 0


def test_case1_no_subcase_raises():
    with pytest.raises(SubcaseHypothesisFailed):
        cylinder_frame_case1((0, 1, 0, 0, 0, 0), 0, 0, 0, 0)


def test_case1_eta_quantified_gate():
    # q1 = 1/2 passes the nonzero test but fails |q1| > eta/4 for eta = 10
    coeffs = (F(1, 4), 0, 0, 0, 0, 0)
    fr = cylinder_frame_case1(coeffs, 0, 0, 0, 0)
    assert fr.subcase == 1
    with pytest.raises(SubcaseHypothesisFailed):
        cylinder_frame_case1(coeffs, 0, 0, 0, 0, eta=10)


def test_case1_identity_random():
    # the module asserts |det| = |2A+E beta| |2A+2C beta^2+2E beta| in
    # subcase 1 and exact tangency at the sample points; exercise it over
    # random exact data
    rng = random.Random(3)
    built = 0
    while built < 200:
        coeffs = tuple(rnd_frac(rng, span=6, den=3) for _ in range(6))
        alpha, beta, gamma, s0 = (rnd_frac(rng, span=3, den=3) for _ in range(4))
        A, _, C, _, E, _ = coeffs
        if 2 * A + E * beta == 0:
            continue
        fr = cylinder_frame_case1(coeffs, alpha, beta, gamma, s0)
        assert fr.subcase == 1
        product = abs(2 * A + E * beta) * abs(
            2 * A + 2 * C * beta * beta + 2 * E * beta
        )
        assert abs(fr.det) == product
        assert len(fr.tangency_points) == 5
        built += 1


def test_case1_subcase2_random_nonzero_det():
    # engineer q1 = 2A + E*beta = 0 so subcase 2 is exercised
    rng = random.Random(9)
    built = 0
    while built < 100:
        B, C, D, E, F_ = (rnd_frac(rng, span=6, den=3) for _ in range(5))
        alpha, gamma, s0 = (rnd_frac(rng, span=3, den=3) for _ in range(3))
        beta = rnd_frac(rng, span=3, den=3)
        A = -E * beta / 2
        coeffs = (A, B, C, D, E, F_)
        q2 = 2 * C * beta * beta + E * beta
        if q2 == 0:
            continue
        a = A + C * beta * beta + E * beta
        if a == 0:  # the oracle's factored determinant 2*q2*a would vanish
            with pytest.raises(AssertionError):
                cylinder_frame_case1(coeffs, alpha, beta, gamma, s0)
            continue
        fr = cylinder_frame_case1(coeffs, alpha, beta, gamma, s0)
        assert fr.subcase == 2 and fr.det != 0
        built += 1


# ---------------------------------------------------------------------------
# case-3 frames
# ---------------------------------------------------------------------------


def test_case3_frozen_example():
    # oracle: Q = rs, plane (0,0,0)
    fr = cylinder_frame_case3((0, 0, 0, 1, 0, 0), 0, 0, 0)
    assert fr.u[0] == (0, 0, -1, 0)
    assert abs(fr.det) == 1
    assert fr.audit["det1"] == -1
    assert fr.audit["det2"] == 0 and fr.audit["det3"] == 0


def test_case3_zero_quadratic_raises():
    with pytest.raises(CaseHypothesisFailed):
        cylinder_frame_case3((0, 0, 0, 0, 0, 0), 0, 0, 0)


def test_case3_degenerate_discriminant_raises():
    # c^2 = 4ab with a = b = 1, c = 2 on the plane (0,0,0)
    with pytest.raises(CaseHypothesisFailed):
        cylinder_frame_case3((1, 1, 0, 2, 0, 0), 0, 0, 0)


def test_case3_random_structure():
    rng = random.Random(31)
    built = 0
    while built < 200:
        coeffs = tuple(rnd_frac(rng, span=6, den=3) for _ in range(6))
        alpha, beta, gamma = (rnd_frac(rng, span=3, den=3) for _ in range(3))
        rep = form1_identity_check(coeffs, beta, gamma)
        if rep.rhs == 0:
            continue
        fr = cylinder_frame_case3(coeffs, alpha, beta, gamma)
        # leading coordinates are the printed determinant triple
        assert fr.u[0][:3] == (rep.det2, rep.det3, rep.det1)
        assert abs(fr.det) == rep.lhs == rep.rhs
        assert len(fr.tangency_points) == 5
        built += 1


def test_case3_star_generic_symbolic():
    sp = pytest.importorskip("sympy")
    A, B, C, D, E, F_, al, be, ga, r, s = sp.symbols(
        "A B C D E F alpha beta gamma r s"
    )
    t = al + be * r + ga * s
    g = [
        2 * A * r + D * s + E * t,
        D * r + 2 * B * s + F_ * t,
        E * r + F_ * s + 2 * C * t,
    ]
    m = sp.Matrix(
        [
            [2 * A + E * be, D + F_ * be, E + 2 * C * be],
            [D + E * ga, 2 * B + F_ * ga, F_ + 2 * C * ga],
        ]
    )
    det1 = sp.det(m[:, [0, 1]])
    det2 = sp.det(m[:, [1, 2]])
    det3 = sp.det(sp.Matrix([[m[1, 0], m[1, 2]], [m[0, 0], m[0, 2]]]))
    star = sp.expand(det2 * g[0] + det3 * g[1] + det1 * g[2])
    assert sp.expand(sp.diff(star, r)) == 0
    assert sp.expand(sp.diff(star, s)) == 0


def test_cylinder_frame_to_dict_roundtrippable():
    import json

    fr = cylinder_frame_case3((0, 0, 0, 1, 0, 0), 0, 0, 0)
    doc = json.loads(json.dumps(fr.to_dict()))
    assert doc["case"] == "CASE3_C"
    assert doc["u"] == [["0", "0", "-1", "0"]]
    assert doc["det"] in ("1", "-1")
