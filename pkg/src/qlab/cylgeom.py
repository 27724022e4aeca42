"""Plane-restriction geometry: case trichotomy and cylinder frames.

Restricting a quadratic Q = A r^2 + B s^2 + C t^2 + D rs + E rt + F st to
the plane t = alpha + beta r + gamma s gives a bivariate quadratic with
quadratic part (a, b, c).  Depending on which of these coefficients is
large relative to a transversality margin eta, the graph of Q over the
plane sits inside a nondegenerate cylinder whose frame is assembled from
explicit vectors in R^4 = (r, s, t, Q)-space.  This module builds those
frames and verifies the algebraic identities behind them exactly:

  * |det1 - beta*det2 - gamma*det3| = |c^2 - 4ab|          (plane identity)
  * |det[w1, w2, u3, u4]| = |2A+E beta| * |2A+2C beta^2+2E beta|
                                                           (case 1, subcase 1)
  * |det[w1, w2, w3, u4]| = |det1 - beta*det2 - gamma*det3| (case 3)

together with the structural facts that the vertical vectors are constant
in the surface parameters (their assembled r- and s-coefficients cancel
exactly) and lie in the tangent space of the graph at every sampled point.

All arithmetic is exact rational; nothing here depends on floating point
except the documented nonzero gate for the case-1 subcase-2 determinant,
for which no closed form is asserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .exact import det, frac, rank, solve
from .qform import QuadraticPair, restrict_to_plane

__all__ = [
    "CASE1_A",
    "CASE2_B",
    "CASE3_C",
    "EtaViolated",
    "CaseHypothesisFailed",
    "SubcaseHypothesisFailed",
    "CaseSplit",
    "CylinderFrame",
    "Form1Report",
    "case_split",
    "form1_identity_check",
    "cylinder_frame_case1",
    "cylinder_frame_case3",
    "swap_rs",
]

CASE1_A = "CASE1_A"
CASE2_B = "CASE2_B"
CASE3_C = "CASE3_C"


class EtaViolated(ValueError):
    """Neither restricted form has a quadratic coefficient of size >= eta."""


class CaseHypothesisFailed(ValueError):
    """The case-3 hypothesis does not hold for the given data."""


class SubcaseHypothesisFailed(ValueError):
    """Neither case-1 subcase hypothesis holds for the given data."""


# ---------------------------------------------------------------------------
# Case trichotomy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseSplit:
    eta: Fraction
    case: str
    a: Fraction
    b: Fraction
    c: Fraction
    plane: tuple  # (alpha, beta, gamma)
    selected_form: int  # 1 or 2: which input form was relabeled Q1

    def to_dict(self) -> dict:
        return {
            "eta": str(self.eta),
            "case": self.case,
            "a": str(self.a),
            "b": str(self.b),
            "c": str(self.c),
            "plane": [str(x) for x in self.plane],
            "selected_form": self.selected_form,
        }


def case_split(pair: QuadraticPair, plane, eta) -> CaseSplit:
    """Select the form with a large restricted coefficient and classify it.

    The form whose restriction to t = alpha + beta r + gamma s has
    max(|a|,|b|,|c|) >= eta is relabeled Q1 (preferring the first).  The
    trichotomy on its coefficients:

      CASE1_A   if |a| > eta/4,
      CASE2_B   elif |b| > eta/4,
      CASE3_C   otherwise; then |c| >= eta and |c^2-4ab| >= 3 eta^2 / 4.
    """
    alpha, beta, gamma = (frac(x) for x in plane)
    eta = frac(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    candidates = []
    for idx, form in ((1, pair.A1), (2, pair.A2)):
        rest = restrict_to_plane(form, alpha, beta, gamma)
        candidates.append((idx, rest.a, rest.b, rest.c))
    selected = None
    for idx, a, b, c in candidates:
        if max(abs(a), abs(b), abs(c)) >= eta:
            selected = (idx, a, b, c)
            break
    if selected is None:
        raise EtaViolated(
            "both restricted forms have all quadratic coefficients below "
            f"eta = {eta}"
        )
    idx, a, b, c = selected
    if abs(a) > eta / 4:
        case = CASE1_A
    elif abs(b) > eta / 4:
        case = CASE2_B
    else:
        case = CASE3_C
        # |a|, |b| <= eta/4 while the max is >= eta, so |c| >= eta and
        # |c^2 - 4ab| >= eta^2 - 4 (eta/4)^2 = 3 eta^2 / 4.
        assert abs(c) >= eta
        assert abs(c * c - 4 * a * b) >= 3 * eta * eta / 4
    return CaseSplit(
        eta=eta, case=case, a=a, b=b, c=c,
        plane=(alpha, beta, gamma), selected_form=idx,
    )


def swap_rs(coeffs, plane):
    """Relabel r <-> s: maps case 2 data to case 1 data.

    For Q = A r^2 + B s^2 + C t^2 + D rs + E rt + F st the swap exchanges
    A <-> B and E <-> F; the plane (alpha, beta, gamma) becomes
    (alpha, gamma, beta).  The restricted coefficients satisfy
    a' = b, b' = a, c' = c, so |b| > eta/4 turns into |a'| > eta/4.
    """
    A, B, C, D, E, F = (frac(x) for x in coeffs)
    alpha, beta, gamma = (frac(x) for x in plane)
    return (B, A, C, D, F, E), (alpha, gamma, beta)


# ---------------------------------------------------------------------------
# The plane identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Form1Report:
    equal: bool
    lhs: Fraction
    rhs: Fraction
    det1: Fraction
    det2: Fraction
    det3: Fraction


def _parent_matrix(A, B, C, D, E, F, beta, gamma):
    return [
        [2 * A + E * beta, D + F * beta, E + 2 * C * beta],
        [D + E * gamma, 2 * B + F * gamma, F + 2 * C * gamma],
    ]


def _three_dets(m):
    det1 = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    det2 = m[0][1] * m[1][2] - m[0][2] * m[1][1]
    det3 = m[1][0] * m[0][2] - m[1][2] * m[0][0]
    return det1, det2, det3


def form1_identity_check(coeffs, beta, gamma) -> Form1Report:
    """Check |det1 - beta*det2 - gamma*det3| = |c^2 - 4ab| exactly.

    `coeffs` is the 6-tuple (A, B, C, D, E, F); a, b, c are the restricted
    quadratic coefficients on the plane with slopes (beta, gamma).  Both
    sides are returned for audit; they agree identically (the signed
    quantities are negatives of each other).
    """
    A, B, C, D, E, F = (frac(x) for x in coeffs)
    beta, gamma = frac(beta), frac(gamma)
    det1, det2, det3 = _three_dets(_parent_matrix(A, B, C, D, E, F, beta, gamma))
    lhs = abs(det1 - beta * det2 - gamma * det3)
    a = A + C * beta * beta + E * beta
    b = B + C * gamma * gamma + F * gamma
    c = D + 2 * C * beta * gamma + E * gamma + F * beta
    rhs = abs(c * c - 4 * a * b)
    return Form1Report(
        equal=(lhs == rhs), lhs=lhs, rhs=rhs, det1=det1, det2=det2, det3=det3
    )


# ---------------------------------------------------------------------------
# Cylinder frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderFrame:
    case: str
    subcase: Optional[int]
    w: tuple  # spanning vectors of the cylinder base
    u: tuple  # vertical vectors, constant in the surface parameters
    det: Fraction  # nondegeneracy determinant of the assembled frame
    audit: dict
    tangency_points: tuple  # sampled parameter values where membership held

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "subcase": self.subcase,
            "w": [[str(x) for x in v] for v in self.w],
            "u": [[str(x) for x in v] for v in self.u],
            "det": str(self.det),
            "audit": {k: str(v) for k, v in self.audit.items()},
            "tangency_points": [
                [str(x) for x in p] for p in self.tangency_points
            ],
        }


class _AffineRS:
    """A quantity of the form const + cr * r + cs * s, exact."""

    __slots__ = ("const", "cr", "cs")

    def __init__(self, const, cr, cs):
        self.const, self.cr, self.cs = frac(const), frac(cr), frac(cs)

    def scaled(self, k):
        k = frac(k)
        return _AffineRS(k * self.const, k * self.cr, k * self.cs)

    def plus(self, other):
        return _AffineRS(
            self.const + other.const, self.cr + other.cr, self.cs + other.cs
        )

    def at(self, r, s):
        return self.const + self.cr * frac(r) + self.cs * frac(s)


def _graph_tangents(A, B, C, D, E, F, alpha, beta, gamma, s0=None):
    """Tangent vectors v1, v2, v3 of the Q-graph along the plane.

    Fourth coordinates are the partials of Q evaluated on
    t = alpha + beta r + gamma s (with s frozen at s0 when given),
    represented as affine functions of (r, s).
    """
    if s0 is not None:
        # substitute s = s0; remaining parameter is r
        c1 = _AffineRS(D * s0 + E * gamma * s0 + E * alpha, 2 * A + E * beta, 0)
        c2 = _AffineRS(2 * B * s0 + F * gamma * s0 + F * alpha, D + F * beta, 0)
        c3 = _AffineRS(F * s0 + 2 * C * gamma * s0 + 2 * C * alpha, E + 2 * C * beta, 0)
    else:
        c1 = _AffineRS(E * alpha, 2 * A + E * beta, D + E * gamma)
        c2 = _AffineRS(F * alpha, D + F * beta, 2 * B + F * gamma)
        c3 = _AffineRS(2 * C * alpha, E + 2 * C * beta, F + 2 * C * gamma)
    return c1, c2, c3


_SAMPLE_POINTS = (
    (Fraction(0), Fraction(0)),
    (Fraction(1), Fraction(0)),
    (Fraction(-1), Fraction(1)),
    (Fraction(1, 2), Fraction(-1, 3)),
    (Fraction(7, 3), Fraction(2, 5)),
)


def _check_tangency(u_vectors, tangent_coords, s0=None):
    """Verify each u is an exact combination of v1, v2, v3 at sample points.

    v_j = e_j + (4th coord) e_4; solving [v1 v2 v3] x = u is an exact
    rational 4x3 linear system.
    """
    c1, c2, c3 = tangent_coords
    points = []
    for r, s in _SAMPLE_POINTS:
        s_val = s0 if s0 is not None else s
        rows = [
            [Fraction(1), Fraction(0), Fraction(0)],
            [Fraction(0), Fraction(1), Fraction(0)],
            [Fraction(0), Fraction(0), Fraction(1)],
            [c1.at(r, s_val), c2.at(r, s_val), c3.at(r, s_val)],
        ]
        for u in u_vectors:
            x = solve(rows, list(u))
            assert x is not None, "vertical vector left the tangent space"
        points.append((r, s_val))
    return tuple(points)


def _assemble_vertical(coeffs, tangent_coords):
    """Sum of k_j * v_j as a 4-vector; asserts the r, s parts cancel."""
    k1, k2, k3 = (frac(k) for k in coeffs)
    c1, c2, c3 = tangent_coords
    fourth = c1.scaled(k1).plus(c2.scaled(k2)).plus(c3.scaled(k3))
    assert fourth.cr == 0 and fourth.cs == 0, (
        "assembled vertical vector depends on the surface parameters"
    )
    return (k1, k2, k3, fourth.const)


def _det4(rows) -> Fraction:
    return det([[frac(x) for x in row] for row in rows])


def cylinder_frame_case1(
    coeffs, alpha, beta, gamma, s0, eta=None
) -> CylinderFrame:
    """Cylinder frame for case 1 (|a| > eta/4), s frozen at s0.

    Subcase 1 requires |2A + E beta| to be large, subcase 2 requires
    |2C beta^2 + E beta| to be large; with `eta` given, "large" means
    > eta/4, otherwise nonzero.  Subcase 1 additionally verifies the
    determinant identity
        |det[w1, w2, u3, u4]| = |2A+E beta| * |2A + 2C beta^2 + 2E beta|
    exactly.  Subcase 2 has no printed closed form; its determinant is
    required to be exactly nonzero, and >= 1e-8 in absolute value when a
    quantified eta is supplied.
    """
    A, B, C, D, E, F = (frac(x) for x in coeffs)
    alpha, beta, gamma, s0 = frac(alpha), frac(beta), frac(gamma), frac(s0)
    q1 = 2 * A + E * beta
    q2 = 2 * C * beta * beta + E * beta
    if eta is not None:
        eta = frac(eta)
        sub1, sub2 = abs(q1) > eta / 4, abs(q2) > eta / 4
    else:
        sub1, sub2 = q1 != 0, q2 != 0
    if sub1:
        subcase = 1
    elif sub2:
        subcase = 2
    else:
        raise SubcaseHypothesisFailed(
            f"|2A+E beta| = {abs(q1)} and |2C beta^2+E beta| = {abs(q2)} "
            "are both too small"
        )
    tangents = _graph_tangents(A, B, C, D, E, F, alpha, beta, gamma, s0=s0)
    if subcase == 1:
        u3 = _assemble_vertical((-(D + F * beta), q1, 0), tangents)
        u4 = _assemble_vertical((-(E + 2 * C * beta), 0, q1), tangents)
    else:
        u3 = _assemble_vertical((E + 2 * C * beta, 0, -(2 * A + E * beta)), tangents)
        u4 = _assemble_vertical(
            (0, E * beta + 2 * C * beta * beta, -(D * beta + F * beta * beta)),
            tangents,
        )
    w1 = (Fraction(1), Fraction(0), beta, Fraction(0))
    w2 = (Fraction(0), Fraction(0), Fraction(0), Fraction(1))
    d = _det4([w1, w2, u3, u4])
    audit = {"q1": q1, "q2": q2}
    if subcase == 1:
        product = abs(q1) * abs(2 * A + 2 * C * beta * beta + 2 * E * beta)
        assert abs(d) == product, "case-1 determinant identity failed"
        audit["identity_product"] = product
    else:
        assert d != 0, "case-1 subcase-2 determinant vanished"
        if eta is not None and abs(float(d)) < 1e-8:
            raise SubcaseHypothesisFailed(
                "subcase-2 determinant below the 1e-8 nonzero gate"
            )
    points = _check_tangency((u3, u4), tangents, s0=s0)
    return CylinderFrame(
        case=CASE1_A,
        subcase=subcase,
        w=(w1, w2),
        u=(u3, u4),
        det=d,
        audit=audit,
        tangency_points=points,
    )


def cylinder_frame_case3(coeffs, alpha, beta, gamma) -> CylinderFrame:
    """Cylinder frame for case 3 (both |a| and |b| small, |c| large).

    u4 = det2 * v1 + det3 * v2 + det1 * v3 has exactly vanishing r- and
    s-coefficients in its fourth coordinate, and

        |det[w1, w2, w3, u4]| = |det1 - beta*det2 - gamma*det3|
                              = |c^2 - 4ab|.

    Raises CaseHypothesisFailed when c^2 - 4ab = 0 (for instance the zero
    quadratic), since the frame degenerates there.
    """
    A, B, C, D, E, F = (frac(x) for x in coeffs)
    alpha, beta, gamma = frac(alpha), frac(beta), frac(gamma)
    report = form1_identity_check((A, B, C, D, E, F), beta, gamma)
    if report.rhs == 0:
        raise CaseHypothesisFailed(
            "c^2 - 4ab = 0: the cylinder frame is degenerate"
        )
    det1, det2, det3 = report.det1, report.det2, report.det3
    parent = _parent_matrix(A, B, C, D, E, F, beta, gamma)
    assert rank(parent) == 2, "parent matrix rank must be 2 when c^2-4ab != 0"
    tangents = _graph_tangents(A, B, C, D, E, F, alpha, beta, gamma)
    u4 = _assemble_vertical((det2, det3, det1), tangents)
    w1 = (Fraction(1), Fraction(0), beta, Fraction(0))
    w2 = (Fraction(0), Fraction(1), gamma, Fraction(0))
    w3 = (Fraction(0), Fraction(0), Fraction(0), Fraction(1))
    d = _det4([w1, w2, w3, u4])
    assert abs(d) == report.lhs == report.rhs, "case-3 determinant identity failed"
    points = _check_tangency((u4,), tangents)
    return CylinderFrame(
        case=CASE3_C,
        subcase=None,
        w=(w1, w2, w3),
        u=(u4,),
        det=d,
        audit={
            "det1": det1,
            "det2": det2,
            "det3": det3,
            "form1_lhs": report.lhs,
            "form1_rhs": report.rhs,
        },
        tangency_points=points,
    )
