"""Exact quadratic-form algebra for pairs of forms on R^3.

A surface in this package is the graph
    (r, s, t)  ->  (r, s, t, Q1(r,s,t), Q2(r,s,t))
over the unit cube, where Q_i(v) = v^T A_i v for symmetric rational 3x3
matrices A_1, A_2.  This module holds the exact substrate: the matrices,
evaluation and gradients, linear changes of variables (a GL_3 substitution
combined with a GL_2 mixing of the two forms), and restriction of a form to
an affine plane t = alpha + beta*r + gamma*s.

All coefficients are arbitrary-precision rationals.  Nothing in this module
uses floating point.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exact import det, frac, identity, mat, mat_mul, transpose

__all__ = [
    "SingularTransform",
    "SymMatrix3",
    "QuadraticPair",
    "QuadPoly2",
    "HomQuad3",
    "MONOMIALS",
    "evaluate",
    "gradient",
    "change_of_variables",
    "restrict_to_plane",
    "lin_product",
    "load_pair",
    "loads_pair",
    "save_pair",
    "pair_to_json",
    "pair_hash",
]

# Shared monomial order for every degree-2 coefficient vector in the package.
MONOMIALS = ("r^2", "s^2", "t^2", "rs", "rt", "st")


class SingularTransform(ValueError):
    """A change of variables was requested with a singular matrix."""


def _triple(point) -> tuple[Fraction, Fraction, Fraction]:
    p = tuple(frac(x) for x in point)
    if len(p) != 3:
        raise ValueError(f"expected a point in R^3, got {len(p)} coordinates")
    return p


@dataclass(frozen=True)
class SymMatrix3:
    """Symmetric rational 3x3 matrix, stored as its upper triangle."""

    a11: Fraction
    a12: Fraction
    a13: Fraction
    a22: Fraction
    a23: Fraction
    a33: Fraction

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "SymMatrix3":
        m = mat(rows)
        if len(m) != 3 or len(m[0]) != 3:
            raise ValueError("expected a 3x3 matrix")
        for i in range(3):
            for j in range(i + 1, 3):
                if m[i][j] != m[j][i]:
                    raise ValueError(
                        f"matrix is not symmetric: entry ({i},{j}) = {m[i][j]} "
                        f"but ({j},{i}) = {m[j][i]}"
                    )
        return cls(m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2])

    @classmethod
    def from_quadratic_coeffs(cls, coeffs: Sequence) -> "SymMatrix3":
        """Build from coefficients of A r^2 + B s^2 + C t^2 + D rs + E rt + F st."""
        A, B, C, D, E, F = (frac(x) for x in coeffs)
        return cls(A, D / 2, E / 2, B, F / 2, C)

    @classmethod
    def zero(cls) -> "SymMatrix3":
        z = Fraction(0)
        return cls(z, z, z, z, z, z)

    def rows(self) -> list[list[Fraction]]:
        return [
            [self.a11, self.a12, self.a13],
            [self.a12, self.a22, self.a23],
            [self.a13, self.a23, self.a33],
        ]

    def quadratic_coeffs(self) -> tuple[Fraction, ...]:
        """Coefficients in the order (r^2, s^2, t^2, rs, rt, st)."""
        return (
            self.a11,
            self.a22,
            self.a33,
            2 * self.a12,
            2 * self.a13,
            2 * self.a23,
        )

    def is_zero(self) -> bool:
        return all(x == 0 for x in (self.a11, self.a12, self.a13, self.a22, self.a23, self.a33))

    def evaluate(self, point) -> Fraction:
        r, s, t = _triple(point)
        return (
            self.a11 * r * r
            + self.a22 * s * s
            + self.a33 * t * t
            + 2 * self.a12 * r * s
            + 2 * self.a13 * r * t
            + 2 * self.a23 * s * t
        )

    def gradient_at(self, point) -> tuple[Fraction, Fraction, Fraction]:
        r, s, t = _triple(point)
        return (
            2 * (self.a11 * r + self.a12 * s + self.a13 * t),
            2 * (self.a12 * r + self.a22 * s + self.a23 * t),
            2 * (self.a13 * r + self.a23 * s + self.a33 * t),
        )

    def gradient_forms(self) -> tuple[tuple[Fraction, ...], ...]:
        """The three partial derivatives as linear forms in (r, s, t).

        Row i is the coefficient triple of the i-th partial, i.e. twice row i
        of the matrix.
        """
        rows = self.rows()
        return tuple(tuple(2 * x for x in row) for row in rows)

    def scale(self, c) -> "SymMatrix3":
        c = frac(c)
        return SymMatrix3(
            c * self.a11, c * self.a12, c * self.a13, c * self.a22, c * self.a23, c * self.a33
        )

    def add(self, other: "SymMatrix3") -> "SymMatrix3":
        return SymMatrix3(
            self.a11 + other.a11,
            self.a12 + other.a12,
            self.a13 + other.a13,
            self.a22 + other.a22,
            self.a23 + other.a23,
            self.a33 + other.a33,
        )


@dataclass(frozen=True)
class QuadraticPair:
    """The pair (A1, A2) defining Q_i(r,s,t) = [r,s,t] A_i [r,s,t]^T."""

    A1: SymMatrix3
    A2: SymMatrix3

    def __post_init__(self):
        if self.A1.is_zero() and self.A2.is_zero():
            raise ValueError("both forms of the pair are zero")

    @classmethod
    def from_rows(cls, rows1, rows2) -> "QuadraticPair":
        return cls(SymMatrix3.from_rows(rows1), SymMatrix3.from_rows(rows2))

    @classmethod
    def from_quadratic_coeffs(cls, coeffs1, coeffs2) -> "QuadraticPair":
        return cls(
            SymMatrix3.from_quadratic_coeffs(coeffs1),
            SymMatrix3.from_quadratic_coeffs(coeffs2),
        )

    def matrices(self) -> tuple[SymMatrix3, SymMatrix3]:
        return (self.A1, self.A2)


@dataclass(frozen=True)
class QuadPoly2:
    """Bivariate quadratic a r^2 + b s^2 + c rs + d r + e s + f, exact."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction
    e: Fraction
    f: Fraction

    def quad_coeffs(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.a, self.b, self.c)

    def max_abs_quad(self) -> Fraction:
        return max(abs(self.a), abs(self.b), abs(self.c))

    def evaluate(self, r, s) -> Fraction:
        r, s = frac(r), frac(s)
        return self.a * r * r + self.b * s * s + self.c * r * s + self.d * r + self.e * s + self.f

    def is_zero(self) -> bool:
        return all(x == 0 for x in (self.a, self.b, self.c, self.d, self.e, self.f))


@dataclass(frozen=True)
class HomQuad3:
    """Homogeneous quadratic in (r, s, t), coefficients in MONOMIALS order."""

    coeffs: tuple[Fraction, Fraction, Fraction, Fraction, Fraction, Fraction]

    @classmethod
    def from_coeffs(cls, coeffs: Sequence) -> "HomQuad3":
        c = tuple(frac(x) for x in coeffs)
        if len(c) != 6:
            raise ValueError("expected 6 coefficients (r^2, s^2, t^2, rs, rt, st)")
        return cls(c)

    @classmethod
    def zero(cls) -> "HomQuad3":
        return cls((Fraction(0),) * 6)

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.coeffs)

    def evaluate(self, point) -> Fraction:
        r, s, t = _triple(point)
        c = self.coeffs
        return (
            c[0] * r * r + c[1] * s * s + c[2] * t * t
            + c[3] * r * s + c[4] * r * t + c[5] * s * t
        )

    def add(self, other: "HomQuad3") -> "HomQuad3":
        return HomQuad3(tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def sub(self, other: "HomQuad3") -> "HomQuad3":
        return HomQuad3(tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def scale(self, c) -> "HomQuad3":
        c = frac(c)
        return HomQuad3(tuple(c * x for x in self.coeffs))


def lin_product(u: Sequence, v: Sequence) -> HomQuad3:
    """Product of two linear forms in (r, s, t) as a HomQuad3."""
    u = tuple(frac(x) for x in u)
    v = tuple(frac(x) for x in v)
    return HomQuad3(
        (
            u[0] * v[0],
            u[1] * v[1],
            u[2] * v[2],
            u[0] * v[1] + u[1] * v[0],
            u[0] * v[2] + u[2] * v[0],
            u[1] * v[2] + u[2] * v[1],
        )
    )


def evaluate(pair: QuadraticPair, point) -> tuple[Fraction, Fraction]:
    """(Q1(point), Q2(point)), exact."""
    p = _triple(point)
    return (pair.A1.evaluate(p), pair.A2.evaluate(p))


def gradient(pair: QuadraticPair, point) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """(grad Q1, grad Q2) at the point; each is 2*A_i*point, exact."""
    p = _triple(point)
    return (pair.A1.gradient_at(p), pair.A2.gradient_at(p))


def change_of_variables(pair: QuadraticPair, M, beta=None) -> QuadraticPair:
    """Substitute v -> Mv and mix the two forms by an invertible 2x2 beta.

    Returns the pair with matrices B_i = M^T (beta_i1 A1 + beta_i2 A2) M.
    With beta = identity this is the plain substitution Q_i(Mv).
    """
    M = mat(M)
    if len(M) != 3 or len(M[0]) != 3:
        raise ValueError("M must be 3x3")
    if beta is None:
        beta = identity(2)
    else:
        beta = mat(beta)
        if len(beta) != 2 or len(beta[0]) != 2:
            raise ValueError("beta must be 2x2")
    if det(M) == 0:
        raise SingularTransform("M is singular")
    if det(beta) == 0:
        raise SingularTransform("beta is singular")
    Mt = transpose(M)
    a1, a2 = pair.A1.rows(), pair.A2.rows()
    out = []
    for i in range(2):
        mixed = [
            [beta[i][0] * x + beta[i][1] * y for x, y in zip(r1, r2)]
            for r1, r2 in zip(a1, a2)
        ]
        out.append(SymMatrix3.from_rows(mat_mul(Mt, mat_mul(mixed, M))))
    return QuadraticPair(out[0], out[1])


def restrict_to_plane(Q: SymMatrix3, alpha, beta, gamma) -> QuadPoly2:
    """Q(r, s, alpha + beta*r + gamma*s) as an exact bivariate quadratic.

    Writing Q = A r^2 + B s^2 + C t^2 + D rs + E rt + F st, the quadratic part
    of the restriction is
        a = A + C beta^2 + E beta,
        b = B + C gamma^2 + F gamma,
        c = D + 2 C beta gamma + E gamma + F beta,
    which does not involve alpha; alpha only feeds the affine part.
    """
    alpha, beta, gamma = frac(alpha), frac(beta), frac(gamma)
    A, B, C, D, E, F = Q.quadratic_coeffs()
    return QuadPoly2(
        a=A + C * beta * beta + E * beta,
        b=B + C * gamma * gamma + F * gamma,
        c=D + 2 * C * beta * gamma + E * gamma + F * beta,
        d=2 * C * alpha * beta + E * alpha,
        e=2 * C * alpha * gamma + F * alpha,
        f=C * alpha * alpha,
    )


# ---------------------------------------------------------------------------
# Pair files.  Format: {"A1": 3x3 array, "A2": 3x3 array}; entries may be
# JSON numbers or exact "p/q" strings.  Decimal literals are parsed as exact
# decimals, never through binary floating point.
# ---------------------------------------------------------------------------


def _entry_to_str(x: Fraction) -> str:
    return str(x)


def pair_to_json(pair: QuadraticPair) -> str:
    """Canonical JSON for a pair: entries as exact strings, sorted keys."""
    doc = {
        "A1": [[_entry_to_str(x) for x in row] for row in pair.A1.rows()],
        "A2": [[_entry_to_str(x) for x in row] for row in pair.A2.rows()],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def pair_hash(pair: QuadraticPair) -> str:
    """Stable 12-hex-digit identifier of a pair (hash of canonical JSON)."""
    return hashlib.sha256(pair_to_json(pair).encode("ascii")).hexdigest()[:12]


def loads_pair(text: str) -> QuadraticPair:
    doc = json.loads(text, parse_float=Fraction, parse_int=Fraction)
    if not isinstance(doc, dict) or set(doc) != {"A1", "A2"}:
        raise ValueError('pair file must be an object with exactly the keys "A1" and "A2"')
    return QuadraticPair.from_rows(doc["A1"], doc["A2"])


def load_pair(path) -> QuadraticPair:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_pair(fh.read())


def save_pair(pair: QuadraticPair, path) -> None:
    doc = {
        "A1": [[_entry_to_str(x) for x in row] for row in pair.A1.rows()],
        "A2": [[_entry_to_str(x) for x in row] for row in pair.A2.rows()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
