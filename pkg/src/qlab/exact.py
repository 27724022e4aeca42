"""Exact linear algebra over rationals.

Everything here works on row-major lists of lists of ``fractions.Fraction``
and never rounds.  The decision procedures in this package (rank conditions,
kernel witnesses, congruence reductions) are exact dichotomies, so this
module is deliberately tolerance-free.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence


class SingularMatrixError(ZeroDivisionError):
    """Raised when inverting or solving against a singular matrix."""


def frac(x) -> Fraction:
    """Coerce ints, Fractions and 'p/q' / decimal strings to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational scalar")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        # Floats show up from already-parsed JSON and CLI args. Use the
        # shortest decimal representation, which is what the user typed,
        # rather than the binary expansion.
        return Fraction(repr(x))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


def mat(rows: Iterable[Iterable]) -> list[list[Fraction]]:
    out = [[frac(x) for x in row] for row in rows]
    if out and any(len(r) != len(out[0]) for r in out):
        raise ValueError("ragged matrix")
    return out


def identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(m: int, n: int) -> list[list[Fraction]]:
    return [[Fraction(0)] * n for _ in range(m)]


def transpose(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    return [list(col) for col in zip(*a)]


def mat_mul(a, b) -> list[list[Fraction]]:
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def mat_vec(a, v) -> list[Fraction]:
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def vec_dot(u, v) -> Fraction:
    return sum(x * y for x, y in zip(u, v))


def mat_add(a, b) -> list[list[Fraction]]:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_scale(c, a) -> list[list[Fraction]]:
    c = frac(c)
    return [[c * x for x in row] for row in a]


def rref(a: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (R, pivot column indices)."""
    r = [list(row) for row in a]
    m = len(r)
    n = len(r[0]) if m else 0
    pivots: list[int] = []
    i = 0
    for j in range(n):
        p = next((k for k in range(i, m) if r[k][j] != 0), None)
        if p is None:
            continue
        r[i], r[p] = r[p], r[i]
        pv = r[i][j]
        r[i] = [x / pv for x in r[i]]
        for k in range(m):
            if k != i and r[k][j] != 0:
                f = r[k][j]
                r[k] = [x - f * y for x, y in zip(r[k], r[i])]
        pivots.append(j)
        i += 1
        if i == m:
            break
    return r, pivots


def rank(a) -> int:
    if not a:
        return 0
    return len(rref(a)[1])


def nullspace(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """Basis of the right kernel {v : a v = 0} (list of vectors)."""
    if not a:
        return []
    n = len(a[0])
    r, pivots = rref(a)
    free = [j for j in range(n) if j not in pivots]
    basis = []
    for j in free:
        v = [Fraction(0)] * n
        v[j] = Fraction(1)
        for i, pj in enumerate(pivots):
            v[pj] = -r[i][j]
        basis.append(v)
    return basis


def det(a: Sequence[Sequence[Fraction]]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("determinant of a non-square matrix")
    r = [list(row) for row in a]
    d = Fraction(1)
    for j in range(n):
        p = next((k for k in range(j, n) if r[k][j] != 0), None)
        if p is None:
            return Fraction(0)
        if p != j:
            r[j], r[p] = r[p], r[j]
            d = -d
        d *= r[j][j]
        inv = 1 / r[j][j]
        for k in range(j + 1, n):
            if r[k][j] != 0:
                f = r[k][j] * inv
                r[k] = [x - f * y for x, y in zip(r[k], r[j])]
    return d


def det2(a, b, c, d) -> Fraction:
    return frac(a) * frac(d) - frac(b) * frac(c)


def inverse(a: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    n = len(a)
    aug = [list(row) + ident_row for row, ident_row in zip(a, identity(n))]
    r, pivots = rref(aug)
    if pivots != list(range(n)):
        raise SingularMatrixError("matrix is singular")
    return [row[n:] for row in r]


def solve(a, b) -> list[Fraction] | None:
    """One exact solution of a x = b, or None if inconsistent.

    Underdetermined systems return the solution with free variables 0.
    """
    m = len(a)
    n = len(a[0]) if m else 0
    aug = [list(row) + [frac(bb)] for row, bb in zip(a, b)]
    r, pivots = rref(aug)
    if n in pivots:  # pivot in the last (augmented) column
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(pivots):
        x[j] = r[i][n]
    return x


def is_zero_matrix(a) -> bool:
    return all(x == 0 for row in a for x in row)
