"""Decision procedures for pairs of quadratic forms.

Four exact questions about a pair (Q1, Q2), plus one numerical estimate:

* nondegeneracy: is every nontrivial combination u*D1 - v*D2 + w*D3 of the
  three gradient minors a nonzero polynomial?  Decided by an exact rank
  computation; degenerate verdicts carry an exact witness (u, v, w).
* simultaneous diagonalization: is there a real invertible M making both
  M^T A_i M diagonal?  Decided through the pencil A1 + tau*A2, exactly when
  the generalized eigenvalues are rational, in binary64 otherwise.
* minor taxonomy: which of the four degenerate patterns the 2x3 eigenvalue
  matrix fits after an invertible 2x2 row mix.
* normal form: reduction of a fully nonsingular-minor pair to
  (1/2 (r^2 + A s^2), 1/2 (t^2 + B s^2)) with explicit transforms.
* eta estimate: grid lower bound for the plane-restriction constant eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exact import (
    det,
    frac,
    identity,
    inverse,
    mat,
    mat_mul,
    mat_vec,
    nullspace,
    rank,
    transpose,
    vec_dot,
)
from .qform import (
    HomQuad3,
    QuadraticPair,
    SingularTransform,
    SymMatrix3,
    change_of_variables,
    lin_product,
    restrict_to_plane,
)

__all__ = [
    "NondegeneracyVerdict",
    "SimDiagResult",
    "TypeMatch",
    "TaxonomyVerdict",
    "NormalForm",
    "EtaEstimate",
    "ClassificationReport",
    "NotReducible",
    "minor_polys",
    "nondegeneracy_check",
    "invariance_check",
    "simultaneous_diagonalize",
    "minor_taxonomy",
    "normal_form",
    "target_pair",
    "eta_estimate",
    "classify_pair",
]

NONDEGENERATE = "NONDEGENERATE"
DEGENERATE = "DEGENERATE"
ALL_MINORS_NONZERO = "ALL_MINORS_NONZERO"
SINGULAR_MINOR = "SINGULAR_MINOR"

# Residual gates for the floating fallback of the diagonalizer.  The
# returned basis must beat DIAG_RELATIVE_TOL; anything worse than
# RESIDUAL_GATE aborts instead of returning a bad answer.
DIAG_RELATIVE_TOL = 1e-12
RESIDUAL_GATE = 1e-10


class NotReducible(ValueError):
    """The pair has no normal form of the requested shape."""


def _fr_str(x) -> object:
    """JSON-friendly scalar: exact string for Fraction, float otherwise."""
    if isinstance(x, Fraction):
        return str(x)
    return float(x)


def _mat_json(m) -> list:
    return [[_fr_str(x) for x in row] for row in m]


# ---------------------------------------------------------------------------
# Nondegeneracy
# ---------------------------------------------------------------------------


def minor_polys(pair: QuadraticPair) -> tuple[HomQuad3, HomQuad3, HomQuad3]:
    """The three 2x2 minors D1, D2, D3 of the gradient matrix.

    Rows of the matrix are grad Q1 and grad Q2 (linear forms in r, s, t);
    D1 drops the r-column, D2 the s-column, D3 the t-column:
        D1 = dQ1/ds * dQ2/dt - dQ1/dt * dQ2/ds, etc.
    Each minor is a homogeneous quadratic.
    """
    g1 = pair.A1.gradient_forms()
    g2 = pair.A2.gradient_forms()

    def minor(i, j):
        return lin_product(g1[i], g2[j]).sub(lin_product(g1[j], g2[i]))

    return (minor(1, 2), minor(0, 2), minor(0, 1))


def _primitive(v: Sequence[Fraction]) -> list[Fraction]:
    """Scale a rational vector to a primitive integer vector, first nonzero > 0."""
    denoms = [x.denominator for x in v]
    scale = Fraction(math.lcm(*denoms))
    ints = [int(x * scale) for x in v]
    g = math.gcd(*(abs(i) for i in ints))
    if g:
        ints = [i // g for i in ints]
    lead = next((i for i in ints if i != 0), 0)
    if lead < 0:
        ints = [-i for i in ints]
    return [Fraction(i) for i in ints]


@dataclass(frozen=True)
class NondegeneracyVerdict:
    verdict: str
    witness: Optional[tuple[Fraction, Fraction, Fraction]]
    minor_polys: tuple[HomQuad3, HomQuad3, HomQuad3]

    @property
    def nondegenerate(self) -> bool:
        return self.verdict == NONDEGENERATE

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": None if self.witness is None else [_fr_str(x) for x in self.witness],
            "minor_polys": [[_fr_str(c) for c in p.coeffs] for p in self.minor_polys],
        }


def nondegeneracy_check(pair: QuadraticPair) -> NondegeneracyVerdict:
    """Exact verdict on the gradient-minor condition.

    NONDEGENERATE iff the coefficient vectors of D1, D2, D3 span a
    3-dimensional space, i.e. no combination u*D1 - v*D2 + w*D3 with
    (u,v,w) != 0 is the zero polynomial.  On DEGENERATE the witness (u,v,w)
    is a primitive integer vector with that combination identically zero.
    """
    D1, D2, D3 = minor_polys(pair)
    coeff_rows = [list(D1.coeffs), list(D2.coeffs), list(D3.coeffs)]
    if rank(coeff_rows) == 3:
        return NondegeneracyVerdict(NONDEGENERATE, None, (D1, D2, D3))
    kernel = nullspace(transpose(coeff_rows))
    k1, k2, k3 = kernel[0]
    witness = _primitive([k1, -k2, k3])
    combo = D1.scale(witness[0]).sub(D2.scale(witness[1])).add(D3.scale(witness[2]))
    assert combo.is_zero(), "kernel vector does not annihilate the minors"
    return NondegeneracyVerdict(DEGENERATE, tuple(witness), (D1, D2, D3))


def invariance_check(pair: QuadraticPair, B) -> bool:
    """Whether the nondegeneracy verdict survives the substitution v -> Bv.

    Always true for invertible B; this runs both exact checks and compares.
    """
    B = mat(B)
    if det(B) == 0:
        raise SingularTransform("B is singular")
    before = nondegeneracy_check(pair).verdict
    after = nondegeneracy_check(change_of_variables(pair, B)).verdict
    return before == after


# ---------------------------------------------------------------------------
# Univariate polynomial helpers over Fraction (coefficients highest first)
# ---------------------------------------------------------------------------


def _poly_trim(p):
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _poly_deriv(p):
    n = len(p) - 1
    if n == 0:
        return [Fraction(0)]
    return [c * (n - i) for i, c in enumerate(p[:-1])]


def _poly_divmod(a, b):
    a = list(a)
    b = _poly_trim(b)
    if b == [Fraction(0)]:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(1, len(a) - len(b) + 1)
    while len(a) >= len(b) and _poly_trim(a) != [Fraction(0)]:
        a = _poly_trim(a)
        if len(a) < len(b):
            break
        shift = len(a) - len(b)
        c = a[0] / b[0]
        q[len(q) - 1 - shift] = c
        for i, bc in enumerate(b):
            a[i] -= c * bc
        a = a[1:] if a[0] == 0 else a
    r = _poly_trim(a) if a else [Fraction(0)]
    return _poly_trim(q), r


def _poly_gcd(a, b):
    a, b = _poly_trim(a), _poly_trim(b)
    while b != [Fraction(0)]:
        _, r = _poly_divmod(a, b)
        a, b = b, r
    return [c / a[0] for c in a]  # monic


def _charpoly(T):
    """Characteristic polynomial det(lambda I - T), monic, n <= 3."""
    n = len(T)
    if n == 1:
        return [Fraction(1), -T[0][0]]
    if n == 2:
        return [Fraction(1), -(T[0][0] + T[1][1]), det(T)]
    tr = T[0][0] + T[1][1] + T[2][2]
    c2 = (
        det([[T[0][0], T[0][1]], [T[1][0], T[1][1]]])
        + det([[T[0][0], T[0][2]], [T[2][0], T[2][2]]])
        + det([[T[1][1], T[1][2]], [T[2][1], T[2][2]]])
    )
    return [Fraction(1), -tr, c2, -det(T)]


def _poly_eval_matrix(p, T):
    n = len(T)
    acc = [[Fraction(0)] * n for _ in range(n)]
    for c in p:
        acc = mat_mul(acc, T)
        for i in range(n):
            acc[i][i] += c
    return acc


def _all_roots_real(p) -> bool:
    """All roots of p real?  Degree <= 3 only.

    For degree <= 3 a repeated complex root is impossible, so the sign of
    the discriminant decides: nonnegative iff every root is real.
    """
    p = _poly_trim(p)
    deg = len(p) - 1
    if deg <= 1:
        return True
    if deg == 2:
        a, b, c = p
        return b * b - 4 * a * c >= 0
    a, b, c, d = p
    disc = (
        18 * a * b * c * d
        - 4 * b**3 * d
        + b * b * c * c
        - 4 * a * c**3
        - 27 * a * a * d * d
    )
    return disc >= 0


def _divisors(n: int) -> list[int]:
    n = abs(n)
    out = []
    for i in range(1, int(math.isqrt(n)) + 1):
        if n % i == 0:
            out.append(i)
            if i != n // i:
                out.append(n // i)
    return sorted(out)


def _rational_roots(p) -> tuple[list[Fraction], bool]:
    """(roots found by the rational root theorem, whether they exhaust p).

    p is assumed squarefree here, so roots are reported without multiplicity.
    """
    p = _poly_trim(p)
    scale = Fraction(math.lcm(*(c.denominator for c in p)))
    ip = [int(c * scale) for c in p]
    roots: list[Fraction] = []
    while len(ip) > 1:
        if ip[-1] == 0:
            root = Fraction(0)
        else:
            root = None
            for num in _divisors(ip[-1]):
                for den in _divisors(ip[0]):
                    for cand in (Fraction(num, den), Fraction(-num, den)):
                        if sum(c * cand ** (len(ip) - 1 - i) for i, c in enumerate(ip)) == 0:
                            root = cand
                            break
                    if root is not None:
                        break
                if root is not None:
                    break
            if root is None:
                break
        roots.append(root)
        # synthetic division by (x - root)
        out = [Fraction(ip[0])]
        for c in ip[1:-1]:
            out.append(c + out[-1] * root)
        common = Fraction(math.lcm(*(c.denominator for c in out)))
        ip = [int(c * common) for c in out]
    complete = len(ip) == 1
    return roots, complete


# ---------------------------------------------------------------------------
# Simultaneous diagonalization
# ---------------------------------------------------------------------------

PENCIL_TRIALS = 20


@dataclass(frozen=True)
class SimDiagResult:
    present: bool
    M: Optional[list]  # 3x3, Fraction entries in exact mode, floats otherwise
    Lam: Optional[list]  # 2x3, row i = diagonal of M^T A_i M
    exact: bool
    reason: Optional[str] = None
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "present": self.present,
            "M": None if self.M is None else _mat_json(self.M),
            "Lambda": None if self.Lam is None else _mat_json(self.Lam),
            "exact": self.exact,
            "reason": self.reason,
            "residual": self.residual,
        }


def _common_kernel(A1, A2):
    stacked = [list(row) for row in A1] + [list(row) for row in A2]
    return nullspace(stacked)


def _p_inner(P, u, v) -> Fraction:
    return vec_dot(u, mat_vec(P, v))


def _p_orthogonalize(vectors, P):
    """Make a basis pairwise P-orthogonal by symmetric elimination.

    Requires P restricted to the span to be nondegenerate, which holds for
    full generalized eigenspaces of a nonsingular pencil member.
    """
    pending = [list(v) for v in vectors]
    out = []
    while pending:
        idx = next(
            (i for i, v in enumerate(pending) if _p_inner(P, v, v) != 0), None
        )
        if idx is None:
            # all self-products vanish; some cross product must not
            pair_idx = next(
                (
                    (i, j)
                    for i in range(len(pending))
                    for j in range(i + 1, len(pending))
                    if _p_inner(P, pending[i], pending[j]) != 0
                ),
                None,
            )
            assert pair_idx is not None, "restriction of the pencil member is degenerate"
            i, j = pair_idx
            pending[i] = [x + y for x, y in zip(pending[i], pending[j])]
            idx = i
        v = pending.pop(idx)
        pv = _p_inner(P, v, v)
        pending = [
            [x - (_p_inner(P, u, v) / pv) * y for x, y in zip(u, v)] for u in pending
        ]
        out.append(v)
    return out


def _simdiag_exact(A1, A2):
    """Recursive exact/float diagonalizer for n x n symmetric pairs, n <= 3.

    Returns (columns, exact_flag) or (None, reason).  Columns are vectors of
    Fractions in exact mode, lists of floats otherwise.
    """
    n = len(A1)
    if n == 0:
        return [], True
    trials = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1))] + [
        (Fraction(1), Fraction(t)) for t in range(1, PENCIL_TRIALS + 1)
    ]
    P = S = None
    for x, y in trials:
        cand = [
            [x * a + y * b for a, b in zip(ra, rb)] for ra, rb in zip(A1, A2)
        ]
        if det(cand) != 0:
            P = cand
            S = A1 if (x, y) == (Fraction(0), Fraction(1)) else A2
            break
    if P is None:
        # The pencil determinant vanishes identically.  Split off the common
        # kernel if there is one; otherwise no diagonalizing basis exists.
        K = _common_kernel(A1, A2)
        if not K:
            return None, (
                "every pencil member A1 + tau*A2 is singular and the forms "
                "share no common kernel vector"
            )
        # complement spanned by standard basis vectors
        J = []
        base = [list(v) for v in K]
        for j in range(n):
            e = [Fraction(int(i == j)) for i in range(n)]
            if rank(base + [e]) > len(base):
                base.append(e)
                J.append(j)
        B1 = [[A1[i][j] for j in J] for i in J]
        B2 = [[A2[i][j] for j in J] for i in J]
        sub, flag = _simdiag_exact(B1, B2)
        if sub is None:
            return None, flag
        if flag:
            cols = [list(v) for v in K]
        else:
            cols = [[float(x) for x in v] for v in K]
        for w in sub:
            col = [Fraction(0)] * n if flag else [0.0] * n
            for idx, j in enumerate(J):
                col[j] = w[idx]
            cols.append(col)
        return cols, flag
    T = mat_mul(inverse(P), S)
    chi = _charpoly(T)
    if not _all_roots_real(chi):
        return None, "the pencil has a nonreal generalized eigenvalue"
    m = _poly_divmod(chi, _poly_gcd(chi, _poly_deriv(chi)))[0]
    if any(x != 0 for row in _poly_eval_matrix(m, T) for x in row):
        return None, "the pencil operator is defective (not diagonalizable)"
    roots, complete = _rational_roots(m)
    if complete:
        cols = []
        for lam in roots:
            shifted = [
                [T[i][j] - (lam if i == j else 0) for j in range(n)] for i in range(n)
            ]
            space = nullspace(shifted)
            cols.extend(_primitive(v) for v in _p_orthogonalize(space, P))
        assert len(cols) == n
        return cols, True
    return _simdiag_float(T, P, n)


def _simdiag_float(T, P, n):
    """Floating eigenbasis of T, P-orthogonalized within eigenvalue clusters."""
    Tf = np.array([[float(x) for x in row] for row in T])
    Pf = np.array([[float(x) for x in row] for row in P])
    w, V = np.linalg.eig(Tf)
    w = w.real
    V = V.real
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    scale = max(1.0, float(np.max(np.abs(w))))
    cols = []
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(w[j] - w[j - 1]) <= 1e-8 * scale:
            j += 1
        block = V[:, i:j]
        if j - i > 1:
            G = block.T @ Pf @ block
            G = (G + G.T) / 2
            _, U = np.linalg.eigh(G)
            block = block @ U
        for k in range(block.shape[1]):
            col = block[:, k]
            col = col / np.linalg.norm(col)
            lead = np.argmax(np.abs(col))
            if col[lead] < 0:
                col = -col
            cols.append([float(x) for x in col])
        i = j
    return cols, False


def simultaneous_diagonalize(pair: QuadraticPair) -> SimDiagResult:
    """Find a real invertible M with both M^T A_i M diagonal, if one exists.

    Exact when the generalized eigenvalues are rational; otherwise a
    binary64 basis behind a strict residual gate, flagged via exact=False.
    When every pencil member is singular the forms are first reduced modulo
    their common kernel; if there is none, no such M exists and the result
    says why.
    """
    A1, A2 = pair.A1.rows(), pair.A2.rows()
    cols, flag = _simdiag_exact(A1, A2)
    if cols is None:
        return SimDiagResult(False, None, None, False, reason=flag)
    exact = bool(flag)
    if exact:
        M = transpose(cols)  # columns -> matrix
        D1 = mat_mul(transpose(M), mat_mul(A1, M))
        D2 = mat_mul(transpose(M), mat_mul(A2, M))
        for D in (D1, D2):
            for i in range(3):
                for j in range(3):
                    if i != j:
                        assert D[i][j] == 0, "exact diagonalization failed"
        lam = [[D1[j][j] for j in range(3)], [D2[j][j] for j in range(3)]]
        order = sorted(range(3), key=lambda j: (lam[0][j], lam[1][j]), reverse=True)
        M = [[M[i][j] for j in order] for i in range(3)]
        Lam = [[lam[0][j] for j in order], [lam[1][j] for j in order]]
        return SimDiagResult(True, M, Lam, True)
    Mf = np.array(cols, dtype=float).T
    A1f = np.array([[float(x) for x in row] for row in A1])
    A2f = np.array([[float(x) for x in row] for row in A2])
    D1 = Mf.T @ A1f @ Mf
    D2 = Mf.T @ A2f @ Mf
    scale = max(1.0, float(np.max(np.abs(np.diagonal(D1)))), float(np.max(np.abs(np.diagonal(D2)))))
    off = max(
        float(np.max(np.abs(D - np.diag(np.diagonal(D))))) for D in (D1, D2)
    )
    residual = off / scale
    if residual > RESIDUAL_GATE:
        raise ArithmeticError(
            f"floating diagonalization residual {residual:.3e} exceeds the gate"
        )
    lam = [list(np.diagonal(D1)), list(np.diagonal(D2))]
    order = sorted(range(3), key=lambda j: (lam[0][j], lam[1][j]), reverse=True)
    M = [[float(Mf[i][j]) for j in order] for i in range(3)]
    Lam = [[float(lam[0][j]) for j in order], [float(lam[1][j]) for j in order]]
    return SimDiagResult(True, M, Lam, False, residual=residual)


# ---------------------------------------------------------------------------
# Minor taxonomy
# ---------------------------------------------------------------------------

ZERO_ROW = "ZERO_ROW"
SPLIT_12_3 = "SPLIT_12_3"  # pattern [[0,0,c],[a,b,0]]
SPLIT_13_2 = "SPLIT_13_2"  # pattern [[0,c,0],[a,0,b]]
SPLIT_23_1 = "SPLIT_23_1"  # pattern [[c,0,0],[0,a,b]]

PATTERNS = {
    ZERO_ROW: "[[0,0,0],[a,b,c]]",
    SPLIT_12_3: "[[0,0,c],[a,b,0]]",
    SPLIT_13_2: "[[0,c,0],[a,0,b]]",
    SPLIT_23_1: "[[c,0,0],[0,a,b]]",
}


@dataclass(frozen=True)
class TypeMatch:
    name: str
    pattern: str
    beta: list
    normalized: list

    def to_dict(self) -> dict:
        return {
            "type": self.name,
            "pattern": self.pattern,
            "beta": _mat_json(self.beta),
            "normalized": _mat_json(self.normalized),
        }


@dataclass(frozen=True)
class TaxonomyVerdict:
    verdict: str
    minors: tuple  # (m12, m13, m23) over column pairs
    matches: tuple

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "minors": [_fr_str(x) for x in self.minors],
            "matches": [m.to_dict() for m in self.matches],
        }


def _taxonomy_exact(lam) -> bool:
    return all(isinstance(x, (Fraction, int)) for row in lam for x in row)


def minor_taxonomy(Lam, tol: Optional[float] = None) -> TaxonomyVerdict:
    """Classify a 2x3 eigenvalue matrix by its vanishing 2x2 minors.

    ALL_MINORS_NONZERO when every pair of columns is independent; otherwise
    matches against the four degenerate patterns, reporting every pattern
    some invertible 2x2 row mix can produce, with the mix and the
    sign-normalized result.  Exact for rational input; floating input is
    judged against a relative tolerance (default 1e-9).
    """
    rows = [list(r) for r in Lam]
    if len(rows) != 2 or any(len(r) != 3 for r in rows):
        raise ValueError("expected a 2x3 matrix")
    exact = tol is None and _taxonomy_exact(rows)
    if exact:
        lam = [[frac(x) for x in r] for r in rows]
        zero = lambda x: x == 0
        one = Fraction(1)
    else:
        lam = [[float(x) for x in r] for r in rows]
        scale = max(abs(x) for r in lam for x in r) or 1.0
        eps = (1e-9 if tol is None else tol) * scale
        zero = lambda x: abs(x) <= eps
        one = 1.0

    cols = [(lam[0][j], lam[1][j]) for j in range(3)]

    def cross(u, v):
        return u[0] * v[1] - u[1] * v[0]

    minors = (cross(cols[0], cols[1]), cross(cols[0], cols[2]), cross(cols[1], cols[2]))
    if not any(zero(m) for m in minors):
        return TaxonomyVerdict(ALL_MINORS_NONZERO, minors, ())

    def col_zero(u):
        return zero(u[0]) and zero(u[1])

    def unit_if(x):
        return x / abs(x) if not zero(x) else x * 0

    def inv2(m):
        d = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        return [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]

    def apply(beta):
        mixed = [
            [beta[i][0] * lam[0][j] + beta[i][1] * lam[1][j] for j in range(3)]
            for i in range(2)
        ]
        # positive column scalings to push magnitudes to 1
        for j in range(3):
            big = max(abs(mixed[0][j]), abs(mixed[1][j]))
            if not zero(big):
                mixed[0][j] /= big
                mixed[1][j] /= big
            # snap near-zeros in floating mode for readability
            for i in range(2):
                if zero(mixed[i][j]):
                    mixed[i][j] = mixed[i][j] * 0
        return mixed

    matches = []

    # zero row: the two rows of Lam are dependent
    row_rank = 2
    if all(zero(x) for x in lam[0]) or all(zero(x) for x in lam[1]):
        row_rank = 0 if all(zero(x) for r in lam for x in r) else 1
    elif all(zero(m) for m in minors):
        row_rank = 1
    if row_rank <= 1:
        if all(zero(x) for x in lam[0]):
            beta = [[one, one * 0], [one * 0, one]]
        elif all(zero(x) for x in lam[1]):
            beta = [[one * 0, one], [one, one * 0]]
        else:
            # both rows nonzero and dependent: row2 = t*row1 with t != 0,
            # so (t, -1) kills row 1 and [[t,-1],[0,1]] is invertible
            j = next(j for j in range(3) if not zero(lam[0][j]))
            t = lam[1][j] / lam[0][j]
            beta = [[t, -one], [one * 0, one]]
        matches.append(TypeMatch(ZERO_ROW, PATTERNS[ZERO_ROW], beta, apply(beta)))

    splits = (
        (SPLIT_12_3, (0, 1), 2),
        (SPLIT_13_2, (0, 2), 1),
        (SPLIT_23_1, (1, 2), 0),
    )
    for name, (i, j), k in splits:
        if not zero(cross(cols[i], cols[j])):
            continue
        u = cols[i] if not col_zero(cols[i]) else cols[j]  # direction of the pair
        v = cols[k]  # direction of the singleton
        if col_zero(u):
            u = None
        if col_zero(v):
            v = None
        if u is not None and v is not None and zero(cross(u, v)):
            continue
        if u is None and v is None:
            u, v = (one, one * 0), (one * 0, one)
        elif u is None:
            u = (one, one * 0) if not zero(cross((one, one * 0), v)) else (one * 0, one)
        elif v is None:
            v = (one, one * 0) if not zero(cross((one, one * 0), u)) else (one * 0, one)
        beta = inv2([[v[0], u[0]], [v[1], u[1]]])  # beta*v = e1, beta*u = e2
        matches.append(TypeMatch(name, PATTERNS[name], beta, apply(beta)))

    return TaxonomyVerdict(SINGULAR_MINOR, minors, tuple(matches))


# ---------------------------------------------------------------------------
# Normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalForm:
    A: object  # Fraction in exact mode, float otherwise
    B: object
    M: list
    beta: list
    exact: bool

    def to_dict(self) -> dict:
        return {
            "A": _fr_str(self.A),
            "B": _fr_str(self.B),
            "M": _mat_json(self.M),
            "beta": _mat_json(self.beta),
            "exact": self.exact,
        }


def target_pair(A, B) -> QuadraticPair:
    """The reduced pair (1/2 (r^2 + A s^2), 1/2 (t^2 + B s^2))."""
    A, B = frac(A), frac(B)
    half = Fraction(1, 2)
    return QuadraticPair(
        SymMatrix3.from_rows([[half, 0, 0], [0, A / 2, 0], [0, 0, 0]]),
        SymMatrix3.from_rows([[0, 0, 0], [0, B / 2, 0], [0, 0, half]]),
    )


def _already_target(pair: QuadraticPair):
    a1, a2 = pair.A1, pair.A2
    half = Fraction(1, 2)
    if (
        (a1.a11, a1.a12, a1.a13, a1.a23, a1.a33) == (half, 0, 0, 0, 0)
        and (a2.a11, a2.a12, a2.a13, a2.a23) == (0, 0, 0, 0)
        and a2.a33 == half
        and a1.a22 != 0
        and a2.a22 != 0
    ):
        return 2 * a1.a22, 2 * a2.a22
    return None


def normal_form(pair: QuadraticPair) -> NormalForm:
    """Reduce to (1/2 (r^2 + A s^2), 1/2 (t^2 + B s^2)) with transforms.

    Requires the pair to be simultaneously diagonalizable with all three
    2x2 minors of the eigenvalue matrix nonzero; raises NotReducible
    otherwise.  The returned (M, beta) satisfy
    change_of_variables(pair, M, beta) == target exactly in rational mode.
    """
    direct = _already_target(pair)
    if direct is not None:
        return NormalForm(direct[0], direct[1], identity(3), identity(2), True)
    sd = simultaneous_diagonalize(pair)
    if not sd.present:
        raise NotReducible(f"pair is not simultaneously diagonalizable: {sd.reason}")
    tax = minor_taxonomy(sd.Lam)
    if tax.verdict != ALL_MINORS_NONZERO:
        raise NotReducible(
            "a 2x2 minor of the eigenvalue matrix vanishes; the pair is of "
            "degenerate type"
        )
    lam = sd.Lam
    if sd.exact:
        c1 = [lam[0][0], lam[1][0]]
        c2 = [lam[0][1], lam[1][1]]
        c3 = [lam[0][2], lam[1][2]]
        beta = mat_mul([[Fraction(1, 2), 0], [0, Fraction(1, 2)]], inverse(transpose([c1, c3])))
        A = 2 * (beta[0][0] * c2[0] + beta[0][1] * c2[1])
        B = 2 * (beta[1][0] * c2[0] + beta[1][1] * c2[1])
        out = change_of_variables(pair, sd.M, beta)
        assert out == target_pair(A, B), "normal-form round trip failed"
        return NormalForm(A, B, sd.M, beta, True)
    lamf = np.array(lam, dtype=float)
    cols = lamf.T
    beta = 0.5 * np.linalg.inv(np.column_stack([cols[0], cols[2]]))
    mixed2 = beta @ cols[1]
    A, B = 2 * mixed2[0], 2 * mixed2[1]
    # floating reconstruction check
    Mf = np.array(sd.M, dtype=float)
    A1f = np.array([[float(x) for x in row] for row in pair.A1.rows()])
    A2f = np.array([[float(x) for x in row] for row in pair.A2.rows()])
    B1 = Mf.T @ (beta[0, 0] * A1f + beta[0, 1] * A2f) @ Mf
    B2 = Mf.T @ (beta[1, 0] * A1f + beta[1, 1] * A2f) @ Mf
    T1 = np.diag([0.5, A / 2, 0.0])
    T2 = np.diag([0.0, B / 2, 0.5])
    err = max(float(np.max(np.abs(B1 - T1))), float(np.max(np.abs(B2 - T2))))
    if err > 1e-9 * max(1.0, abs(A), abs(B)):
        raise ArithmeticError(f"floating normal-form reconstruction error {err:.3e}")
    return NormalForm(
        float(A), float(B), [[float(x) for x in r] for r in sd.M],
        [[float(x) for x in r] for r in beta], False,
    )


# ---------------------------------------------------------------------------
# Eta estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EtaEstimate:
    value: float
    argmin: tuple  # (alpha, beta, gamma)
    bound: Fraction
    grid: Fraction
    refined: bool
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmin": [_fr_str(x) for x in self.argmin],
            "bound": _fr_str(self.bound),
            "grid": _fr_str(self.grid),
            "refined": self.refined,
            "evaluations": self.evaluations,
        }


def _restricted_max_coeff(pair, beta, gamma) -> Fraction:
    a1 = restrict_to_plane(pair.A1, 0, beta, gamma).max_abs_quad()
    a2 = restrict_to_plane(pair.A2, 0, beta, gamma).max_abs_quad()
    return max(a1, a2)


def eta_estimate(
    pair: QuadraticPair,
    bound=10,
    grid=Fraction(1, 32),
    refine: bool = True,
) -> EtaEstimate:
    """Sampled lower-bound constant for restrictions to planes t = a+br+cs.

    Minimizes, over plane slopes (beta, gamma) in [-bound, bound]^2, the
    larger of the two maximal absolute quadratic coefficients of Q1 and Q2
    restricted to the plane.  The quadratic coefficients do not depend on
    the plane offset alpha, so the scan is two-dimensional and the reported
    argmin fixes alpha = 0.  A dyadic pattern search around the best grid
    point refines the value; the result is the minimum of every evaluation
    performed, so refining the grid or enlarging the box never increases it.
    """
    bound = frac(bound)
    grid = frac(grid)
    if bound <= 0 or grid <= 0:
        raise ValueError("bound and grid step must be positive")
    c1 = [float(x) for x in pair.A1.quadratic_coeffs()]
    c2 = [float(x) for x in pair.A2.quadratic_coeffs()]
    steps = int(bound / grid)
    axis = np.arange(-steps, steps + 1, dtype=float) * float(grid)
    bb, gg = np.meshgrid(axis, axis, indexing="ij")

    def objective_grid(c):
        A, B, C, D, E, F = c
        a = A + C * bb * bb + E * bb
        b = B + C * gg * gg + F * gg
        cc = D + 2 * C * bb * gg + E * gg + F * bb
        return np.maximum(np.abs(a), np.maximum(np.abs(b), np.abs(cc)))

    f = np.maximum(objective_grid(c1), objective_grid(c2))
    flat = int(np.argmin(f))
    i0, j0 = divmod(flat, f.shape[1])
    best_beta = (-steps + i0) * grid
    best_gamma = (-steps + j0) * grid
    best_val = float(f[i0, j0])
    evaluations = f.size

    if refine:
        step = grid / 2
        cur_b, cur_g, cur_v = best_beta, best_gamma, Fraction(0)
        cur_v = _restricted_max_coeff(pair, cur_b, cur_g)
        for _ in range(6):
            moved = True
            while moved:
                moved = False
                for db, dg in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
                    nb = min(max(cur_b + db * step, -bound), bound)
                    ng = min(max(cur_g + dg * step, -bound), bound)
                    val = _restricted_max_coeff(pair, nb, ng)
                    evaluations += 1
                    if val < cur_v:
                        cur_b, cur_g, cur_v = nb, ng, val
                        moved = True
            step /= 2
        if float(cur_v) < best_val:
            best_val = float(cur_v)
            best_beta, best_gamma = cur_b, cur_g

    return EtaEstimate(
        value=best_val,
        argmin=(Fraction(0), best_beta, best_gamma),
        bound=bound,
        grid=grid,
        refined=refine,
        evaluations=evaluations,
    )


# ---------------------------------------------------------------------------
# Full report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationReport:
    nondegeneracy: NondegeneracyVerdict
    simdiag: SimDiagResult
    minor_taxonomy: Optional[TaxonomyVerdict]
    normal_form: Optional[NormalForm]
    eta: Optional[EtaEstimate]

    def to_dict(self) -> dict:
        return {
            "nondegeneracy": self.nondegeneracy.to_dict(),
            "simdiag": self.simdiag.to_dict(),
            "minor_taxonomy": None if self.minor_taxonomy is None else self.minor_taxonomy.to_dict(),
            "normal_form": None if self.normal_form is None else self.normal_form.to_dict(),
            "eta": None if self.eta is None else self.eta.to_dict(),
        }


def classify_pair(
    pair: QuadraticPair,
    eta_bound=10,
    eta_grid=Fraction(1, 32),
    with_eta: bool = True,
) -> ClassificationReport:
    """Run every decision procedure on a pair and bundle the verdicts."""
    nd = nondegeneracy_check(pair)
    sd = simultaneous_diagonalize(pair)
    tax = minor_taxonomy(sd.Lam) if sd.present else None
    nf = None
    if tax is not None and tax.verdict == ALL_MINORS_NONZERO:
        nf = normal_form(pair)
    eta = None
    if with_eta and nd.nondegenerate:
        eta = eta_estimate(pair, bound=eta_bound, grid=eta_grid)
    return ClassificationReport(nd, sd, tax, nf, eta)
