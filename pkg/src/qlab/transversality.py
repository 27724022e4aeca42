"""Tangent frames, transversality estimates, bad-set varieties, and the
quadric-cluster detector.

The surface (r,s,t) -> (r,s,t,Q1,Q2) has tangent space at each point spanned
by
    n1 = (1,0,0, dQ1/dr, dQ2/dr),
    n2 = (0,1,0, dQ1/ds, dQ2/ds),
    n3 = (0,0,1, dQ1/dt, dQ2/dt).
For a linear subspace V of R^5 and a point xi, the k x 3 matrix M_V(xi) has
rows (x . n1, x . n2, x . n3) over basis vectors x of V.  Transversality of a
collection of cubes is probed through the l^1 sum of the maximal square
minors of this matrix, minimized over cubes and candidate subspaces.

Everything numerical here is seed-deterministic: random subspaces come from
named SeedSequence spawn keys, reductions are plain numpy elementwise ops,
and matrix products feeding reported values go through einsum without BLAS
dispatch.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .exact import frac, nullspace, rank, solve
from .qform import QuadraticPair, SymMatrix3, lin_product

__all__ = [
    "EmptyCollection",
    "DegeneratePair",
    "TangentFrame",
    "SubspaceSample",
    "CubeCollection",
    "NuEstimate",
    "Quad3",
    "tangent_frame",
    "minor_det",
    "set_infimum",
    "order_statistic",
    "nu_estimate",
    "canonical_subspaces",
    "gaussian_subspace",
    "bad_set_polynomials",
    "quadric_cluster_detect",
    "DetectReport",
    "load_cubes",
    "loads_cubes",
]

# Monomial basis for degree-<=2 polynomials on R^3, used by the bad-set
# varieties and the cluster detector alike.
QUAD_MONOMIALS = ("1", "r", "s", "t", "r^2", "s^2", "t^2", "rs", "rt", "st")


class EmptyCollection(ValueError):
    """A cube collection with no cubes was passed where one is needed."""


class DegeneratePair(ValueError):
    """Every candidate bad-set polynomial vanished identically."""


# ---------------------------------------------------------------------------
# Degree-<=2 polynomials in (r, s, t)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quad3:
    """Polynomial of degree <= 2 in (r,s,t); coeffs in QUAD_MONOMIALS order."""

    coeffs: tuple

    @classmethod
    def from_coeffs(cls, coeffs) -> "Quad3":
        c = tuple(frac(x) for x in coeffs)
        if len(c) != 10:
            raise ValueError("expected 10 coefficients")
        return cls(c)

    @classmethod
    def constant(cls, c) -> "Quad3":
        return cls((frac(c),) + (Fraction(0),) * 9)

    @classmethod
    def affine(cls, const, cr, cs, ct) -> "Quad3":
        return cls(
            (frac(const), frac(cr), frac(cs), frac(ct)) + (Fraction(0),) * 6
        )

    def degree(self) -> int:
        if any(x != 0 for x in self.coeffs[4:]):
            return 2
        if any(x != 0 for x in self.coeffs[1:4]):
            return 1
        return 0 if self.coeffs[0] != 0 else -1  # -1 marks the zero polynomial

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.coeffs)

    def evaluate(self, point) -> Fraction:
        r, s, t = (frac(x) for x in point)
        c = self.coeffs
        return (
            c[0] + c[1] * r + c[2] * s + c[3] * t
            + c[4] * r * r + c[5] * s * s + c[6] * t * t
            + c[7] * r * s + c[8] * r * t + c[9] * s * t
        )

    def add(self, other: "Quad3") -> "Quad3":
        return Quad3(tuple(x + y for x, y in zip(self.coeffs, other.coeffs)))

    def sub(self, other: "Quad3") -> "Quad3":
        return Quad3(tuple(x - y for x, y in zip(self.coeffs, other.coeffs)))

    def scale(self, c) -> "Quad3":
        c = frac(c)
        return Quad3(tuple(c * x for x in self.coeffs))

    def mul(self, other: "Quad3") -> "Quad3":
        """Product, defined only when the result stays within degree 2."""
        da, db = max(self.degree(), 0), max(other.degree(), 0)
        if da + db > 2:
            raise ValueError("product would exceed degree 2")
        a, b = self.coeffs, other.coeffs
        out = [Fraction(0)] * 10
        # index -> exponent triple
        expo = [
            (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
            (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1),
        ]
        lookup = {e: i for i, e in enumerate(expo)}
        for i, ca in enumerate(a):
            if ca == 0:
                continue
            for j, cb in enumerate(b):
                if cb == 0:
                    continue
                e = tuple(x + y for x, y in zip(expo[i], expo[j]))
                out[lookup[e]] += ca * cb
        return Quad3(tuple(out))


def _monomial_row(point):
    r, s, t = (float(x) for x in point)
    return (1.0, r, s, t, r * r, s * s, t * t, r * s, r * t, s * t)


# ---------------------------------------------------------------------------
# Tangent frames and subspaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TangentFrame:
    point: tuple
    n1: tuple
    n2: tuple
    n3: tuple


def tangent_frame(pair: QuadraticPair, point) -> TangentFrame:
    """The three tangent vectors of the surface at a point, exact."""
    p = tuple(frac(x) for x in point)
    g1 = pair.A1.gradient_at(p)
    g2 = pair.A2.gradient_at(p)
    one, zero = Fraction(1), Fraction(0)
    return TangentFrame(
        point=p,
        n1=(one, zero, zero, g1[0], g2[0]),
        n2=(zero, one, zero, g1[1], g2[1]),
        n3=(zero, zero, one, g1[2], g2[2]),
    )


@dataclass(frozen=True)
class SubspaceSample:
    """A subspace of R^5 given by an orthonormal (floating) basis."""

    dim: int
    basis: tuple  # dim rows of 5 floats

    def __post_init__(self):
        if self.dim not in (1, 2, 4):
            raise ValueError("dim must be 1, 2 or 4")
        b = np.array(self.basis, dtype=float)
        if b.shape != (self.dim, 5):
            raise ValueError("basis must have shape (dim, 5)")
        gram = b @ b.T
        if float(np.max(np.abs(gram - np.eye(self.dim)))) > 1e-12:
            raise ValueError("basis is not orthonormal")

    @classmethod
    def from_vectors(cls, vectors) -> "SubspaceSample":
        b = np.array([[float(x) for x in v] for v in vectors], dtype=float)
        return cls(b.shape[0], tuple(tuple(row) for row in b))

    def array(self) -> np.ndarray:
        return np.array(self.basis, dtype=float)


def canonical_subspaces(dim: int) -> list[SubspaceSample]:
    """Coordinate subspaces of the given dimension, a fixed candidate pool."""
    eye = np.eye(5)
    if dim == 1:
        index_sets = [(i,) for i in range(5)]
    elif dim == 2:
        index_sets = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    elif dim == 4:
        index_sets = [tuple(j for j in range(5) if j != i) for i in range(5)]
    else:
        raise ValueError("dim must be 1, 2 or 4")
    return [
        SubspaceSample(dim, tuple(tuple(eye[i]) for i in idx)) for idx in index_sets
    ]


def gaussian_subspace(dim: int, seed, index: int, extra: tuple = ()) -> SubspaceSample:
    """Uniform random subspace via an orthonormalized Gaussian frame.

    The stream is derived from (seed, dim, index[, extra]), so candidate i
    is the same no matter how many candidates are drawn — estimates only
    improve as the sample count grows.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(dim, index) + extra)
    rng = np.random.default_rng(ss)
    g = rng.standard_normal((5, dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r))  # canonical sign choice
    return SubspaceSample(dim, tuple(tuple(col) for col in q.T))


# ---------------------------------------------------------------------------
# Minor determinant and infima over cubes
# ---------------------------------------------------------------------------


def _projection_data(basis: np.ndarray, pair: QuadraticPair):
    """Constants and linear parts of the rows of M_V.

    Row i of M_V at xi is  basis[i,:3] + C_i @ xi  with
    C_i = 2*(basis[i,3]*A1 + basis[i,4]*A2).
    Returns (const: (k,3), lin: (k,3,3)).
    """
    a1 = np.array([[float(x) for x in row] for row in pair.A1.rows()])
    a2 = np.array([[float(x) for x in row] for row in pair.A2.rows()])
    const = basis[:, :3].copy()
    lin = 2.0 * (
        basis[:, 3][:, None, None] * a1[None, :, :]
        + basis[:, 4][:, None, None] * a2[None, :, :]
    )
    return const, lin


def _minor_values(const, lin, points: np.ndarray) -> np.ndarray:
    """l^1 maximal-minor values of M_V at each point; points is (p, 3)."""
    k = const.shape[0]
    # entries: (p, k, 3)
    entries = const[None, :, :] + np.einsum(
        "kij,pj->pki", lin, points, optimize=False
    )
    if k == 1:
        return np.abs(entries[:, 0, :]).sum(axis=1)
    if k == 2:
        a, b = entries[:, 0, :], entries[:, 1, :]
        m01 = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        m02 = a[:, 0] * b[:, 2] - a[:, 2] * b[:, 0]
        m12 = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
        return np.abs(m01) + np.abs(m02) + np.abs(m12)
    if k == 4:
        total = np.zeros(len(points))
        for rows in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            a = entries[:, rows[0], :]
            b = entries[:, rows[1], :]
            c = entries[:, rows[2], :]
            det = (
                a[:, 0] * (b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1])
                - a[:, 1] * (b[:, 0] * c[:, 2] - b[:, 2] * c[:, 0])
                + a[:, 2] * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
            )
            total += np.abs(det)
        return total
    raise ValueError("subspace dimension must be 1, 2 or 4")


def minor_det(V: SubspaceSample, point, pair: QuadraticPair) -> float:
    """l^1 sum of the maximal square minors of M_V at one point."""
    const, lin = _projection_data(V.array(), pair)
    pts = np.array([[float(x) for x in point]])
    return float(_minor_values(const, lin, pts)[0])


GRID_POINTS = 9
DESCENT_ROUNDS = 3


def _cube_grid() -> np.ndarray:
    """All GRID_POINTS^3 sample offsets within the unit cube, shape (g,3)."""
    axis = np.linspace(0.0, 1.0, GRID_POINTS)
    rr, ss, tt = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([rr.ravel(), ss.ravel(), tt.ravel()])


_UNIT_GRID = _cube_grid()


def _set_infima(V: SubspaceSample, collection: "CubeCollection", pair) -> np.ndarray:
    """Estimated inf of minor_det over each cube; vectorized over cubes."""
    const, lin = _projection_data(V.array(), pair)
    K = collection.scale
    side = 1.0 / K
    corners = np.array(collection.corners, dtype=float) * side  # (m, 3)
    m = len(corners)
    g = len(_UNIT_GRID)
    pts = (corners[:, None, :] + side * _UNIT_GRID[None, :, :]).reshape(-1, 3)
    vals = _minor_values(const, lin, pts).reshape(m, g)
    best = vals.min(axis=1)
    arg = vals.argmin(axis=1)
    cur = corners + side * _UNIT_GRID[arg]  # (m, 3) current best points
    step = side / 16.0
    lo, hi = corners, corners + side
    for _ in range(DESCENT_ROUNDS):
        for axis in range(3):
            for sign in (1.0, -1.0):
                cand = cur.copy()
                cand[:, axis] = np.clip(cand[:, axis] + sign * step, lo[:, axis], hi[:, axis])
                v = _minor_values(const, lin, cand)
                improved = v < best
                best = np.where(improved, v, best)
                cur = np.where(improved[:, None], cand, cur)
    return best


def set_infimum(V: SubspaceSample, cube, pair: QuadraticPair, scale: Optional[int] = None) -> float:
    """Estimated infimum of minor_det over a single cube.

    `cube` is a lower-corner integer triple at the given scale, or a
    (corner, scale) pair when scale is None and cube has two elements.
    """
    if scale is None:
        corner, scale = cube
    else:
        corner = cube
    coll = CubeCollection(scale=scale, corners=[tuple(int(x) for x in corner)])
    return float(_set_infima(V, coll, pair)[0])


# ---------------------------------------------------------------------------
# Cube collections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubeCollection:
    """Axis-aligned cubes of side 1/scale inside the unit cube.

    Corners are integer triples in units of 1/scale.
    """

    scale: int
    corners: tuple
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("scale must be a positive integer")
        corners = tuple(tuple(int(x) for x in c) for c in self.corners)
        for c in corners:
            if len(c) != 3:
                raise ValueError("corners must be integer triples")
            if any(x < 0 or x >= self.scale for x in c):
                raise ValueError(f"cube at {c} is not inside the unit cube")
        object.__setattr__(self, "corners", corners)

    def __len__(self) -> int:
        return len(self.corners)

    def centers_exact(self) -> list[tuple[Fraction, Fraction, Fraction]]:
        K = self.scale
        return [
            tuple((Fraction(x) + Fraction(1, 2)) / K for x in c) for c in self.corners
        ]

    def is_dyadic(self) -> bool:
        return self.scale & (self.scale - 1) == 0


def loads_cubes(text: str) -> CubeCollection:
    doc = json.loads(text)
    if not isinstance(doc, dict) or "scale" not in doc or "corners" not in doc:
        raise ValueError('cube file must be an object with "scale" and "corners"')
    return CubeCollection(scale=int(doc["scale"]), corners=tuple(map(tuple, doc["corners"])))


def load_cubes(path) -> CubeCollection:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_cubes(fh.read())


# ---------------------------------------------------------------------------
# nu estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NuEstimate:
    value: float
    breakdown: dict  # dim -> best value for that dimension
    witness_dim: int
    witness_basis: tuple
    witness_indices: tuple  # cube indices realizing the order statistic
    q: int
    m: int
    samples: dict  # dim -> number of random candidates examined

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "breakdown": {str(k): v for k, v in self.breakdown.items()},
            "witness_dim": self.witness_dim,
            "witness_basis": [list(map(float, row)) for row in self.witness_basis],
            "witness_indices": list(self.witness_indices),
            "q": self.q,
            "m": self.m,
            "samples": {str(k): v for k, v in self.samples.items()},
        }


def order_statistic(values: np.ndarray, q: int) -> float:
    """The q-th smallest value (q >= 1).

    For per-cube infima d_i this equals the minimum over all q-element cube
    subsets of the subset maximum: the binding subset is the q smallest
    infima.  Transversality asks every q-subset to contain a cube with
    infimum >= nu, so this is the exact best certificate for a fixed V.
    """
    if not 1 <= q <= len(values):
        raise ValueError("q out of range")
    return float(np.partition(np.asarray(values, dtype=float), q - 1)[q - 1])


REFINE_TRIGGER = 1.05
REFINE_STEPS = ((0.05, 8), (0.01, 8))


def _nu_of_subspace(V, collection, pair, q):
    d = _set_infima(V, collection, pair)
    val = order_statistic(d, q)
    idx = np.argsort(d, kind="stable")[:q]
    return val, tuple(int(i) for i in idx), d


def _refine_subspace(V, collection, pair, q, seed, dim, index):
    """Local descent in subspace space around a promising candidate."""
    best_val, best_idx, _ = _nu_of_subspace(V, collection, pair, q)
    best_V = V
    ss = np.random.SeedSequence(seed, spawn_key=(dim, index, 1))
    rng = np.random.default_rng(ss)
    for eps, tries in REFINE_STEPS:
        base = best_V.array()
        for _ in range(tries):
            g = base + eps * rng.standard_normal(base.shape)
            qmat, rmat = np.linalg.qr(g.T)
            qmat = qmat * np.sign(np.diagonal(rmat))
            cand = SubspaceSample(V.dim, tuple(tuple(col) for col in qmat.T))
            val, idx, _ = _nu_of_subspace(cand, collection, pair, q)
            if val < best_val:
                best_val, best_idx, best_V = val, idx, cand
    return best_val, best_idx, best_V


def nu_estimate(
    collection: CubeCollection,
    pair: QuadraticPair,
    samples: int = 4096,
    seed: int = 0,
    dims: Sequence[int] = (1, 2, 4),
) -> NuEstimate:
    """Sampled upper bound for the transversality constant of a collection.

    For each candidate subspace V the per-cube infima d_i are summarized by
    their q-th smallest value with q = max(1, m // 100); the estimate is the
    minimum over all candidates.  Candidates are the coordinate subspaces of
    each requested dimension plus `samples` seeded Gaussian frames; a
    candidate landing within 5% of the running best gets a local refinement
    pass.  Because candidate i never depends on how many candidates follow
    it, growing `samples` can only lower the estimate.
    """
    m = len(collection)
    if m == 0:
        raise EmptyCollection("the cube collection is empty")
    if m < 10**4:
        warnings.warn(
            f"collection has {m} cubes; the transversality definition assumes "
            "at least 10^4",
            stacklevel=2,
        )
    q = max(1, m // 100)
    best = math.inf
    best_dim = None
    best_basis = None
    best_idx = ()
    breakdown = {}
    sample_counts = {}
    for dim in dims:
        if dim not in (1, 2, 4):
            raise ValueError("dims must be a subset of {1, 2, 4}")
        dim_best = math.inf
        candidates = [(V, None) for V in canonical_subspaces(dim)]
        candidates += [
            (gaussian_subspace(dim, seed, i), i) for i in range(samples)
        ]
        sample_counts[dim] = samples
        for V, index in candidates:
            val, idx, _ = _nu_of_subspace(V, collection, pair, q)
            refine = val <= REFINE_TRIGGER * min(best, dim_best)
            if refine and index is not None:
                val2, idx2, V2 = _refine_subspace(
                    V, collection, pair, q, seed, dim, index
                )
                if val2 < val:
                    val, idx, V = val2, idx2, V2
            if val < dim_best:
                dim_best = val
            if val < best:
                best, best_dim, best_basis, best_idx = val, dim, V.basis, idx
        breakdown[dim] = dim_best
    return NuEstimate(
        value=best,
        breakdown=breakdown,
        witness_dim=best_dim,
        witness_basis=best_basis,
        witness_indices=best_idx,
        q=q,
        m=m,
        samples=sample_counts,
    )


# ---------------------------------------------------------------------------
# Bad-set polynomials (2-varieties containing the rank-deficiency locus)
# ---------------------------------------------------------------------------


def _exact_rows(vectors) -> list[list[Fraction]]:
    rows = [[frac(x) for x in v] for v in vectors]
    if any(len(r) != 5 for r in rows):
        raise ValueError("basis vectors must have 5 coordinates")
    return rows


def _phi_row(x, pair: QuadraticPair) -> tuple[Quad3, Quad3, Quad3]:
    """The projected image of a vector as three affine polynomials in xi.

    Coordinate j of the row is x_j + x_4 dQ1/dj(xi) + x_5 dQ2/dj(xi).
    """
    g1 = pair.A1.gradient_forms()
    g2 = pair.A2.gradient_forms()
    out = []
    for j in range(3):
        lin = [x[3] * g1[j][i] + x[4] * g2[j][i] for i in range(3)]
        out.append(Quad3.affine(x[j], lin[0], lin[1], lin[2]))
    return tuple(out)


def _det3_quad(rows) -> Quad3:
    a, b, c = rows
    m0 = b[1].mul(c[2]).sub(b[2].mul(c[1]))
    m1 = b[0].mul(c[2]).sub(b[2].mul(c[0]))
    m2 = b[0].mul(c[1]).sub(b[1].mul(c[0]))
    return a[0].mul(m0).sub(a[1].mul(m1)).add(a[2].mul(m2))


def bad_set_polynomials(vectors, pair: QuadraticPair) -> list[Quad3]:
    """Degree-<=2 polynomials cutting out where the projected V degenerates.

    `vectors` is an exact rational basis of a subspace V of dimension 1, 2
    or 4.  The returned nonzero polynomials have a common zero set
    containing every xi where the projection of V to the first three
    coordinates along the tangent frame drops below full expected rank
    (min(dim V, 3)).  When the bad set is provably empty the constant 1 is
    returned as a marker.  DegeneratePair is raised when every candidate
    vanishes identically, which cannot happen for nondegenerate pairs.
    """
    basis = _exact_rows(vectors)
    dim = len(basis)
    if rank(basis) != dim:
        raise ValueError("basis vectors are linearly dependent")
    if dim not in (1, 2, 4):
        raise ValueError("dim must be 1, 2 or 4")

    if dim == 1:
        entries = _phi_row(basis[0], pair)
        if all(e.is_zero() for e in entries):
            raise DegeneratePair(
                "the projected image of V vanishes identically; the pair "
                "fails the nondegeneracy hypothesis"
            )
        if any(e.degree() == 0 for e in entries):
            return [Quad3.constant(1)]  # some entry is a nonzero constant
        return [e for e in entries if not e.is_zero()]

    if dim == 2:
        row1 = _phi_row(basis[0], pair)
        row2 = _phi_row(basis[1], pair)
        minors = [
            row1[i].mul(row2[j]).sub(row1[j].mul(row2[i]))
            for i, j in ((0, 1), (0, 2), (1, 2))
        ]
        if all(p.is_zero() for p in minors):
            raise DegeneratePair(
                "all 2x2 minors of the projected frame vanish identically"
            )
        if any(p.degree() == 0 for p in minors):
            return [Quad3.constant(1)]
        return [p for p in minors if not p.is_zero()]

    # dim == 4: split V along the last-two-coordinate projection
    tail = [row[3:] for row in basis]  # 4 rows of (x4, x5)
    d2 = rank(tail)
    if d2 <= 1:
        # V meets {x4 = x5 = 0} in dimension >= 3, and that part projects
        # to a full-rank constant frame: the bad set is empty.
        return [Quad3.constant(1)]
    # d2 == 2: V intersect {x4 = x5 = 0} has dimension exactly 2.
    tail_map = [[tail[i][j] for i in range(4)] for j in range(2)]  # 2 x 4
    combos = nullspace(tail_map)
    assert len(combos) == 2
    horiz = []
    for c in combos:
        v = [sum(c[i] * basis[i][k] for i in range(4)) for k in range(5)]
        horiz.append(v)
    lifted = []
    for target in ((1, 0), (0, 1)):
        c = solve(tail_map, list(map(Fraction, target)))
        assert c is not None
        lifted.append(
            [sum(c[i] * basis[i][k] for i in range(4)) for k in range(5)]
        )
    rows = [
        _phi_row(horiz[0], pair),
        _phi_row(horiz[1], pair),
        _phi_row(lifted[0], pair),
        _phi_row(lifted[1], pair),
    ]
    cands = [
        _det3_quad((rows[0], rows[1], rows[2])),
        _det3_quad((rows[0], rows[1], rows[3])),
        _det3_quad((rows[0], rows[2], rows[3])),
        _det3_quad((rows[1], rows[2], rows[3])),
    ]
    if all(p.is_zero() for p in cands):
        raise DegeneratePair(
            "all maximal minors of the projected frame vanish identically"
        )
    if any(p.degree() == 0 for p in cands):
        return [Quad3.constant(1)]
    return [p for p in cands if not p.is_zero()]


# ---------------------------------------------------------------------------
# Quadric cluster detection
# ---------------------------------------------------------------------------


RANSAC_ITERATIONS = 20000
SCORE_CHUNK = 512

# Gradient of a quadric is affine; its sup-norm bound over the unit cube is
# attained at a corner.  Rows of _GRAD_AT_CORNERS give d/dr, d/ds, d/dt at
# each corner as linear functionals of the 10 coefficients.
_CORNERS = [
    (x, y, z) for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)
]


def _gradient_functionals() -> np.ndarray:
    rows = []
    for (x, y, z) in _CORNERS:
        rows.append([0, 1, 0, 0, 2 * x, 0, 0, y, z, 0])  # d/dr
        rows.append([0, 0, 1, 0, 0, 2 * y, 0, x, 0, z])  # d/ds
        rows.append([0, 0, 0, 1, 0, 0, 2 * z, 0, x, y])  # d/dt
    return np.array(rows, dtype=float)


_GRAD_FUNCTIONALS = _gradient_functionals()


def _lipschitz_bounds(coeff_rows: np.ndarray) -> np.ndarray:
    """Max over cube corners of the gradient 2-norm, per coefficient row."""
    grads = np.einsum(
        "gc,kc->gk", _GRAD_FUNCTIONALS, coeff_rows, optimize=False
    ).reshape(8, 3, -1)
    norms = np.sqrt(np.einsum("cik,cik->ck", grads, grads, optimize=False))
    return norms.max(axis=0)


@dataclass(frozen=True)
class DetectReport:
    found: bool
    count: int
    total: int
    threshold: int
    margin: float
    poly: tuple  # 10 floats, l2-normalized, QUAD_MONOMIALS order
    poly_exact: Optional[tuple]  # exact coefficients when available
    method: str  # "exact_rank" or "ransac"
    iterations: int
    seed: Optional[int]

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "count": self.count,
            "total": self.total,
            "threshold": self.threshold,
            "margin": self.margin,
            "poly": list(self.poly),
            "poly_exact": (
                [str(c) for c in self.poly_exact] if self.poly_exact else None
            ),
            "method": self.method,
            "iterations": self.iterations,
            "seed": self.seed,
        }


def _band_count(values: np.ndarray, lipschitz: float, margin: float) -> int:
    return int(np.count_nonzero(np.abs(values) <= margin * lipschitz))


def quadric_cluster_detect(
    collection: CubeCollection,
    seed: int = 0,
    margin: Optional[float] = None,
    threshold_fraction: Fraction = Fraction(1, 100),
    iterations: int = RANSAC_ITERATIONS,
) -> DetectReport:
    """Search for a degree-<=2 variety whose margin-neighbourhood captures
    more than a threshold fraction of the cube centers.

    Two passes: an exact rank test of the m x 10 moment matrix of the
    centers (catching collections that lie exactly on a quadric), then a
    seeded RANSAC loop fitting quadrics through 9-center samples and
    scoring them by the number of centers within margin * L of the zero
    set, L being the gradient bound of the candidate over the unit cube.
    The default margin is 10/scale.
    """
    m = len(collection)
    if m == 0:
        raise EmptyCollection("the cube collection is empty")
    K = collection.scale
    if margin is None:
        margin = 10.0 / K
    threshold = int(threshold_fraction * m)
    centers = collection.centers_exact()

    # Exact pass: a rank-deficient moment matrix gives a quadric through
    # every center.
    moment_rows = [
        [
            Fraction(1), r, s, t,
            r * r, s * s, t * t, r * s, r * t, s * t,
        ]
        for (r, s, t) in centers
    ]
    E = np.array([[float(x) for x in row] for row in moment_rows])  # (m, 10)
    kernel = None
    if m < 10:
        kernel = nullspace(moment_rows)
    else:
        # A comfortably nonzero smallest singular value certifies full exact
        # rank, so the exact reduction only runs on near-degenerate input.
        sv = np.linalg.svd(E, compute_uv=False)
        if sv[-1] <= 1e-8 * sv[0] and rank(moment_rows) < 10:
            kernel = nullspace(moment_rows)
    if kernel:
        coeffs = kernel[0]
        vec = np.array([float(c) for c in coeffs])
        vec = vec / np.linalg.norm(vec)
        return DetectReport(
            found=m > threshold,
            count=m,
            total=m,
            threshold=threshold,
            margin=float(margin),
            poly=tuple(float(x) for x in vec),
            poly_exact=tuple(coeffs),
            method="exact_rank",
            iterations=0,
            seed=seed,
        )

    # RANSAC pass.
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    samples = rng.integers(0, m, size=(iterations, 9))
    while True:
        srt = np.sort(samples, axis=1)
        bad = (srt[:, 1:] == srt[:, :-1]).any(axis=1)
        if not bad.any():
            break
        samples[bad] = rng.integers(0, m, size=(int(bad.sum()), 9))
    best_count = -1
    best_vec = None
    for start in range(0, iterations, SCORE_CHUNK):
        sel = samples[start : start + SCORE_CHUNK]
        block = E[sel]  # (chunk, 9, 10)
        _, _, vh = np.linalg.svd(block)
        cands = vh[:, -1, :]  # (chunk, 10), unit norm
        values = np.einsum("mc,kc->mk", E, cands, optimize=False)
        lips = _lipschitz_bounds(cands)
        lips = np.maximum(lips, 1e-300)
        counts = (np.abs(values) <= margin * lips[None, :]).sum(axis=0)
        j = int(np.argmax(counts))
        if int(counts[j]) > best_count:
            best_count = int(counts[j])
            best_vec = cands[j].copy()
    return DetectReport(
        found=best_count > threshold,
        count=best_count,
        total=m,
        threshold=threshold,
        margin=float(margin),
        poly=tuple(float(x) for x in best_vec),
        poly_exact=None,
        method="ransac",
        iterations=iterations,
        seed=seed,
    )
