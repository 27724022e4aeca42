"""Numerical engine: extension-operator quadrature, lattice exponential
sums, weighted Lp norms, and decoupling-ratio experiments.

The surface extension of a density g over a region R of parameter space is
the oscillatory integral

    E_R g(x) = int_R g(r,s,t) e(r x1 + s x2 + t x3 + Q1 x4 + Q2 x5) dr ds dt

with e(z) = exp(2 pi i z).  Decoupling experiments compare the weighted
Lp norm of E_{[0,1]^3} g against the lp aggregate of the norms of E_Delta g
over the partition of [0,1]^3 into cubes of side N^{-1/2}; the observed
ratio is a lower-bound proxy for the decoupling constant.  An independent
probe evaluates the lattice exponential sums of the same phases over
(N+1)^3 integer points and their Lp averages over the natural torus box.

Determinism: every random quantity is drawn from numpy Generators keyed by
named SeedSequence spawn keys; reductions use einsum (optimize=False) and
numpy pairwise sums, never BLAS matmul, so results do not depend on thread
count.  Estimates are reproducible bit-for-bit from (seed, config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import betainc, beta as beta_fn

from .exact import frac
from .qform import QuadraticPair, pair_hash

__all__ = [
    "StepTooCoarse",
    "WrongTaxonomy",
    "EmptyCluster",
    "InsufficientData",
    "WeightBall",
    "DensitySpec",
    "ExperimentRecord",
    "ScalingFit",
    "ONE",
    "RANDOM_UNIT_MODULUS",
    "SINGLE_DELTA",
    "PLANE_CLUSTER",
    "PRODUCT",
    "extension_eval",
    "extension_evaluator",
    "weighted_lp_norm",
    "weight_integral",
    "lattice_exp_sum",
    "exp_sum_lp_average",
    "main_arc_epsilon",
    "decoupling_ratio",
    "plane_cluster_ratio",
    "degenerate_product_bound",
    "fit_scaling",
    "critical_exponent_crossover",
    "plane_cluster_blocks",
]


class StepTooCoarse(ValueError):
    """Quadrature step violates the quarter-cycle phase bound."""


class WrongTaxonomy(ValueError):
    """The pair is not of a degenerate product type."""


class EmptyCluster(ValueError):
    """No partition cube meets the given plane."""


class InsufficientData(ValueError):
    """Fewer than three distinct N values to fit a power law."""


N_BATCHES = 25  # batch-means blocks for every stochastic standard error
SAMPLE_CHUNK = 2048
TRUNCATION_RADII = 8  # proposal truncated at 8 * scale


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightBall:
    """Polynomially decaying weight (1 + |x - center| / radius)^(-exponent)."""

    radius: float
    center: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    exponent: int = 100

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.exponent <= 5:
            raise ValueError("exponent must exceed the dimension 5")
        if len(self.center) != 5:
            raise ValueError("center must have 5 coordinates")

    def weight(self, X: np.ndarray) -> np.ndarray:
        d = X - np.asarray(self.center, dtype=float)
        rho = np.sqrt(np.einsum("mc,mc->m", d, d, optimize=False))
        return (1.0 + rho / self.radius) ** (-self.exponent)


ONE = "ONE"
RANDOM_UNIT_MODULUS = "RANDOM_UNIT_MODULUS"
SINGLE_DELTA = "SINGLE_DELTA"
PLANE_CLUSTER = "PLANE_CLUSTER"
PRODUCT = "PRODUCT"

_KINDS = (ONE, RANDOM_UNIT_MODULUS, SINGLE_DELTA, PLANE_CLUSTER, PRODUCT)


def plane_cluster_blocks(plane, blocks: int) -> np.ndarray:
    """Boolean (b,b,b) mask of the side-1/b cubes meeting t = a + b r + c s.

    Exact rational corner test: the affine function alpha + beta r +
    gamma s attains its extremes over a cube face at corners, so the cube
    meets the plane iff [min, max] over the face overlaps the cube's
    t-range.
    """
    alpha, beta, gamma = (frac(x) for x in plane)
    b = blocks
    mask = np.zeros((b, b, b), dtype=bool)
    for i in range(b):
        for j in range(b):
            corners = [
                alpha + beta * Fraction(i + di, b) + gamma * Fraction(j + dj, b)
                for di in (0, 1)
                for dj in (0, 1)
            ]
            lo, hi = min(corners), max(corners)
            for k in range(b):
                if hi >= Fraction(k, b) and lo <= Fraction(k + 1, b):
                    mask[i, j, k] = True
    return mask


@dataclass(frozen=True)
class DensitySpec:
    """Piecewise-constant density on the partition into side-1/b cubes.

    kind ONE: g = 1 everywhere.
    kind RANDOM_UNIT_MODULUS: independent unit-modulus phases per cube.
    kind SINGLE_DELTA: indicator of the cube `delta_index`.
    kind PLANE_CLUSTER: indicator of the cubes meeting the plane
        t = alpha + beta r + gamma s (exact corner test).
    kind PRODUCT: outer product of per-axis factors; each factor is "one",
        "random:<seed>", or "delta:<index>".
    """

    kind: str
    seed: int = 0
    delta_index: Optional[tuple] = None
    plane: Optional[tuple] = None
    factors: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if self.kind == SINGLE_DELTA and self.delta_index is None:
            raise ValueError("SINGLE_DELTA needs delta_index")
        if self.kind == PLANE_CLUSTER and self.plane is None:
            raise ValueError("PLANE_CLUSTER needs a plane")
        if self.kind == PRODUCT and (
            self.factors is None or len(self.factors) != 3
        ):
            raise ValueError("PRODUCT needs three per-axis factors")

    def _axis_factor(self, token: str, blocks: int, axis: int) -> np.ndarray:
        if token == "one":
            return np.ones(blocks, dtype=complex)
        if token.startswith("random:"):
            rng = np.random.default_rng(
                np.random.SeedSequence(int(token.split(":")[1]), spawn_key=(axis,))
            )
            return np.exp(2j * np.pi * rng.uniform(0.0, 1.0, blocks))
        if token.startswith("delta:"):
            v = np.zeros(blocks, dtype=complex)
            v[int(token.split(":")[1])] = 1.0
            return v
        raise ValueError(f"unknown product factor {token!r}")

    def realize(self, blocks: int) -> np.ndarray:
        """Complex (b,b,b) array of per-cube constant values, |g| <= 1."""
        b = blocks
        if self.kind == ONE:
            return np.ones((b, b, b), dtype=complex)
        if self.kind == RANDOM_UNIT_MODULUS:
            rng = np.random.default_rng(np.random.SeedSequence(self.seed))
            return np.exp(2j * np.pi * rng.uniform(0.0, 1.0, (b, b, b)))
        if self.kind == SINGLE_DELTA:
            g = np.zeros((b, b, b), dtype=complex)
            g[tuple(int(i) for i in self.delta_index)] = 1.0
            return g
        if self.kind == PLANE_CLUSTER:
            mask = plane_cluster_blocks(self.plane, b)
            if not mask.any():
                raise EmptyCluster("the plane misses the unit cube")
            return mask.astype(complex)
        factors = [
            self._axis_factor(tok, b, axis) for axis, tok in enumerate(self.factors)
        ]
        return np.einsum("i,j,k->ijk", *factors, optimize=False)

    def describe(self) -> str:
        if self.kind == SINGLE_DELTA:
            return f"delta{tuple(self.delta_index)}"
        if self.kind == PLANE_CLUSTER:
            return "plane:" + ",".join(str(x) for x in self.plane)
        if self.kind == PRODUCT:
            return "product:" + "*".join(self.factors)
        if self.kind == RANDOM_UNIT_MODULUS:
            return f"random(seed={self.seed})"
        return "one"


@dataclass(frozen=True)
class ExperimentRecord:
    pair_hash: str
    N: int
    p: float
    lhs: float
    rhs: float
    ratio: float
    stderr: float
    mc: int
    h: float
    C: int
    seed: int
    density: str = ""

    def csv_row(self) -> list:
        return [
            self.pair_hash, self.N, repr(self.p), repr(self.lhs),
            repr(self.rhs), repr(self.ratio), repr(self.stderr),
            self.mc, repr(self.h), self.C, self.seed,
        ]


CSV_HEADER = [
    "pair_hash", "N", "p", "lhs", "rhs", "ratio", "stderr", "mc", "h", "C",
    "seed",
]


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    ci_halfwidth: float
    n_points: int


# ---------------------------------------------------------------------------
# Phase helpers
# ---------------------------------------------------------------------------


def _float_rows(sym) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in sym.rows()])


def _surface_features(pair: QuadraticPair, pts: np.ndarray) -> np.ndarray:
    """(m, 5) array of (r, s, t, Q1, Q2) for points pts of shape (m, 3)."""
    a1 = _float_rows(pair.A1)
    a2 = _float_rows(pair.A2)
    q1 = np.einsum("mi,ij,mj->m", pts, a1, pts, optimize=False)
    q2 = np.einsum("mi,ij,mj->m", pts, a2, pts, optimize=False)
    return np.column_stack([pts, q1, q2])


def _diagonal_entries(pair: QuadraticPair):
    """Per-axis quadratic coefficients when both matrices are diagonal."""
    for sym in (pair.A1, pair.A2):
        if sym.a12 != 0 or sym.a13 != 0 or sym.a23 != 0:
            return None
    return (
        (float(pair.A1.a11), float(pair.A1.a22), float(pair.A1.a33)),
        (float(pair.A2.a11), float(pair.A2.a22), float(pair.A2.a33)),
    )


def _gradient_bound(pair: QuadraticPair, region) -> float:
    """Max over region corners of |grad Q1|_1 + |grad Q2|_1.

    Gradients of quadratics are affine, so the max over a box is attained
    at a corner.
    """
    a1 = _float_rows(pair.A1)
    a2 = _float_rows(pair.A2)
    best = 0.0
    for cr in region[0]:
        for cs in region[1]:
            for ct in region[2]:
                v = np.array([float(cr), float(cs), float(ct)])
                g = np.abs(2 * a1 @ v).sum() + np.abs(2 * a2 @ v).sum()
                best = max(best, float(g))
    return best


# ---------------------------------------------------------------------------
# Extension-operator quadrature
# ---------------------------------------------------------------------------


def extension_eval(
    pair: QuadraticPair,
    g: Optional[Callable],
    region,
    x,
    h: float,
    auto_refine: bool = False,
):
    """Midpoint-rule value of E_R g(x).

    `region` is ((r0,r1),(s0,s1),(t0,t1)); `g` is None (meaning 1) or a
    vectorized callable g(pts) on (m,3) arrays.  The step must satisfy
    h <= 1 / (4 max|x_i| (1 + G)) with G the gradient bound of (Q1, Q2)
    over the region, so each cell sees less than a quarter phase cycle;
    StepTooCoarse otherwise (auto_refine halves h until compliant).
    """
    x = np.asarray([float(v) for v in x], dtype=float)
    if len(x) != 5:
        raise ValueError("x must have 5 coordinates")
    region = tuple((float(a), float(b)) for a, b in region)
    xm = float(np.max(np.abs(x)))
    if xm > 0:
        g_bound = _gradient_bound(pair, region)
        h_max = 1.0 / (4.0 * xm * (1.0 + g_bound))
        if h > h_max:
            if not auto_refine:
                raise StepTooCoarse(
                    f"step {h} exceeds the phase-variation bound {h_max}"
                )
            while h > h_max:
                h = h / 2.0
    axes = []
    for lo, hi in region:
        n = max(1, round((hi - lo) / h))
        step = (hi - lo) / n
        axes.append((lo + (np.arange(n) + 0.5) * step, step))
    (rv, hr), (sv, hs), (tv, ht) = axes
    cell = hr * hs * ht
    total = 0.0 + 0.0j
    # slice over r to bound memory; pairwise numpy sums inside
    ss, tt = np.meshgrid(sv, tv, indexing="ij")
    st_pts = np.column_stack([ss.ravel(), tt.ravel()])
    for r0 in rv:
        pts = np.column_stack(
            [np.full(len(st_pts), r0), st_pts[:, 0], st_pts[:, 1]]
        )
        feats = _surface_features(pair, pts)
        phases = np.einsum("mc,c->m", feats, x, optimize=False)
        vals = np.exp(2j * np.pi * phases)
        if g is not None:
            vals = vals * g(pts)
        total += vals.sum()
    return total * cell


def density_function(spec: DensitySpec, blocks: int) -> Callable:
    """Pointwise evaluator of a piecewise-constant density."""
    gvals = spec.realize(blocks)

    def g(pts: np.ndarray) -> np.ndarray:
        idx = np.clip((pts * blocks).astype(int), 0, blocks - 1)
        return gvals[idx[:, 0], idx[:, 1], idx[:, 2]]

    return g


def extension_evaluator(
    pair: QuadraticPair, g: Optional[Callable], region, h: float
) -> Callable:
    """Vectorized x -> E_R g(x), one quadrature pass per sample batch."""
    region = tuple((float(a), float(b)) for a, b in region)
    axes = []
    for lo, hi in region:
        n = max(1, round((hi - lo) / h))
        step = (hi - lo) / n
        axes.append((lo + (np.arange(n) + 0.5) * step, step))
    (rv, hr), (sv, hs), (tv, ht) = axes
    cell = hr * hs * ht
    rr, ss, tt = np.meshgrid(rv, sv, tv, indexing="ij")
    pts = np.column_stack([rr.ravel(), ss.ravel(), tt.ravel()])
    feats = _surface_features(pair, pts)
    gv = None if g is None else g(pts)

    def evaluate(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(len(X), dtype=complex)
        for start in range(0, len(X), SAMPLE_CHUNK):
            sl = slice(start, start + SAMPLE_CHUNK)
            xb = X[sl]
            acc = np.zeros(len(xb), dtype=complex)
            for cstart in range(0, len(feats), 65536):
                csl = slice(cstart, cstart + 65536)
                phases = np.einsum(
                    "pc,mc->pm", feats[csl], xb, optimize=False
                )
                vals = np.exp(2j * np.pi * phases)
                if gv is not None:
                    vals = vals * gv[csl][:, None]
                acc += vals.sum(axis=0)
            out[sl] = acc * cell
        return out

    return evaluate


# ---------------------------------------------------------------------------
# Weighted Lp norms by importance sampling
# ---------------------------------------------------------------------------


def _radial_normalizer(scale: float, exponent: int) -> float:
    """Integral of (1 + |x|/scale)^(-exponent) over |x| <= 8*scale in R^5.

    Substituting rho = scale * v/(1-v) turns the radial integral into an
    incomplete Beta(5, exponent-5) integral; the surface area of S^4 is
    8 pi^2 / 3.
    """
    a, b = 5, exponent - 5
    frac8 = TRUNCATION_RADII / (TRUNCATION_RADII + 1.0)
    return (
        (8.0 * math.pi**2 / 3.0)
        * scale**5
        * beta_fn(a, b)
        * betainc(a, b, frac8)
    )


def weight_integral(ball: WeightBall) -> float:
    """Closed form of int w_B over the truncation ball |x-c| <= 8N."""
    return _radial_normalizer(ball.radius, ball.exponent)


def _mixture_scales(radius: float):
    return (1.0, math.sqrt(radius), radius)


def _sample_mixture(ball: WeightBall, m: int, seed) -> tuple:
    """Draw m points from the 3-scale radial mixture; return (X, q).

    Each component is the normalized radial law of (1+rho/s)^(-C)
    truncated at 8s, directions uniform on S^4.  Sampling rho uses the
    exact Beta(5, C-5) representation rho = s v/(1-v) with rejection on
    the truncation (acceptance probability ~ 1 for C = 100).  The mixture
    puts mass at scales 1, sqrt(N), N so that integrands concentrated at
    any of those scales are seen by the sampler.
    """
    C = ball.exponent
    scales = _mixture_scales(ball.radius)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    which = rng.integers(0, 3, size=m)
    v = rng.beta(5, C - 5, size=m)
    vmax = TRUNCATION_RADII / (TRUNCATION_RADII + 1.0)
    bad = v >= vmax
    while bad.any():
        v[bad] = rng.beta(5, C - 5, size=int(bad.sum()))
        bad = v >= vmax
    rho = np.array(scales)[which] * v / (1.0 - v)
    direction = rng.standard_normal((m, 5))
    direction /= np.sqrt(
        np.einsum("mc,mc->m", direction, direction, optimize=False)
    )[:, None]
    X = rho[:, None] * direction + np.asarray(ball.center, dtype=float)
    d = X - np.asarray(ball.center, dtype=float)
    rr = np.sqrt(np.einsum("mc,mc->m", d, d, optimize=False))
    q = np.zeros(m)
    for s in scales:
        inside = rr <= TRUNCATION_RADII * s
        dens = np.where(inside, (1.0 + rr / s) ** (-C), 0.0)
        q += dens / _radial_normalizer(s, C)
    q /= 3.0
    return X, q


def _batch_mean_stderr(values: np.ndarray) -> tuple:
    """(mean, stderr of the mean) by batch means over N_BATCHES blocks."""
    m = (len(values) // N_BATCHES) * N_BATCHES
    blocks = values[:m].reshape(N_BATCHES, -1).mean(axis=1)
    mean = float(values[:m].mean())
    stderr = float(blocks.std(ddof=1) / math.sqrt(N_BATCHES))
    return mean, stderr


def _round_mc(mc_samples: int) -> int:
    if mc_samples < N_BATCHES:
        return N_BATCHES
    return ((mc_samples + N_BATCHES - 1) // N_BATCHES) * N_BATCHES


def weighted_lp_norm(
    F: Callable, ball: WeightBall, p: float, mc_samples: int = 10**5, seed: int = 0
) -> tuple:
    """Importance-sampled (int |F|^p w_B)^(1/p) over |x - c| <= 8N.

    Returns (value, stderr).  mc_samples is rounded up to a multiple of
    the batch count.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    m = _round_mc(mc_samples)
    X, q = _sample_mixture(ball, m, seed)
    w = ball.weight(X)
    vals = np.abs(F(X)) ** p * (w / q)
    mean, se = _batch_mean_stderr(vals)
    if mean <= 0:
        return 0.0, 0.0
    value = mean ** (1.0 / p)
    stderr = se * (1.0 / p) * mean ** (1.0 / p - 1.0)
    return float(value), float(stderr)


# ---------------------------------------------------------------------------
# Lattice exponential sums
# ---------------------------------------------------------------------------


def lattice_exp_sum(pair: QuadraticPair, N: int, x) -> complex:
    """Sum over (i1,i2,i3) in {0..N}^3 of e(x.(i/N, Q(i/N))).

    Exact finite sum; accumulation is Kahan-compensated separately on the
    real and imaginary parts.
    """
    x = [float(v) for v in x]
    nodes = np.arange(N + 1) / N
    rr, ss, tt = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    pts = np.column_stack([rr.ravel(), ss.ravel(), tt.ravel()])
    feats = _surface_features(pair, pts)
    phases = np.einsum("pc,c->p", feats, np.array(x), optimize=False)
    vals = np.exp(2j * np.pi * phases)
    re = im = 0.0
    cre = cim = 0.0
    for z in vals:
        y = z.real - cre
        t = re + y
        cre = (t - re) - y
        re = t
        y = z.imag - cim
        t = im + y
        cim = (t - im) - y
        im = t
    return complex(re, im)


def _lattice_sums_batch(pair: QuadraticPair, N: int, X: np.ndarray) -> np.ndarray:
    """|X| lattice sums at once; separable fast path for diagonal pairs."""
    diag = _diagonal_entries(pair)
    nodes = np.arange(N + 1) / N
    m = len(X)
    if diag is not None:
        a, b = diag
        out = np.ones(m, dtype=complex)
        for axis in range(3):
            lin = np.einsum("n,m->nm", nodes, X[:, axis], optimize=False)
            quad = np.einsum(
                "n,m->nm",
                nodes**2,
                a[axis] * X[:, 3] + b[axis] * X[:, 4],
                optimize=False,
            )
            out = out * np.exp(2j * np.pi * (lin + quad)).sum(axis=0)
        return out
    rr, ss, tt = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    pts = np.column_stack([rr.ravel(), ss.ravel(), tt.ravel()])
    feats = _surface_features(pair, pts)
    out = np.empty(m, dtype=complex)
    for start in range(0, m, 256):
        xb = X[start : start + 256]
        phases = np.einsum("pc,mc->pm", feats, xb, optimize=False)
        out[start : start + 256] = np.exp(2j * np.pi * phases).sum(axis=0)
    return out


def exp_sum_lp_average(
    pair: QuadraticPair, N: int, p: float, mc_samples: int = 10**5, seed: int = 0
) -> tuple:
    """Monte Carlo Lp average of |lattice sum| over the natural torus box.

    x1..x3 are uniform on [0, N], x4, x5 uniform on [0, N^2]; the value is
    (mean |S(x)|^p)^(1/p) with a batch-means stderr (delta method).
    """
    m = _round_mc(mc_samples)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
    X = np.empty((m, 5))
    X[:, :3] = rng.uniform(0.0, N, size=(m, 3))
    X[:, 3:] = rng.uniform(0.0, N * N, size=(m, 2))
    vals = np.empty(m)
    for start in range(0, m, SAMPLE_CHUNK):
        xb = X[start : start + SAMPLE_CHUNK]
        vals[start : start + SAMPLE_CHUNK] = np.abs(
            _lattice_sums_batch(pair, N, xb)
        )
    powered = vals**p
    mean, se = _batch_mean_stderr(powered)
    value = mean ** (1.0 / p)
    stderr = se * (1.0 / p) * mean ** (1.0 / p - 1.0) if mean > 0 else 0.0
    return float(value), float(stderr)


def main_arc_epsilon(pair: QuadraticPair) -> Fraction:
    """Box half-width within which every lattice phase stays below 1/6.

    With |x_i| <= eps for all five coordinates, each term's phase is at
    most eps (3 + M1 + M2) where M_i bounds |Q_i| on [0,1]^3 by the sum of
    absolute coefficients; eps = 1/(6 (3 + M1 + M2)) keeps every phase
    within one sixth of a cycle, so Re e(phase) >= cos(pi/3) = 1/2 and
    |sum| >= (N+1)^3 / 2.
    """
    m1 = sum(abs(c) for c in pair.A1.quadratic_coeffs())
    m2 = sum(abs(c) for c in pair.A2.quadratic_coeffs())
    return Fraction(1, 1) / (6 * (3 + m1 + m2))


# ---------------------------------------------------------------------------
# Decoupling ratio experiments
# ---------------------------------------------------------------------------


def _require_power_of_four(N: int) -> int:
    root = math.isqrt(N)
    if root * root != N or root & (root - 1) != 0:
        raise ValueError(f"N = {N} is not a power of 4")
    return root


def _axis_block_sums(
    pair: QuadraticPair, N: int, blocks: int, X: np.ndarray, h: float
):
    """Per-axis per-block complex quadrature sums for a diagonal pair.

    Returns [A, B, C], each of shape (m, blocks): the midpoint sum of
    e(v x_axis + v^2 (a x4 + b x5)) h over the nodes v of each block.
    """
    a, b = _diagonal_entries(pair)
    n_nodes = round(1.0 / h)
    nodes = (np.arange(n_nodes) + 0.5) * h
    per_block = n_nodes // blocks
    out = []
    for axis in range(3):
        coef = a[axis] * X[:, 3] + b[axis] * X[:, 4]
        lin = np.einsum("n,m->nm", nodes, X[:, axis], optimize=False)
        quad = np.einsum("n,m->nm", nodes**2, coef, optimize=False)
        vals = np.exp(2j * np.pi * (lin + quad)) * h
        out.append(
            vals.reshape(blocks, per_block, len(X)).sum(axis=1).T.copy()
        )
    return out


def _block_cell_sums(
    pair: QuadraticPair, N: int, blocks: int, X: np.ndarray, h: float
) -> np.ndarray:
    """General-pair path: per-block quadrature sums, shape (m, b, b, b).

    Direct triple sum over all cells; cost grows like (1/h)^3 * |X| and is
    only meant for small N cross-checks.
    """
    n_nodes = round(1.0 / h)
    per_block = n_nodes // blocks
    nodes = (np.arange(n_nodes) + 0.5) * h
    rr, ss, tt = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    pts = np.column_stack([rr.ravel(), ss.ravel(), tt.ravel()])
    feats = _surface_features(pair, pts)
    m = len(X)
    out = np.empty((m, blocks, blocks, blocks), dtype=complex)
    cell = h**3
    # keep the (cells x chunk) intermediate under ~64 MB of complex entries
    chunk = max(1, min(64, (1 << 22) // len(pts)))
    for start in range(0, m, chunk):
        xb = X[start : start + chunk]
        phases = np.einsum("pc,mc->pm", feats, xb, optimize=False)
        vals = np.exp(2j * np.pi * phases) * cell
        shaped = vals.reshape(
            blocks, per_block, blocks, per_block, blocks, per_block, len(xb)
        )
        out[start : start + chunk] = shaped.sum(axis=(1, 3, 5)).transpose(3, 0, 1, 2)
    return out


def decoupling_ratio(
    pair: QuadraticPair,
    g: DensitySpec,
    N: int,
    p: float,
    ball: Optional[WeightBall] = None,
    mc_samples: int = 10**5,
    seed: int = 0,
    h: Optional[float] = None,
) -> ExperimentRecord:
    """Empirical lower-bound proxy for the decoupling constant.

    lhs  = || E_{[0,1]^3} g ||_{L^p(w_B)},
    rhs  = ( sum over the N^{-1/2}-cube partition of
             || E_Delta g ||_{L^p(w_B)}^p )^{1/p},

    both estimated with one shared importance sample (common random
    numbers), so for a single-cube density the two collapse to the same
    float pipeline and the ratio is exactly 1.  N must be a power of 4 so
    the partition is dyadic.  The quadrature step defaults to 1/(8N); the
    discretized operator is the experimental object at every scale.
    """
    root = _require_power_of_four(N)
    blocks = root
    if ball is None:
        ball = WeightBall(radius=float(N))
    if h is None:
        h = 1.0 / (8 * N)
    n_nodes = round(1.0 / h)
    if abs(n_nodes * h - 1.0) > 1e-12 or n_nodes % blocks:
        raise ValueError("1/h must be an integer multiple of sqrt(N)")
    m = _round_mc(mc_samples)
    X, q = _sample_mixture(ball, m, seed)
    w = ball.weight(X)
    imp = w / q
    gvals = g.realize(blocks)
    gabs_p = np.abs(gvals) ** p

    nonzero = np.argwhere(np.abs(gvals) > 0)
    single_block = len(nonzero) == 1

    lhs_terms = np.empty(m)
    rhs_terms = np.empty(m)
    diag = _diagonal_entries(pair)
    for start in range(0, m, SAMPLE_CHUNK):
        sl = slice(start, min(start + SAMPLE_CHUNK, m))
        xb = X[sl]
        if diag is not None:
            A, B, C = _axis_block_sums(pair, N, blocks, xb, h)
            absA, absB, absC = np.abs(A) ** p, np.abs(B) ** p, np.abs(C) ** p
            rhs_terms[sl] = np.einsum(
                "mi,mj,mk,ijk->m", absA, absB, absC, gabs_p, optimize=False
            )
            if single_block:
                # |E g| = |g_Delta| |E_Delta 1| pointwise, so lhs and rhs
                # are the same integral; reuse the array for a bitwise
                # ratio of 1.
                lhs_terms[sl] = rhs_terms[sl]
            else:
                E = np.einsum(
                    "mi,mj,mk,ijk->m", A, B, C, gvals, optimize=False
                )
                lhs_terms[sl] = np.abs(E) ** p
        else:
            blocks_sums = _block_cell_sums(pair, N, blocks, xb, h)
            per_abs = np.abs(blocks_sums) ** p
            rhs_terms[sl] = np.einsum(
                "mijk,ijk->m", per_abs, gabs_p, optimize=False
            )
            if single_block:
                lhs_terms[sl] = rhs_terms[sl]
            else:
                E = np.einsum(
                    "mijk,ijk->m", blocks_sums, gvals, optimize=False
                )
                lhs_terms[sl] = np.abs(E) ** p
    lhs_w = lhs_terms * imp
    rhs_w = rhs_terms * imp
    lhs_mean, _ = _batch_mean_stderr(lhs_w)
    rhs_mean, _ = _batch_mean_stderr(rhs_w)
    lhs = lhs_mean ** (1.0 / p)
    rhs = rhs_mean ** (1.0 / p)
    mm = (m // N_BATCHES) * N_BATCHES
    lb = lhs_w[:mm].reshape(N_BATCHES, -1).mean(axis=1)
    rb = rhs_w[:mm].reshape(N_BATCHES, -1).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        batch_ratios = (lb / rb) ** (1.0 / p)
    ratio = lhs / rhs if rhs > 0 else math.inf
    stderr = (
        float(np.std(batch_ratios, ddof=1) / math.sqrt(N_BATCHES))
        if np.isfinite(batch_ratios).all()
        else math.inf
    )
    return ExperimentRecord(
        pair_hash=pair_hash(pair),
        N=N,
        p=float(p),
        lhs=float(lhs),
        rhs=float(rhs),
        ratio=float(ratio),
        stderr=stderr,
        mc=m,
        h=h,
        C=ball.exponent,
        seed=seed,
        density=g.describe(),
    )


def plane_cluster_ratio(
    pair: QuadraticPair,
    plane,
    K: int,
    p: float,
    mc_samples: int = 10**5,
    seed: int = 0,
) -> ExperimentRecord:
    """Decoupling ratio for the cubes of the K^{-1/2} partition meeting a
    plane t = alpha + beta r + gamma s; the density is their indicator.

    Requires 4 <= p <= 6 (the regime of the clustered inequality).
    """
    if not 4 <= p <= 6:
        raise ValueError("plane-cluster experiments require 4 <= p <= 6")
    spec = DensitySpec(kind=PLANE_CLUSTER, plane=tuple(plane))
    return decoupling_ratio(
        pair, spec, K, p, mc_samples=mc_samples, seed=seed
    )


def degenerate_product_bound(
    pair: QuadraticPair,
    N: int,
    p: float,
    factors: tuple = ("one", "one", "one"),
    mc_samples: int = 10**5,
    seed: int = 0,
) -> ExperimentRecord:
    """Decoupling ratio with product densities, for split-type pairs only.

    The pair must simultaneously diagonalize with a singular 2x2 minor in
    its coefficient profile (one of the four degenerate product types);
    WrongTaxonomy otherwise.
    """
    from .classify import SINGULAR_MINOR, minor_taxonomy, simultaneous_diagonalize

    sd = simultaneous_diagonalize(pair)
    if not sd.present:
        raise WrongTaxonomy("pair does not simultaneously diagonalize")
    tax = minor_taxonomy(sd.Lam)
    if tax.verdict != SINGULAR_MINOR or not tax.matches:
        raise WrongTaxonomy("pair has no singular minor (not a product type)")
    spec = DensitySpec(kind=PRODUCT, factors=tuple(factors))
    return decoupling_ratio(pair, spec, N, p, mc_samples=mc_samples, seed=seed)


# ---------------------------------------------------------------------------
# Fits and exponent algebra
# ---------------------------------------------------------------------------


def fit_scaling(records: Sequence, y: str = "ratio") -> ScalingFit:
    """Least-squares slope of log(value) against log(N).

    `records` holds ExperimentRecord objects (field `y` is read) or plain
    (N, value) pairs.  Requires at least 3 distinct N.
    """
    points = []
    for rec in records:
        if isinstance(rec, ExperimentRecord):
            points.append((rec.N, getattr(rec, y)))
        else:
            n, v = rec
            points.append((float(n), float(v)))
    if len({n for n, _ in points}) < 3:
        raise InsufficientData("need at least 3 distinct N values")
    xs = np.log([float(n) for n, _ in points])
    ys = np.log([float(v) for _, v in points])
    n = len(xs)
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    slope = float(((xs - xbar) * (ys - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    resid = ys - (intercept + slope * xs)
    rss = float((resid**2).sum())
    residual = math.sqrt(rss / n)
    if n > 2 and sxx > 0:
        se = math.sqrt(rss / (n - 2) / sxx)
    else:
        se = 0.0
    return ScalingFit(
        slope=slope,
        intercept=intercept,
        residual=residual,
        ci_halfwidth=1.96 * se,
        n_points=n,
    )


def critical_exponent_crossover(p_grid: Sequence) -> dict:
    """Both lower-bound exponent branches on a grid, and their crossing.

    branch_a(p) = (3/2)(1/2 - 1/p) and branch_b(p) = 3/2 - 5/p intersect
    where (3/4 - 3/(2p)) = 3/2 - 5/p; solving the linear equation in 1/p
    gives the critical exponent exactly.
    """
    rows = []
    for p in p_grid:
        pf = frac(p)
        a = Fraction(3, 2) * (Fraction(1, 2) - 1 / pf)
        b = Fraction(3, 2) - 5 / pf
        rows.append(
            {"p": pf, "branch_a": a, "branch_b": b, "max": max(a, b)}
        )
    # a - b = -3/4 + 7/(2p) = 0  =>  p = 14/3
    crossing = Fraction(7, 2) / Fraction(3, 4)
    assert Fraction(3, 2) * (Fraction(1, 2) - 1 / crossing) == (
        Fraction(3, 2) - 5 / crossing
    )
    return {"rows": rows, "crossing": crossing}
