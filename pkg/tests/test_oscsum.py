"""Tests for the numerical engine: quadrature, lattice sums, weighted
norms, decoupling ratios, and scaling fits.

Frozen numerical values come from an independent oracle (direct complex
arithmetic + adaptive scipy quadrature with exact rational cross-routes)
run before the module was written.  Slope windows for the full-scale
experiments live in test_acceptance.py; here the same machinery runs at
desk scale.
"""

import math
from fractions import Fraction as F

import numpy as np
import pytest

from qlab import oscsum as osc
from qlab.oscsum import (
    DensitySpec,
    EmptyCluster,
    ExperimentRecord,
    InsufficientData,
    ScalingFit,
    StepTooCoarse,
    WeightBall,
    WrongTaxonomy,
)
from qlab.qform import QuadraticPair


def P(c1, c2):
    return QuadraticPair.from_quadratic_coeffs(c1, c2)


NORMAL_11 = P(["1/2", "1/2", 0, 0, 0, 0], [0, "1/2", "1/2", 0, 0, 0])
PAIR_ND = P([1, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1])  # (r^2+s^2, st)
SPLIT = P([1, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0])  # (r^2+s^2, t^2)
UNIT_REGION = ((0, 1), (0, 1), (0, 1))


def ones_evaluator(X):
    return np.ones(len(X), dtype=complex)


# ---------------------------------------------------------------------------
# WeightBall
# ---------------------------------------------------------------------------


def test_weight_is_one_at_center_and_decays():
    ball = WeightBall(radius=4.0, center=(1, 2, 3, 4, 5))
    w = ball.weight(np.array([[1, 2, 3, 4, 5], [1, 2, 3, 4, 9.0]]))
    assert w[0] == 1.0
    assert w[1] == (1.0 + 1.0) ** -100
    assert np.all(w <= 1.0) and np.all(w > 0)


def test_weight_ball_validation():
    with pytest.raises(ValueError):
        WeightBall(radius=0.0)
    with pytest.raises(ValueError):
        WeightBall(radius=1.0, exponent=5)
    with pytest.raises(ValueError):
        WeightBall(radius=1.0, center=(0, 0, 0))


# ---------------------------------------------------------------------------
# DensitySpec
# ---------------------------------------------------------------------------


def test_density_validation():
    with pytest.raises(ValueError):
        DensitySpec(kind="WAVELET")
    with pytest.raises(ValueError):
        DensitySpec(kind=osc.SINGLE_DELTA)
    with pytest.raises(ValueError):
        DensitySpec(kind=osc.PLANE_CLUSTER)
    with pytest.raises(ValueError):
        DensitySpec(kind=osc.PRODUCT, factors=("one",))


def test_density_one_and_delta():
    g = DensitySpec(kind=osc.ONE).realize(4)
    assert g.shape == (4, 4, 4) and np.all(g == 1.0)
    d = DensitySpec(kind=osc.SINGLE_DELTA, delta_index=(1, 2, 3)).realize(4)
    assert d[1, 2, 3] == 1.0 and np.count_nonzero(d) == 1


def test_density_random_unit_modulus_deterministic():
    a = DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=5).realize(4)
    b = DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=5).realize(4)
    c = DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=6).realize(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.allclose(np.abs(a), 1.0)


def test_density_product_outer():
    spec = DensitySpec(kind=osc.PRODUCT, factors=("one", "delta:2", "one"))
    g = spec.realize(4)
    assert np.all(g[:, 2, :] == 1.0)
    assert np.count_nonzero(g) == 16
    with pytest.raises(ValueError):
        DensitySpec(kind=osc.PRODUCT, factors=("one", "one", "gauss")).realize(4)


def test_plane_cluster_blocks_horizontal():
    # t = 1/2 on a 4-partition touches the k=1/k=2 boundary: two layers
    mask = osc.plane_cluster_blocks(("1/2", 0, 0), 4)
    assert int(mask.sum()) == 32
    assert mask[:, :, 1].all() and mask[:, :, 2].all()
    assert not mask[:, :, 0].any() and not mask[:, :, 3].any()


def test_plane_cluster_tilted_exact_corners():
    # t = r on b=2: block (0,j,0) has l in [0,1/2] hitting t-range [0,1/2];
    # block (1,j,1) has l in [1/2,1] hitting [1/2,1]; off-diagonal blocks
    # touch only at corners, which the closed corner test includes.
    mask = osc.plane_cluster_blocks((0, 1, 0), 2)
    assert mask[0, 0, 0] and mask[1, 0, 1]
    assert mask[0, 0, 1] and mask[1, 0, 0]  # corner touch counts


def test_plane_cluster_empty():
    with pytest.raises(EmptyCluster):
        DensitySpec(kind=osc.PLANE_CLUSTER, plane=(3, 0, 0)).realize(4)


# ---------------------------------------------------------------------------
# extension_eval
# ---------------------------------------------------------------------------


def test_extension_zero_phase_exact():
    v = osc.extension_eval(NORMAL_11, None, UNIT_REGION, (0, 0, 0, 0, 0), 0.25)
    assert v == pytest.approx(1.0, abs=1e-15)


def test_extension_full_period_near_zero():
    h = 1 / 64
    v = osc.extension_eval(
        NORMAL_11, None, UNIT_REGION, (3, 0, 0, 0, 0), h, auto_refine=True
    )
    assert abs(v) <= 2 * h


def test_extension_step_too_coarse_and_refine():
    x = (0.5, 1 / 3, 0.25, 2.0, 1.0)
    with pytest.raises(StepTooCoarse):
        osc.extension_eval(NORMAL_11, None, UNIT_REGION, x, 1 / 8)
    v = osc.extension_eval(NORMAL_11, None, UNIT_REGION, x, 1 / 8, auto_refine=True)
    assert abs(v) > 0


def test_extension_frozen_value_normal_form():
    # oracle (separable 1-D adaptive quadrature):
    # (-0.012652270085698464-0.010373289806265042j)
    x = (0.5, 1 / 3, 0.25, 2.0, 1.0)
    v = osc.extension_eval(NORMAL_11, None, UNIT_REGION, x, 1 / 256)
    assert abs(v - (-0.012652270085698464 - 0.010373289806265042j)) < 2e-5


def test_extension_frozen_value_nondiagonal():
    # oracle (iterated 2-D quadrature x closed 1-D factor):
    # (-0.0430668452664308+0.047803384284397746j)
    x = (0.5, 0.25, 0.125, 0.75, 0.5)
    v = osc.extension_eval(PAIR_ND, None, UNIT_REGION, x, 1 / 128)
    assert abs(v - (-0.0430668452664308 + 0.047803384284397746j)) < 2e-5


def test_extension_density_weighting():
    # delta density on 1 of 8 blocks: zero phase integral = block volume
    spec = DensitySpec(kind=osc.SINGLE_DELTA, delta_index=(0, 1, 1))
    g = osc.density_function(spec, 2)
    v = osc.extension_eval(NORMAL_11, g, UNIT_REGION, (0, 0, 0, 0, 0), 0.125)
    assert v == pytest.approx(0.125, abs=1e-14)


def test_extension_evaluator_matches_pointwise():
    x = np.array([[0.5, 1 / 3, 0.25, 2.0, 1.0], [0.1, 0.2, 0.3, 0.4, 0.5]])
    Fv = osc.extension_evaluator(NORMAL_11, None, UNIT_REGION, 1 / 64)
    batch = Fv(x)
    for i in range(2):
        single = osc.extension_eval(
            NORMAL_11, None, UNIT_REGION, x[i], 1 / 64, auto_refine=True
        )
        assert abs(batch[i] - single) < 1e-12


@pytest.mark.slow
def test_extension_richardson_panel():
    # 100-draw self-convergence panel: the second halving moves the value
    # by less than the Richardson error estimate of the first.
    rng = np.random.default_rng(np.random.SeedSequence(77))
    X = rng.uniform(-2, 2, (100, 5))
    vals = {}
    for h in (1 / 40, 1 / 80, 1 / 160):
        vals[h] = osc.extension_evaluator(NORMAL_11, None, UNIT_REGION, h)(X)
    d1 = np.abs(vals[1 / 40] - vals[1 / 80])
    d2 = np.abs(vals[1 / 80] - vals[1 / 160])
    assert np.all(d2 <= (4.0 / 3.0) * d1 + 1e-12)


# ---------------------------------------------------------------------------
# weighted_lp_norm
# ---------------------------------------------------------------------------


def test_weighted_norm_constant_matches_radial_quadrature():
    # oracle: truncated weight integral, R=16 C=100 -> 0.07717058451812782
    truth = 0.07717058451812782
    ball = WeightBall(radius=16.0)
    for p in (2.0, 3.0):
        val, se = osc.weighted_lp_norm(ones_evaluator, ball, p, 20000, seed=5)
        assert abs(val - truth ** (1.0 / p)) <= 3 * se


def test_weighted_norm_closed_form_helper():
    assert osc.weight_integral(WeightBall(radius=1.0)) == pytest.approx(
        7.359560443699629e-08, rel=1e-12
    )
    assert osc.weight_integral(WeightBall(radius=256.0)) == pytest.approx(
        80919.2228316804, rel=1e-12
    )


def test_weighted_norm_radius_doubling():
    for p in (2.0, 5.0):
        a, sa = osc.weighted_lp_norm(
            ones_evaluator, WeightBall(radius=8.0), p, 20000, seed=3
        )
        b, sb = osc.weighted_lp_norm(
            ones_evaluator, WeightBall(radius=16.0), p, 20000, seed=3
        )
        target = 2 ** (5.0 / p)
        spread = 3 * (sa / a + sb / b) * target
        assert abs(b / a - target) <= spread


def test_weighted_norm_seed_stability():
    gfun = osc.density_function(
        DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=9), 2
    )
    Fv = osc.extension_evaluator(NORMAL_11, gfun, UNIT_REGION, 1 / 32)
    ball = WeightBall(radius=4.0)
    v1, s1 = osc.weighted_lp_norm(Fv, ball, 2.0, 4000, seed=1)
    v2, s2 = osc.weighted_lp_norm(Fv, ball, 2.0, 4000, seed=2)
    assert abs(v1 - v2) <= 5 * math.hypot(s1, s2)


def test_weighted_norm_validation_and_determinism():
    with pytest.raises(ValueError):
        osc.weighted_lp_norm(ones_evaluator, WeightBall(radius=4.0), 0.5, 1000)
    a = osc.weighted_lp_norm(ones_evaluator, WeightBall(radius=4.0), 2.0, 1000, seed=8)
    b = osc.weighted_lp_norm(ones_evaluator, WeightBall(radius=4.0), 2.0, 1000, seed=8)
    assert a == b


# ---------------------------------------------------------------------------
# lattice_exp_sum / exp_sum_lp_average
# ---------------------------------------------------------------------------


def test_lattice_zero_phase_exact():
    assert osc.lattice_exp_sum(NORMAL_11, 2, (0, 0, 0, 0, 0)) == 27.0 + 0.0j
    assert osc.lattice_exp_sum(PAIR_ND, 4, (0, 0, 0, 0, 0)) == 125.0 + 0.0j


def test_lattice_integral_phases():
    v = osc.lattice_exp_sum(NORMAL_11, 4, (4, 0, 0, 0, 0))
    assert abs(v - 125.0) < 1e-10


def test_lattice_hand_value_n2():
    # 1 + e(1/2) + e(1) = 1 in the r-sum, times 3^2 free indices = 9
    v = osc.lattice_exp_sum(NORMAL_11, 2, (1, 0, 0, 0, 0))
    assert abs(v - 9.0) < 1e-12


def test_lattice_batch_matches_kahan():
    rng = np.random.default_rng(3)
    X = np.column_stack(
        [rng.uniform(0, 8, (6, 3)), rng.uniform(0, 64, (6, 2))]
    )
    batch = osc._lattice_sums_batch(NORMAL_11, 8, X)
    for i in range(6):
        direct = osc.lattice_exp_sum(NORMAL_11, 8, X[i])
        assert abs(batch[i] - direct) <= 1e-12 * max(1.0, abs(direct))


def test_lattice_batch_general_pair_path():
    rng = np.random.default_rng(4)
    X = np.column_stack(
        [rng.uniform(0, 4, (3, 3)), rng.uniform(0, 16, (3, 2))]
    )
    batch = osc._lattice_sums_batch(PAIR_ND, 4, X)
    for i in range(3):
        direct = osc.lattice_exp_sum(PAIR_ND, 4, X[i])
        assert abs(batch[i] - direct) <= 1e-12 * max(1.0, abs(direct))


def test_exp_sum_p2_matches_double_sum_oracle():
    # oracle: E|S|^2 over the torus box equals (N+1)^3 exactly (cross
    # terms integrate to zero); at N=4 the brute double sum gives 125.
    val, se = osc.exp_sum_lp_average(NORMAL_11, 4, 2.0, 20000, seed=9)
    assert abs(val - math.sqrt(125.0)) <= 3 * se


def test_exp_sum_monotone_in_p():
    vals = [
        osc.exp_sum_lp_average(NORMAL_11, 4, p, 5000, seed=2)[0]
        for p in (1.0, 2.0, 4.0, 6.0)
    ]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def test_exp_sum_deterministic():
    a = osc.exp_sum_lp_average(NORMAL_11, 8, 2.0, 2000, seed=6)
    b = osc.exp_sum_lp_average(NORMAL_11, 8, 2.0, 2000, seed=6)
    assert a == b


def test_main_arc_epsilon_and_floor():
    eps = osc.main_arc_epsilon(NORMAL_11)
    assert eps == F(1, 30)
    # inside the arc every phase stays below 1/6: |S| >= (N+1)^3 / 2
    N = 8
    x = (float(eps),) * 5
    s = osc.lattice_exp_sum(NORMAL_11, N, x)
    assert abs(s) >= (N + 1) ** 3 / 2
    # the arc volume fraction eps^5/N^7 gives the N^(3-7/p) floor
    p = 4.0
    val, se = osc.exp_sum_lp_average(NORMAL_11, N, p, 20000, seed=3)
    floor = ((N + 1) ** 3 / 2) * (float(eps) ** 5 / N**7) ** (1.0 / p)
    assert val + 3 * se >= floor


# ---------------------------------------------------------------------------
# decoupling_ratio
# ---------------------------------------------------------------------------


def test_ratio_requires_power_of_four():
    for bad in (8, 5, 32):
        with pytest.raises(ValueError):
            osc.decoupling_ratio(
                NORMAL_11, DensitySpec(kind=osc.ONE), bad, 2.0, mc_samples=100
            )


def test_ratio_single_delta_exactly_one():
    for seed in (0, 1, 17):
        rec = osc.decoupling_ratio(
            NORMAL_11,
            DensitySpec(kind=osc.SINGLE_DELTA, delta_index=(1, 0, 1)),
            16,
            4.0,
            mc_samples=500,
            seed=seed,
        )
        assert rec.ratio == 1.0
        assert rec.stderr == 0.0


def test_ratio_single_delta_general_pair():
    rec = osc.decoupling_ratio(
        PAIR_ND,
        DensitySpec(kind=osc.SINGLE_DELTA, delta_index=(0, 1, 1)),
        4,
        4.0,
        mc_samples=200,
        seed=5,
    )
    assert rec.ratio == 1.0


def test_ratio_record_fields_and_determinism():
    rec = osc.decoupling_ratio(
        NORMAL_11, DensitySpec(kind=osc.ONE), 4, 3.0, mc_samples=500, seed=12
    )
    rec2 = osc.decoupling_ratio(
        NORMAL_11, DensitySpec(kind=osc.ONE), 4, 3.0, mc_samples=500, seed=12
    )
    assert rec == rec2
    assert rec.N == 4 and rec.p == 3.0 and rec.C == 100
    assert rec.mc == 500 and rec.h == 1 / 32
    assert rec.ratio == pytest.approx(rec.lhs / rec.rhs)
    assert len(rec.csv_row()) == len(osc.CSV_HEADER) == 11
    assert rec.pair_hash


def test_ratio_general_path_consistent_with_separable():
    # same diagonal pair through both pipelines: per-block products of
    # 1-D sums must equal the direct triple sums.
    rng = np.random.default_rng(8)
    X = np.column_stack([rng.uniform(-4, 4, (5, 3)), rng.uniform(-4, 4, (5, 2))])
    h = 1 / 32
    A, B, C = osc._axis_block_sums(NORMAL_11, 4, 2, X, h)
    cells = osc._block_cell_sums(NORMAL_11, 4, 2, X, h)
    prod = np.einsum("mi,mj,mk->mijk", A, B, C, optimize=False)
    assert np.allclose(prod, cells, atol=1e-12)


def test_ratio_lhs_at_least_single_block_contribution():
    # with g >= 0 supported on one block plus tiny elsewhere the rhs is
    # within a constant of the lhs; sanity: ratio finite and positive
    rec = osc.decoupling_ratio(
        NORMAL_11,
        DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=4),
        4,
        2.0,
        mc_samples=2000,
        seed=3,
    )
    assert 0 < rec.ratio < math.inf


def test_ratio_rejects_bad_step():
    # 1/h = 30 does not split into 4 blocks per axis
    with pytest.raises(ValueError):
        osc.decoupling_ratio(
            NORMAL_11, DensitySpec(kind=osc.ONE), 16, 2.0, mc_samples=100, h=1 / 30
        )
    with pytest.raises(ValueError):
        osc.decoupling_ratio(
            NORMAL_11, DensitySpec(kind=osc.ONE), 4, 2.0, mc_samples=100, h=0.3
        )


@pytest.mark.slow
def test_parseval_near_orthogonality_p2():
    # at N=256 the partition is fine enough for L^2 near-orthogonality
    rec = osc.decoupling_ratio(
        NORMAL_11,
        DensitySpec(kind=osc.RANDOM_UNIT_MODULUS, seed=3),
        256,
        2.0,
        mc_samples=10**5,
        seed=11,
    )
    assert abs(rec.ratio - 1.0) <= 5 * rec.stderr


def test_weight_exponent_insensitive_at_one_config():
    # C = 20 vs C = 100 changes the proxy by a bounded factor only
    recs = {}
    for C in (20, 100):
        ball = WeightBall(radius=16.0, exponent=C)
        recs[C] = osc.decoupling_ratio(
            NORMAL_11,
            DensitySpec(kind=osc.ONE),
            16,
            12.0,
            ball=ball,
            mc_samples=20000,
            seed=11,
        )
    factor = recs[20].ratio / recs[100].ratio
    assert 0.6 <= factor <= 1.5
    assert recs[20].C == 20 and recs[100].C == 100


# ---------------------------------------------------------------------------
# plane_cluster_ratio / degenerate_product_bound
# ---------------------------------------------------------------------------


def test_plane_cluster_p_range():
    for p in (2.0, 7.0):
        with pytest.raises(ValueError):
            osc.plane_cluster_ratio(NORMAL_11, ("1/2", 0, 0), 16, p, mc_samples=100)


def test_plane_cluster_empty_plane():
    with pytest.raises(EmptyCluster):
        osc.plane_cluster_ratio(NORMAL_11, (5, 0, 0), 16, 5.0, mc_samples=100)


def test_plane_cluster_single_cube_ratio_one():
    # K = 1: the partition is a single cube, any plane cluster is it
    rec = osc.plane_cluster_ratio(NORMAL_11, ("1/2", 0, 0), 1, 5.0, mc_samples=200, seed=2)
    assert rec.ratio == 1.0


def test_plane_cluster_runs_at_small_scale():
    rec = osc.plane_cluster_ratio(
        NORMAL_11, ("1/2", 0, 0), 16, 14.0 / 3.0, mc_samples=2000, seed=11
    )
    assert rec.ratio > 1.0
    assert rec.density.startswith("plane:")


def test_product_bound_wrong_taxonomy():
    with pytest.raises(WrongTaxonomy):
        osc.degenerate_product_bound(NORMAL_11, 16, 6.0, mc_samples=100)
    with pytest.raises(WrongTaxonomy):
        osc.degenerate_product_bound(PAIR_ND, 16, 6.0, mc_samples=100)


def test_product_bound_split_pair_runs():
    rec = osc.degenerate_product_bound(SPLIT, 16, 6.0, mc_samples=2000, seed=11)
    assert rec.ratio > 1.0
    assert rec.density == "product:one*one*one"


def test_product_bound_delta_product_ratio_one():
    rec = osc.decoupling_ratio(
        SPLIT,
        DensitySpec(kind=osc.PRODUCT, factors=("delta:1", "delta:0", "delta:2")),
        16,
        6.0,
        mc_samples=300,
        seed=1,
    )
    assert rec.ratio == 1.0


# ---------------------------------------------------------------------------
# fit_scaling / critical_exponent_crossover
# ---------------------------------------------------------------------------


def test_fit_exact_power_law():
    fit = osc.fit_scaling([(n, n**1.5) for n in (8, 16, 32, 64)])
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)
    assert fit.ci_halfwidth == pytest.approx(0.0, abs=1e-12)
    assert fit.n_points == 4


def test_fit_insufficient_data():
    with pytest.raises(InsufficientData):
        osc.fit_scaling([(8, 1.0), (16, 2.0)])
    with pytest.raises(InsufficientData):
        osc.fit_scaling([(8, 1.0), (8, 1.1), (16, 2.0)])


def test_fit_reads_experiment_records():
    recs = [
        ExperimentRecord("h", n, 2.0, 1.0, 1.0, float(n), 0.0, 10, 0.1, 100, 0)
        for n in (4, 16, 64)
    ]
    fit = osc.fit_scaling(recs, y="ratio")
    assert fit.slope == pytest.approx(1.0, abs=1e-12)


def test_fit_noise_calibration():
    # c N^s with 5% multiplicative noise, 6 points: slope lands within
    # 0.1 of s in at least 95% of 10^3 simulations
    rng = np.random.default_rng(123)
    ns = (8, 16, 32, 64, 128, 256)
    hits = 0
    for _ in range(1000):
        pts = [(n, 3.0 * n**1.2 * (1.0 + 0.05 * rng.standard_normal())) for n in ns]
        fit = osc.fit_scaling(pts)
        hits += abs(fit.slope - 1.2) <= 0.1
    assert hits >= 950


def test_crossover_exact():
    table = osc.critical_exponent_crossover([2, F(14, 3), 6])
    assert table["crossing"] == F(14, 3)
    rows = {r["p"]: r for r in table["rows"]}
    assert rows[F(2)]["branch_a"] == 0
    assert rows[F(2)]["branch_b"] == -1
    assert rows[F(2)]["max"] == 0
    assert rows[F(14, 3)]["branch_a"] == rows[F(14, 3)]["branch_b"] == F(3, 7)
    # general (d, n) = (3, 5): p_c = 4n/d - 2
    assert F(4 * 5, 3) - 2 == F(14, 3)


def test_record_csv_row_uses_repr_floats():
    rec = ExperimentRecord("abc", 16, 2.0, 0.1, 0.2, 0.5, 0.01, 100, 0.0078125, 100, 7)
    row = rec.csv_row()
    assert row[0] == "abc"
    assert row[2] == repr(2.0)
    assert row[8] == repr(0.0078125)
