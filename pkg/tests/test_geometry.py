import math

import cvxpy as cp
import numpy as np
import pytest

from geoest.errors import ContractError, UnboundedSetError
from geoest.geometry import (
    default_t_grid,
    global_mean_width,
    local_mean_width,
    minimax_radii,
    packing_lower_bound,
    width_bound_formula,
    width_sup_sample,
)
from geoest.types import (
    EuclideanBall,
    FullSpace,
    L1Ball,
    LowRankCone,
    SparseCone,
)


def test_width_sup_sample_examples():
    g = np.array([3.0, -4.0, 1.0])
    assert width_sup_sample(SparseCone(3, 1), g, 1.0) == pytest.approx(5.0)
    assert width_sup_sample(FullSpace(3), g, 2.0) == pytest.approx(2 * np.linalg.norm(g))
    # enormous l1 radius: the constraint is slack and the supremum is t ||g||
    assert width_sup_sample(L1Ball(3, 1e6), g, 1.0) == pytest.approx(np.linalg.norm(g))
    assert width_sup_sample(EuclideanBall(3, 0.25), g, 2.0) == pytest.approx(
        0.5 * np.linalg.norm(g)
    )
    with pytest.raises(ContractError):
        width_sup_sample(FullSpace(3), g, 0.0)


def test_width_sup_sample_low_rank_top_singular_values():
    rng = np.random.default_rng(0)
    fs = LowRankCone(6, 5, 2)
    g = rng.standard_normal(30)
    svals = np.linalg.svd(g.reshape((6, 5), order="F"), compute_uv=False)
    assert width_sup_sample(fs, g, 1.5) == pytest.approx(1.5 * np.linalg.norm(svals[:4]))


def _cvx_l1_sup(g, l1_radius, t):
    u = cp.Variable(g.size)
    prob = cp.Problem(cp.Maximize(g @ u), [cp.norm1(u) <= l1_radius, cp.norm2(u) <= t])
    prob.solve(solver=cp.CLARABEL)
    return prob.value


def test_l1_width_solver_vs_convex_program():
    rng = np.random.default_rng(1)
    for _ in range(500):
        g = rng.standard_normal(3) * float(rng.uniform(0.5, 2.0))
        radius = float(rng.uniform(0.3, 2.0))
        t = float(rng.uniform(0.2, 3.0))
        mine = width_sup_sample(L1Ball(3, radius), g, t)
        ref = _cvx_l1_sup(g, 2 * radius, t)
        assert abs(mine - ref) <= 1e-6


def test_local_width_full_space_matches_gaussian_norm_moment():
    n = 20
    est = local_mean_width(FullSpace(n), 1.0, 3000, seed=3)
    exact = math.sqrt(2.0) * math.gamma((n + 1) / 2) / math.gamma(n / 2)
    assert abs(est.value - exact) <= 3 * est.stderr
    assert est.value <= math.sqrt(n) + 3 * est.stderr


def test_cone_homogeneity_and_l1_monotone_ratio():
    cone = SparseCone(50, 4)
    base = local_mean_width(cone, 1.0, 500, seed=4)
    for t, seed in ((0.5, 5), (2.0, 6)):
        est = local_mean_width(cone, t, 500, seed=seed)
        tol = 3 * math.sqrt((est.stderr / t) ** 2 + base.stderr**2)
        assert abs(est.value / t - base.value) <= tol

    ball = L1Ball(50, 1.0)
    ratios, errs = [], []
    for t, seed in ((0.5, 7), (1.0, 8), (2.0, 9), (4.0, 10)):
        est = local_mean_width(ball, t, 500, seed=seed)
        ratios.append(est.value / t)
        errs.append(est.stderr / t)
    for i in range(len(ratios) - 1):
        assert ratios[i + 1] <= ratios[i] + 3 * math.hypot(errs[i], errs[i + 1])


def test_local_width_dominated_by_global():
    ball = L1Ball(40, 1.0)
    glob = global_mean_width(ball, 1000, seed=11)
    for t, seed in ((0.5, 12), (2.0, 13), (10.0, 14)):
        loc = local_mean_width(ball, t, 1000, seed=seed)
        assert loc.value <= glob.value + 3 * math.hypot(loc.stderr, glob.stderr)


def test_global_width_examples():
    # per-sample value for the l1 ball is 2 R max|g|
    ball = L1Ball(10_000, 1.0)
    est = global_mean_width(ball, 300, seed=15)
    assert est.value <= 4.0 * math.sqrt(2.0 * math.log(10_000)) * 1.01
    assert est.value >= 2.0 * math.sqrt(math.log(10_000))  # crude floor for E max|g|

    eb = EuclideanBall(30, 1.0)
    est = global_mean_width(eb, 2000, seed=16)
    exact = 2.0 * math.sqrt(2.0) * math.gamma(31 / 2) / math.gamma(15)
    assert abs(est.value - exact) <= 3 * est.stderr

    with pytest.raises(UnboundedSetError):
        global_mean_width(SparseCone(10, 2), 100, seed=1)


def test_width_bound_formula_values():
    assert width_bound_formula(LowRankCone(50, 50, 2)) == pytest.approx(20.0)
    assert width_bound_formula(L1Ball(1000, 1.0)) == pytest.approx(
        4.0 * math.sqrt(2.0 * math.log(1000))
    )
    s, n = 10, 1000
    assert width_bound_formula(SparseCone(n, s)) == pytest.approx(
        math.sqrt(2 * s * math.log(2 * n / s)) + 2 * math.sqrt(s)
    )
    with pytest.raises(ContractError):
        width_bound_formula(FullSpace(5))


def test_width_formula_dominates_monte_carlo_sparse_and_l1():
    sp = SparseCone(1000, 10)
    est = local_mean_width(sp, 1.0, 300, seed=17)
    assert est.value <= width_bound_formula(sp) + 3 * est.stderr

    ball = L1Ball(500, 2.0)
    est = global_mean_width(ball, 300, seed=18)
    assert est.value <= width_bound_formula(ball) + 3 * est.stderr


def test_packing_interval_count():
    # K cap tB on the line is a segment of length 2; 0.1-separated points fit >= 10
    assert packing_lower_bound(EuclideanBall(1, 1.0), 1.0, 500, seed=19) >= 10


def test_packing_monotone_in_candidates():
    fs = SparseCone(20, 2)
    counts = [packing_lower_bound(fs, 1.0, n, seed=20) for n in (50, 100, 200, 400)]
    assert counts == sorted(counts)


def test_packing_sparse_basis_count():
    # the 2n signed basis directions alone support a count of >= 20 at n = 20
    assert packing_lower_bound(SparseCone(20, 1), 1.0, 2000, seed=21) >= 20


def test_sudakov_direction():
    for fs, seed in ((SparseCone(30, 2), 22), (L1Ball(30, 1.0), 23)):
        for t in (0.5, 1.0):
            w = local_mean_width(fs, t, 400, seed=seed).value
            count = packing_lower_bound(fs, t, 800, seed=seed + 10)
            assert t * math.sqrt(math.log(count)) <= w / 0.2


def test_minimax_radii_limits():
    fs = SparseCone(20, 2)
    grid = np.geomspace(1e-3, 10, 20)
    # nu -> 0: both infimands collapse to the smallest grid point
    radii = minimax_radii(fs, nu=1e-12, m=100, t_grid=grid, samples=100, n_candidates=50, seed=24)
    assert radii.delta_upper == pytest.approx(grid[0], rel=1e-6)
    assert radii.delta_lower == pytest.approx(grid[0], rel=1e-6)

    # doubling nu and quadrupling m leaves the infimands unchanged
    a = minimax_radii(fs, nu=1.0, m=50, t_grid=grid, samples=100, n_candidates=100, seed=25)
    b = minimax_radii(fs, nu=2.0, m=200, t_grid=grid, samples=100, n_candidates=100, seed=25)
    assert a.delta_upper == pytest.approx(b.delta_upper)
    assert a.delta_lower == pytest.approx(b.delta_lower)

    assert a.diam is None
    assert minimax_radii(L1Ball(5, 1.5), 1.0, 10, t_grid=[0.5], samples=100, seed=1).diam == 3.0

    with pytest.raises(ContractError):
        minimax_radii(fs, nu=1.0, m=50, t_grid=[], samples=100, seed=1)
    with pytest.raises(ContractError):
        minimax_radii(fs, nu=0.0, m=50, samples=100, seed=1)


def test_default_t_grid():
    grid = default_t_grid(1.0, 100)
    assert grid.size == 40
    assert grid[0] == pytest.approx(1e-3 * 1.1)
    assert grid[-1] == pytest.approx(10.0 * 1.1)
