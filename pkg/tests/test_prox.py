import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog, minimize_scalar

from l1proxgrad.prox import (
    ProxProblem,
    forced_move,
    kkt_check,
    median_of_medians,
    non_bang_bang_count,
    select_kth,
    solve_quickselect,
    solve_sorted,
    subproblem_objective,
    transform,
)

BOUNDS = (-1.0, 1.0)


def _instance(seed, n, ties=False, bang=0.5):
    rng = np.random.default_rng(seed)
    if ties:
        areas = np.full(n, 1.0 / n)
        gamma = rng.integers(-3, 4, n) / n
    else:
        areas = rng.uniform(0.5, 2.0, n) / n
        gamma = rng.standard_normal(n) * areas
    u = rng.uniform(*BOUNDS, n)
    mask = rng.random(n) < bang
    u[mask] = rng.choice(BOUNDS, mask.sum())
    return ProxProblem(gamma, areas, u, float(rng.uniform(0.05, 20.0)), BOUNDS)


def _brute_force_value(p):
    """min over r of [min γᵀv s.t. Σ a|v-u| ≤ r] + L r²/2, via LP plus a 1d search.

    The LP minimizer is mapped back to a point of the box and evaluated exactly,
    so solver tolerances in the LP can only make the oracle pessimistic.
    """
    n = p.size
    ua, ub = p.bounds
    u, a = p.current, p.areas
    cost = np.concatenate([p.gamma, -p.gamma])
    box = [(0, ub - x) for x in u] + [(0, x - ua) for x in u]

    def solve_lp(r):
        return linprog(cost, A_ub=np.concatenate([a, a])[None], b_ub=[r], bounds=box, method="highs")

    def outer(r):  # convex in r
        return float(p.gamma @ u) + solve_lp(r).fun + 0.5 * p.stepsize * r**2

    rmax = float(a @ np.maximum(ub - u, u - ua))
    r_best = minimize_scalar(outer, bounds=(0, rmax), method="bounded", options={"xatol": 1e-10}).x
    best = np.inf
    for r in (0.0, r_best, rmax):
        x = solve_lp(r).x
        best = min(best, subproblem_objective(p, np.clip(u + x[:n] - x[n:], ua, ub)))
    return best


def test_one_dimensional_interior_solution():
    p = ProxProblem(np.array([-0.5]), np.array([1.0]), np.array([0.0]), 1.0, BOUNDS)
    for s in (solve_quickselect(p), solve_sorted(p)):
        assert s.v[0] == pytest.approx(0.5) and s.alpha == pytest.approx(0.5)
        assert s.nonbb_delta == 1


def test_one_dimensional_hits_bound():
    p = ProxProblem(np.array([-3.0]), np.array([1.0]), np.array([0.0]), 1.0, BOUNDS)
    s = solve_quickselect(p)
    assert s.v[0] == 1.0 and s.alpha == 1.0


def test_zero_gradient_stays_put():
    p = ProxProblem(np.zeros(4), np.full(4, 0.25), np.array([-1.0, 0.3, 1.0, 0.0]), 2.0, BOUNDS)
    for s in (solve_quickselect(p), solve_sorted(p)):
        np.testing.assert_array_equal(s.v, p.current)
        assert s.alpha == 0.0


def test_at_upper_bound_with_negative_gradient_unchanged():
    p = ProxProblem(np.array([-0.1, -2.0]), np.array([0.5, 0.5]), np.ones(2), 1.0, BOUNDS)
    np.testing.assert_array_equal(solve_quickselect(p).v, 1.0)


def test_at_upper_bound_with_positive_gradient_moves_down():
    p = ProxProblem(np.array([1e-3, 0.0]), np.array([0.5, 0.5]), np.ones(2), 1.0, BOUNDS)
    s = solve_quickselect(p)
    # ĝ = 2e-3, forced move 0.5 * 2 = 1 ≥ 2e-3, so the tie fills partially
    assert s.v[0] < 1.0 and s.alpha == pytest.approx(2e-3)


def test_transform_values():
    p = ProxProblem(np.array([2.0, -1.0]), np.array([0.5, 0.25]), np.array([0.0, 1.0]), 4.0, BOUNDS)
    ghat, uhat, ua, ub = transform(p)
    np.testing.assert_allclose(ghat, [1.0, -1.0])
    np.testing.assert_allclose(uhat, [0.0, 0.25])
    np.testing.assert_allclose(ua, [-0.5, -0.25])
    np.testing.assert_allclose(ub, [0.5, 0.25])


def test_forced_move_examples():
    ghat = np.array([3.0, -2.0, 1.0, 0.0])
    uhat = np.zeros(4)
    lo, hi = -np.ones(4), np.ones(4)
    assert forced_move(ghat, uhat, lo, hi, 0.5) == (3.0, 3.0)
    assert forced_move(ghat, uhat, lo, hi, 1.0) == (2.0, 3.0)
    assert forced_move(ghat, uhat, lo, hi, 5.0) == (0.0, 0.0)
    assert forced_move(ghat, uhat, lo, hi, 0.0) == (3.0, 4.0)
    with pytest.raises(ValueError):
        forced_move(ghat, uhat, lo, hi, -1.0)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        ProxProblem(np.zeros(2), np.ones(2), np.array([0.0, 2.0]), 1.0, BOUNDS)
    with pytest.raises(ValueError):
        ProxProblem(np.zeros(2), np.ones(2), np.zeros(2), 0.0, BOUNDS)
    with pytest.raises(ValueError):
        ProxProblem(np.zeros(2), np.array([1.0, 0.0]), np.zeros(2), 1.0, BOUNDS)
    with pytest.raises(ValueError):
        ProxProblem(np.zeros(2), np.ones(3), np.zeros(2), 1.0, BOUNDS)


@pytest.mark.parametrize("seed", range(6))
def test_two_dimensional_grid_search(seed):
    p = _instance(seed, 2, bang=0.0)
    best = subproblem_objective(p, solve_quickselect(p).v)
    lo, hi = p.bounds
    center = np.array([0.0, 0.0])
    width = hi - lo
    grid_best = np.inf
    for _ in range(12):  # coarse-to-fine zoom around the current best point
        xs = np.linspace(max(lo, center[0] - width / 2), min(hi, center[0] + width / 2), 81)
        ys = np.linspace(max(lo, center[1] - width / 2), min(hi, center[1] + width / 2), 81)
        X, Y = np.meshgrid(xs, ys)
        d = p.areas[0] * np.abs(X - p.current[0]) + p.areas[1] * np.abs(Y - p.current[1])
        vals = p.gamma[0] * X + p.gamma[1] * Y + 0.5 * p.stepsize * d**2
        i = np.unravel_index(np.argmin(vals), vals.shape)
        grid_best = min(grid_best, vals[i])
        center = np.array([X[i], Y[i]])
        width /= 8
    assert best <= grid_best + 1e-12
    assert grid_best - best <= 1e-8


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("ties", [False, True])
def test_matches_linear_programming_oracle(seed, ties):
    p = _instance(seed, 9, ties=ties)
    got = subproblem_objective(p, solve_quickselect(p).v)
    want = _brute_force_value(p)
    assert got <= want + 1e-12 * max(1.0, abs(want))
    assert got == pytest.approx(want, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_coordinate_perturbations_do_not_improve(seed):
    p = _instance(seed, 30)
    s = solve_quickselect(p)
    base = subproblem_objective(p, s.v)
    rng = np.random.default_rng(seed)
    for _ in range(200):
        w = s.v.copy()
        j = rng.integers(p.size)
        w[j] = np.clip(w[j] + rng.normal(scale=0.1), *p.bounds)
        assert subproblem_objective(p, w) >= base - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60), st.booleans())
def test_solvers_agree_and_satisfy_kkt(seed, n, ties):
    p = _instance(seed, n, ties=ties)
    a = solve_quickselect(p, rng=np.random.default_rng(seed))
    b = solve_sorted(p)
    c = solve_quickselect(p, pivot="median_of_medians")
    ghat = transform(p)[0]
    scale = max(1.0, float(np.abs(ghat).max()))
    assert abs(a.alpha - b.alpha) <= 1e-12 * scale
    assert abs(a.alpha - c.alpha) <= 1e-12 * scale
    assert kkt_check(p, a) <= 1e-10 * scale
    assert kkt_check(p, b) <= 1e-10 * scale
    fa, fb = subproblem_objective(p, a.v), subproblem_objective(p, b.v)
    assert abs(fa - fb) <= 1e-12 * max(1.0, abs(fa))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 80), st.booleans())
def test_at_most_one_new_interior_entry(seed, n, ties):
    p = _instance(seed, n, ties=ties)
    s = solve_quickselect(p)
    assert s.nonbb_delta == non_bang_bang_count(s.v, p.bounds)
    assert s.nonbb_delta <= non_bang_bang_count(p.current, p.bounds) + 1
    # entries that moved must have reached a bound, except at most one
    moved = s.v != p.current
    interior = (s.v > p.bounds[0]) & (s.v < p.bounds[1])
    assert np.count_nonzero(moved & interior) <= 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 50), st.booleans())
def test_alpha_is_fixed_point_and_distance(seed, n, ties):
    p = _instance(seed, n, ties=ties)
    s = solve_quickselect(p)
    s_low, s_high = forced_move(*transform(p), s.alpha)
    assert s_low - 1e-12 <= s.alpha <= s_high + 1e-12
    assert float(p.areas @ np.abs(s.v - p.current)) == pytest.approx(s.alpha, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.floats(1.1, 10.0))
def test_larger_stepsize_parameter_moves_less(seed, n, factor):
    p = _instance(seed, n)
    q = ProxProblem(p.gamma, p.areas, p.current, p.stepsize * factor, p.bounds)
    assert solve_quickselect(q).alpha <= solve_quickselect(p).alpha + 1e-14


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.sampled_from([0.25, 2.0, 8.0]))
def test_scaling_gradient_and_stepsize_together(seed, n, c):
    p = _instance(seed, n)
    q = ProxProblem(c * p.gamma, p.areas, p.current, c * p.stepsize, p.bounds)
    np.testing.assert_allclose(solve_sorted(q).v, solve_sorted(p).v, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=200), st.data())
def test_select_kth_matches_sort(vals, data):
    k = data.draw(st.integers(0, len(vals) - 1))
    want = float(np.sort(vals)[k])
    assert select_kth(vals, k, rng=np.random.default_rng(0)) == want
    assert select_kth(vals, k, pivot="median_of_medians") == want


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300))
def test_median_of_medians_is_central(vals):
    arr = np.array(vals)
    piv = median_of_medians(arr)
    assert piv in arr
    if arr.size >= 50:
        below = np.count_nonzero(arr < piv) / arr.size
        above = np.count_nonzero(arr > piv) / arr.size
        assert below <= 0.75 and above <= 0.75


def test_select_kth_out_of_range():
    with pytest.raises(IndexError):
        select_kth([1.0, 2.0], 2)


def test_runtime_roughly_linear():
    rng = np.random.default_rng(0)

    def best_time(n):
        a = np.full(n, 1.0 / n)
        p = ProxProblem(rng.standard_normal(n) * a, a, rng.uniform(*BOUNDS, n), 1.0, BOUNDS)
        times = []
        for _ in range(3):
            t0 = time.perf_counter()
            solve_quickselect(p)
            times.append(time.perf_counter() - t0)
        return min(times)

    # soft check: doubling N should far less than quadruple the time
    small, big = best_time(2**18), best_time(2**19)
    assert big / small <= 3.0
