import numpy as np
import pytest

from treeprune import numcore, oracle
from treeprune.approx import (CbcdState, CutPools, PathConfig, active_set_fit,
                              block_solve, cbcd_fit, fit_path, lambda_grid,
                              recompute_objective, select_k, state_selection)
from treeprune.rulespace import AttributeScheme, attribute_values

from conftest import single_tree_instance, toy_instance

RNG = np.random.default_rng


def test_block_solve_matches_exhaustive_search():
    for seed in range(10):
        rs, v = single_tree_instance(seed, depth=3)
        rng = RNG(500 + seed)
        r = v + 0.3 * rng.standard_normal(v.shape)
        lam = float(rng.uniform(0.05, 3.0))
        gamma = float(rng.uniform(0.2, 4.0))
        scheme = [AttributeScheme.RULE, AttributeScheme.DEPTH,
                  AttributeScheme.FEATURE][seed % 3]
        pools = CutPools(rs, gamma)
        out = block_solve(rs, 0, r, lam, gamma, scheme, pools, ())
        want, want_s = oracle.brute_force_penalized(rs, 0, r, gamma, lam,
                                                    scheme)
        assert out.value == pytest.approx(want, abs=1e-8)
        assert rs.is_antichain(out.support)
        if out.support != want_s:
            # ties happen; values must still agree
            alt = numcore.objective_q(rs, gamma, out.support, r)
            assert alt + lam * sum(1 for _ in out.support) >= want - 1e-8


def test_block_solve_branch_and_bound_engine_agrees():
    # disable the enumerated matrices so the antichain search path runs
    for seed in range(10):
        rs, v = single_tree_instance(seed, depth=3)
        rng = RNG(800 + seed)
        r = v + 0.3 * rng.standard_normal(v.shape)
        lam = float(rng.uniform(0.05, 3.0))
        gamma = float(rng.uniform(0.2, 4.0))
        scheme = [AttributeScheme.RULE, AttributeScheme.DEPTH,
                  AttributeScheme.FEATURE][seed % 3]
        pools = CutPools(rs, gamma)
        pools._enum[0] = None
        out = block_solve(rs, 0, r, lam, gamma, scheme, pools, ())
        want, _ = oracle.brute_force_penalized(rs, 0, r, gamma, lam, scheme)
        assert out.value == pytest.approx(want, abs=1e-8)
        assert rs.is_antichain(out.support)


def test_block_solve_on_multi_tree_residual():
    rs, v = toy_instance(4)
    rng = RNG(7)
    r = v - 0.2 * rng.standard_normal(v.shape)
    pools = CutPools(rs, 1.5)
    for t in range(len(rs.trees)):
        out = block_solve(rs, t, r, 0.4, 1.5, AttributeScheme.RULE, pools, ())
        want, _ = oracle.brute_force_penalized(rs, t, r, 1.5, 0.4,
                                               AttributeScheme.RULE)
        assert out.value == pytest.approx(want, abs=1e-8)
        meta = rs.trees[t]
        assert all(meta.offset <= c < meta.offset + meta.num_cols
                   for c in out.support)


def test_high_penalty_screens_every_block():
    rs, v = toy_instance(2)
    counters: dict = {}
    state = cbcd_fit(rs, v, 1e7, 1.0, AttributeScheme.RULE,
                     counters=counters)
    assert state.num_rules() == 0
    assert counters.get("ilp_solves", 0) == 0
    assert counters["screen_skips"] > 0
    for t in range(len(rs.trees)):
        want, want_s = oracle.brute_force_penalized(
            rs, t, v, 1.0, 1e7, AttributeScheme.RULE)
        assert want_s == ()


def test_descent_and_objective_bookkeeping():
    rs, v = toy_instance(3)
    counters: dict = {}
    state = cbcd_fit(rs, v, 0.2, 2.0, AttributeScheme.DEPTH,
                     counters=counters, validate=True)
    trace = state.objective_trace
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
    assert counters.get("descent_worst_rise", 0.0) <= 1e-9
    assert state.objective == pytest.approx(
        recompute_objective(rs, v, state), rel=1e-10)
    assert not state.sweep_limit_hit


def test_warm_start_never_hurts():
    rs, v = toy_instance(1)
    pools = CutPools(rs, 1.0)
    cold = cbcd_fit(rs, v, 0.5, 1.0, AttributeScheme.RULE, pools=pools)
    warm = cbcd_fit(rs, v, 0.8, 1.0, AttributeScheme.RULE, warm=cold,
                    pools=pools)
    # the incumbent includes the warm selection, so descent cannot land
    # above the warm state rescored under the new penalty
    rescored = cbcd_fit(rs, v, 0.8, 1.0, AttributeScheme.RULE, warm=cold,
                        pools=pools, max_sweeps=0)
    assert warm.objective <= rescored.objective + 1e-9


def test_sweep_cap_sets_flag():
    rs, v = toy_instance(0)
    state = cbcd_fit(rs, v, 1e-4, 4.0, AttributeScheme.RULE, max_sweeps=1,
                     tol=0.0)
    assert state.sweeps == 1
    assert state.sweep_limit_hit


def test_recycled_cuts_match_fresh_ones():
    rs, v = toy_instance(2)
    cfg = PathConfig(lambdas=lambda_grid(0.05, 20.0, 8), gamma=1.0,
                     check_recycled=True)
    counters = fit_path(rs, v, cfg).counters
    assert counters["recycled_cuts"] > 0
    assert counters["recycle_checks"] == counters["recycled_cuts"]
    assert counters["recycle_check_max_err"] <= 1e-10


def test_recycling_cuts_master_solve_count():
    rs, v = toy_instance(4)
    grid = lambda_grid(0.05, 20.0, 10)
    with_pool = fit_path(rs, v, PathConfig(lambdas=grid)).counters
    without = fit_path(rs, v, PathConfig(lambdas=grid,
                                         recycle=False)).counters
    assert with_pool["recycled_cuts"] > 0
    assert without.get("recycled_cuts", 0) == 0
    assert with_pool["ilp_solves"] < without["ilp_solves"]


def test_pool_eviction_is_fifo():
    rs, v = single_tree_instance(1)
    pools = CutPools(rs, 1.0, cap=2)
    cols = [c for c in range(rs.m) if rs.is_antichain((c,))]
    pools.remember(0, (cols[0],))
    pools.remember(0, (cols[1],))
    pools.remember(0, (cols[2],))
    kept = pools.supports(0)
    assert len(kept) == 2
    assert (cols[0],) not in kept
    pools.remember(0, (cols[1],))  # re-remember keeps position, no dup
    assert len(pools.supports(0)) == 2


def test_lambda_grid_shape():
    g = lambda_grid(1.0, 1000.0, 50)
    assert len(g) == 50
    assert g[0] == pytest.approx(1000.0)
    assert g[-1] == pytest.approx(1.0)
    assert all(b < a for a, b in zip(g, g[1:]))
    with pytest.raises(ValueError):
        lambda_grid(10.0, 1.0, 5)


def test_path_config_requires_descending_grid():
    with pytest.raises(ValueError, match="nonincreasing"):
        PathConfig(lambdas=np.array([1.0, 2.0, 3.0]))
    cfg = PathConfig()
    assert len(cfg.lambdas) == 50


def test_path_points_are_consistent():
    rs, v = toy_instance(3)
    cfg = PathConfig(lambdas=lambda_grid(0.1, 30.0, 12), gamma=1.0)
    path = fit_path(rs, v, cfg)
    assert len(path.points) == 12
    assert path.empty_objective == pytest.approx(0.5 * float(v @ v))
    for pt in path.points:
        sel = pt.selection
        assert pt.num_rules == len(sel.support)
        rs.validate_selection(sel, cfg.scheme)
        assert pt.train_obj <= path.empty_objective + 1e-9
        a = attribute_values(rs, cfg.scheme)
        assert pt.attribute_sum == int(a[list(sel.support)].sum())
    sizes = [p.num_rules for p in path.points]
    assert sizes[-1] >= sizes[0]  # small penalties keep more rules


def test_state_selection_is_a_global_refit():
    rs, v = toy_instance(2)
    state = cbcd_fit(rs, v, 0.3, 1.0, AttributeScheme.RULE)
    sel = state_selection(rs, v, 1.0, AttributeScheme.RULE, state)
    want_obj, want_w = oracle.ridge_direct(rs, 1.0, sel.support, v)
    assert sel.objective == pytest.approx(want_obj, rel=1e-10)
    np.testing.assert_allclose(sel.weights, want_w, atol=1e-10)
    assert sel.objective <= recompute_objective(rs, v, state) + 1e-9


def test_select_k_respects_budget_and_prefers_fuller_models():
    rs, v = toy_instance(4)
    cfg = PathConfig(lambdas=lambda_grid(0.05, 40.0, 15), gamma=1.0)
    path = fit_path(rs, v, cfg)
    for K in (1, 2, 4, 6):
        sel = select_k(path, K, AttributeScheme.RULE)
        assert sel.attribute_sum <= K
        feasible = [p for p in path.points
                    if p.attribute_sum <= K and p.num_rules > 0]
        if feasible:
            best_a = max(p.attribute_sum for p in feasible)
            assert sel.attribute_sum == best_a


def test_select_k_empty_path_falls_back_to_intercept():
    rs, v = toy_instance(0)
    cfg = PathConfig(lambdas=lambda_grid(1e5, 1e6, 3), gamma=1.0)
    path = fit_path(rs, v, cfg)
    sel = select_k(path, 5, AttributeScheme.RULE)
    assert sel.support == ()
    assert sel.objective == pytest.approx(0.5 * float(v @ v))


def test_select_k_rescores_attributes_for_requested_scheme():
    rs, v = toy_instance(3)
    cfg = PathConfig(lambdas=lambda_grid(0.05, 20.0, 10), gamma=1.0,
                     scheme=AttributeScheme.RULE)
    path = fit_path(rs, v, cfg)
    from treeprune.rulespace import attribute_values
    depths = attribute_values(rs, AttributeScheme.DEPTH)
    sel = select_k(path, 6, AttributeScheme.DEPTH)
    assert int(depths[list(sel.support)].sum()) <= 6


def test_active_set_tracks_plain_descent():
    rs, v = toy_instance(4)
    plain_c: dict = {}
    active_c: dict = {}
    plain = cbcd_fit(rs, v, 0.3, 1.0, AttributeScheme.RULE,
                     counters=plain_c)
    active = active_set_fit(rs, v, 0.3, 1.0, AttributeScheme.RULE,
                            counters=active_c)
    assert active_c.get("descent_worst_rise", 0.0) <= 1e-9
    assert active.objective == pytest.approx(plain.objective, rel=1e-6)
    assert active.merged_support() == plain.merged_support()
