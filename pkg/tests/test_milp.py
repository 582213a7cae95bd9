import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from treeprune.milp import (BnBConfig, MasterProblem, antichain_parents_from_cliques,
                            bnb_solve, lp_solve, max_weight_antichain,
                            min_max_budgeted, min_max_over_antichains,
                            simplex_solve, solve_master)
from treeprune.numcore import Cut


def _cut(constant, gradient):
    g = np.asarray(gradient, dtype=np.float64)
    return Cut(constant=constant, gradient=g, origin=(),
               value_at_origin=constant)


def _random_box_lp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, 8))
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m) * 2.0 + 1.0
    c = rng.standard_normal(n)
    lb = rng.uniform(-2.0, 0.0, n)
    ub = lb + rng.uniform(0.5, 3.0, n)
    return c, A, b, lb, ub


def test_simplex_matches_scipy_on_random_instances():
    statuses = set()
    for seed in range(20):
        c, A, b, lb, ub = _random_box_lp(seed)
        status, x, obj = simplex_solve(c, A, b, lb, ub)
        ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(lb, ub)),
                      method="highs")
        if ref.status == 2:
            assert status == "infeasible"
        else:
            assert ref.status == 0
            assert status == "optimal"
            assert obj == pytest.approx(ref.fun, abs=1e-7)
            assert np.all(A @ x <= b + 1e-7)
            assert np.all(x >= lb - 1e-9) and np.all(x <= ub + 1e-9)
        statuses.add(status)
    assert "optimal" in statuses


def test_simplex_detects_unbounded():
    status, _, _ = simplex_solve(
        c=np.array([-1.0]), A=np.zeros((1, 1)), b=np.array([1.0]),
        lb=np.array([0.0]), ub=np.array([np.inf]))
    assert status == "unbounded"


def test_simplex_detects_infeasible():
    status, _, _ = simplex_solve(
        c=np.array([1.0]), A=np.array([[1.0]]), b=np.array([-1.0]),
        lb=np.array([0.0]), ub=np.array([np.inf]))
    assert status == "infeasible"


def test_simplex_requires_finite_lower_bounds():
    with pytest.raises(ValueError, match="finite lower"):
        simplex_solve(np.array([1.0]), np.array([[1.0]]), np.array([1.0]),
                      np.array([-np.inf]), np.array([np.inf]))


def test_simplex_optimum_at_upper_bounds():
    status, x, obj = simplex_solve(
        c=np.array([-1.0, -1.0]), A=np.array([[1.0, 1.0]]),
        b=np.array([10.0]), lb=np.zeros(2), ub=np.ones(2))
    assert status == "optimal"
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-9)
    assert obj == pytest.approx(-2.0)


def test_simplex_handles_degenerate_rows():
    # many copies of the same binding constraint force degenerate pivots
    A = np.ones((6, 2))
    b = np.ones(6)
    status, x, obj = simplex_solve(np.array([-1.0, -0.5]), A, b,
                                   np.zeros(2), np.full(2, np.inf))
    assert status == "optimal"
    assert obj == pytest.approx(-1.0)


def _random_forest(rng, k):
    parents = np.full(k, -1, dtype=np.int64)
    for i in range(1, k):
        parents[i] = int(rng.integers(-1, i))
    children = [[] for _ in range(k)]
    for i in range(k):
        if parents[i] >= 0:
            children[parents[i]].append(i)
    cliques = []
    for i in range(k):
        if not children[i] and parents[i] >= 0:
            path = []
            cur = i
            while cur >= 0:
                path.append(cur)
                cur = parents[cur]
            cliques.append(np.array(path[::-1], dtype=np.int64))
    return parents, cliques


def _brute_master(mp):
    best_val, best_z = np.inf, None
    for bits in itertools.product((0, 1), repeat=mp.num_z):
        z = np.array(bits, dtype=np.float64)
        if any(z[np.asarray(cl)].sum() > 1 for cl in mp.cliques):
            continue
        if mp.budget is not None and float(mp.attrs @ z) > mp.budget:
            continue
        val = max(cut.constant + float(cut.gradient @ z) for cut in mp.cuts)
        if val < best_val:
            best_val, best_z = val, z
    return best_val, best_z


def test_bnb_matches_enumeration_on_random_masters():
    for seed in range(25):
        rng = np.random.default_rng(100 + seed)
        k = int(rng.integers(3, 11))
        _, cliques = _random_forest(rng, k)
        cuts = [_cut(float(rng.standard_normal() * 3),
                     rng.standard_normal(k) * 2)
                for _ in range(int(rng.integers(1, 5)))]
        attrs = rng.integers(1, 4, size=k).astype(np.float64)
        budget = int(rng.integers(1, 2 * k))
        mp = MasterProblem(k, cliques, cuts=cuts, attrs=attrs, budget=budget)
        res = bnb_solve(mp, BnBConfig(rel_gap_tol=1e-12))
        want, _ = _brute_master(mp)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(want, abs=1e-9)
        assert res.bound <= want + 1e-9
        zi = res.z.astype(np.int64)
        assert all(zi[np.asarray(cl)].sum() <= 1 for cl in mp.cliques)
        assert float(attrs @ zi) <= budget


def test_bnb_respects_hard_fixings():
    cuts = [_cut(0.0, [-1.0, -2.0, -3.0])]
    mp = MasterProblem(3, [], cuts=cuts, z_lb=np.array([0.0, 0.0, 0.0]),
                       z_ub=np.array([1.0, 1.0, 0.0]))
    res = bnb_solve(mp)
    assert res.z.tolist() == [1, 1, 0]
    assert res.objective == pytest.approx(-3.0)


def test_master_requires_a_cut():
    mp = MasterProblem(2, [])
    with pytest.raises(ValueError, match="at least one cut"):
        lp_solve(mp)


def test_master_budget_needs_attrs():
    with pytest.raises(ValueError, match="together"):
        MasterProblem(2, [], budget=1)


def test_lp_relaxation_of_master():
    # nu >= 3 - z0 over z in [0,1]: relaxed optimum nu = 2 at z0 = 1
    mp = MasterProblem(1, [], cuts=[_cut(3.0, [-1.0])])
    status, obj, x = lp_solve(mp)
    assert status == "optimal"
    assert obj == pytest.approx(2.0, abs=1e-9)
    assert x[0] == pytest.approx(1.0, abs=1e-9)


def test_to_lp_text_mentions_all_rows():
    mp = MasterProblem(2, [np.array([0, 1])], cuts=[_cut(1.0, [0.5, -0.5])],
                       attrs=np.array([1.0, 1.0]), budget=1)
    text = mp.to_lp_text()
    assert text.startswith("Minimize")
    for token in ("cut0", "clique0", "budget", "Bounds", "nu free", "End"):
        assert token in text


def test_parents_recovered_from_cliques():
    rng = np.random.default_rng(0)
    parents, cliques = _random_forest(rng, 9)
    got = antichain_parents_from_cliques(9, cliques)
    # nodes on no clique (childless roots) stay -1 in both
    np.testing.assert_array_equal(got, parents)


def test_parents_rejects_non_forest():
    bad = [np.array([0, 2]), np.array([1, 2])]  # node 2 with two parents
    with pytest.raises(ValueError, match="forest"):
        antichain_parents_from_cliques(3, bad)


def _brute_antichain(parents, weights):
    k = len(parents)
    anc = [set() for _ in range(k)]
    for i in range(k):
        p = parents[i]
        while p >= 0:
            anc[i].add(p)
            p = parents[p]
    best = 0.0
    for bits in itertools.product((0, 1), repeat=k):
        chosen = [i for i in range(k) if bits[i]]
        ok = all(not (anc[i] & set(chosen)) for i in chosen)
        if ok:
            best = max(best, sum(weights[i] for i in chosen))
    return best


def test_max_weight_antichain_matches_brute_force():
    for seed in range(30):
        rng = np.random.default_rng(200 + seed)
        k = int(rng.integers(1, 12))
        parents, _ = _random_forest(rng, k)
        weights = rng.standard_normal(k)
        value, picked = max_weight_antichain(parents, weights)
        assert value == pytest.approx(_brute_antichain(parents, weights),
                                      abs=1e-12)
        assert value == pytest.approx(sum(weights[i] for i in picked) if picked
                                      else 0.0, abs=1e-12)
        # picked nodes are pairwise incomparable and never nonpositive
        chosen = set(picked)
        for i in picked:
            assert weights[i] > 0.0
            p = parents[i]
            while p >= 0:
                assert p not in chosen
                p = parents[p]


def test_max_weight_antichain_requires_topological_ids():
    with pytest.raises(ValueError, match="precede"):
        max_weight_antichain(np.array([1, -1]), np.array([1.0, 1.0]))


def test_min_max_over_antichains_matches_enumeration():
    for seed in range(40):
        rng = np.random.default_rng(300 + seed)
        k = int(rng.integers(1, 11))
        parents, cliques = _random_forest(rng, k)
        cuts = [_cut(float(rng.standard_normal() * 3),
                     rng.standard_normal(k) * 2)
                for _ in range(int(rng.integers(1, 6)))]
        mp = MasterProblem(k, cliques, cuts=cuts)
        want, _ = _brute_master(mp)
        consts = np.array([ct.constant for ct in cuts])
        grads = np.stack([ct.gradient for ct in cuts])
        value, z = min_max_over_antichains(parents, consts, grads)
        achieved = max(ct.constant + float(ct.gradient @ z) for ct in cuts)
        assert value == pytest.approx(want, abs=1e-9)
        assert achieved == pytest.approx(want, abs=1e-9)
        zi = z.astype(np.int64)
        assert all(zi[np.asarray(cl)].sum() <= 1 for cl in mp.cliques)


def test_min_max_over_antichains_trivial_sizes():
    # no columns: the constant max; one column: pick iff every cut agrees
    value, z = min_max_over_antichains(np.zeros(0, dtype=np.int64),
                                       np.array([2.0, -1.0]),
                                       np.zeros((2, 0)))
    assert value == pytest.approx(2.0) and z.size == 0
    value, z = min_max_over_antichains(np.array([-1]), np.array([1.0]),
                                       np.array([[-3.0]]))
    assert value == pytest.approx(-2.0) and z.tolist() == [1.0]


def test_min_max_budgeted_matches_enumeration():
    for seed in range(40):
        rng = np.random.default_rng(400 + seed)
        k = int(rng.integers(2, 11))
        parents, cliques = _random_forest(rng, k)
        cuts = [_cut(float(rng.standard_normal() * 3),
                     rng.standard_normal(k) * 2)
                for _ in range(int(rng.integers(1, 6)))]
        # zero-cost columns and budget 0 are both legal
        attrs = rng.integers(0, 4, size=k).astype(np.float64)
        budget = int(rng.integers(0, 2 * k))
        mp = MasterProblem(k, cliques, cuts=cuts, attrs=attrs, budget=budget)
        want, _ = _brute_master(mp)
        consts = np.array([ct.constant for ct in cuts])
        grads = np.stack([ct.gradient for ct in cuts])
        value, z = min_max_budgeted(parents, attrs.astype(np.int64), budget,
                                    consts, grads)
        achieved = max(ct.constant + float(ct.gradient @ z) for ct in cuts)
        assert value == pytest.approx(want, abs=1e-9)
        assert achieved == pytest.approx(want, abs=1e-9)
        zi = z.astype(np.int64)
        assert all(zi[np.asarray(cl)].sum() <= 1 for cl in mp.cliques)
        assert float(attrs @ zi) <= budget


def test_solve_master_dispatch_agrees_with_lp_engine():
    for seed in range(15):
        rng = np.random.default_rng(500 + seed)
        k = int(rng.integers(3, 11))
        _, cliques = _random_forest(rng, k)
        cuts = [_cut(float(rng.standard_normal() * 3),
                     rng.standard_normal(k) * 2)
                for _ in range(int(rng.integers(1, 5)))]
        attrs = rng.integers(1, 4, size=k).astype(np.float64)
        budget = int(rng.integers(1, 2 * k))
        mp = MasterProblem(k, cliques, cuts=cuts, attrs=attrs, budget=budget)
        dp = solve_master(mp, BnBConfig(rel_gap_tol=1e-12))
        lp = bnb_solve(mp, BnBConfig(rel_gap_tol=1e-12))
        assert dp.status == "optimal"
        assert dp.objective == pytest.approx(lp.objective, abs=1e-9)
        assert dp.bound == pytest.approx(lp.objective, abs=1e-9)


def test_solve_master_falls_back_without_budget():
    # budgetless masters take the LP path and still solve correctly
    cuts = [_cut(0.0, [-1.0, -2.0]), _cut(-1.5, [0.5, 0.0])]
    mp = MasterProblem(2, [np.array([0, 1])], cuts=cuts)
    res = solve_master(mp)
    want, _ = _brute_master(mp)
    assert res.objective == pytest.approx(want, abs=1e-9)


def test_solve_master_fractional_attrs_fall_back():
    cuts = [_cut(0.0, [-2.0, -1.0, -0.5])]
    mp = MasterProblem(3, [], cuts=cuts,
                       attrs=np.array([0.5, 1.5, 1.0]), budget=2)
    res = solve_master(mp, BnBConfig(rel_gap_tol=1e-12))
    want, _ = _brute_master(mp)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(want, abs=1e-9)
