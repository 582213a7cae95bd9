"""Penalized block coordinate descent over trees, with cut recycling.

One block = one tree. A block update solves the single-tree selection problem
against the residual left by all other trees (an outer-approximation loop on
a small master MILP), refits the block's weights, and moves on. The update
never returns a support worse than the incumbent it started from, so the
penalized objective is nonincreasing across block updates.

Cut pools: every support evaluated anywhere keeps its factorization; before a
block's master is first solved, all pooled supports for that tree are
re-priced against the current residual and penalty (back-substitutions only)
and injected as cuts. Pools persist across sweeps and across the lambda grid,
which is what makes warm-started paths cheap.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import numcore
from .milp import (BnBConfig, antichain_parents_from_cliques,
                   min_max_over_antichains)
from .rulespace import (AttributeScheme, RuleSpace, Selection, attribute_values,
                        features_on_path)

_BLOCK_ITER_CAP = 200
_ENUM_ROWS_CAP = 20_000


def default_bnb_config() -> BnBConfig:
    # masters are tiny; close the gap completely so block optima are exact
    return BnBConfig(rel_gap_tol=1e-12, int_tol=1e-6)


def _tree_antichain_matrix(rs: RuleSpace, tree: int,
                           cap: int = _ENUM_ROWS_CAP):
    """Indicator matrix of every antichain of one tree, or None past `cap`.

    Rows enumerate the full feasible set of a single-tree master, so the
    master ILP reduces to one matrix product; trees too bushy for that fall
    back to branch and bound.
    """
    meta = rs.trees[tree]
    n_cols = meta.num_cols
    kids: list[list[int]] = [[] for _ in range(n_cols)]
    roots: list[int] = []
    for j in range(n_cols):
        pnode = int(meta.parent[int(meta.node_of_col[j])])
        while pnode >= 0 and meta.col_of_node[pnode] < 0:
            pnode = int(meta.parent[pnode])
        if pnode >= 0:
            kids[int(meta.col_of_node[pnode]) - meta.offset].append(j)
        else:
            roots.append(j)

    def count(j: int) -> int:
        total = 1
        for ch in kids[j]:
            total *= count(ch)
            if total > cap:
                return total
        return total + 1

    rows = 1
    for rt in roots:
        rows *= count(rt)
        if rows > cap:
            return None

    def sets(j: int) -> list[list[int]]:
        below: list[list[int]] = [[]]
        for ch in kids[j]:
            below = [a + b for a in below for b in sets(ch)]
        below.append([j])
        return below

    combos: list[list[int]] = [[]]
    for rt in roots:
        combos = [a + b for a in combos for b in sets(rt)]
    Z = np.zeros((len(combos), n_cols))
    for r, s in enumerate(combos):
        Z[r, s] = 1.0
    return Z


class CutPools:
    """Per-tree FIFO pools of visited supports plus a shared factor cache."""

    def __init__(self, rs: RuleSpace, gamma: float, cap: int = 200):
        self.cache = numcore.FactorCache(rs, gamma)
        self.pools: list[OrderedDict] = [OrderedDict() for _ in rs.trees]
        self.cap = cap
        self.rs = rs
        self._enum: dict[int, np.ndarray | None] = {}
        self._parents: dict[int, np.ndarray] = {}

    def fact(self, tree: int, support) -> numcore.SupportFactorization:
        return self.cache.get(tuple(support), tree)

    def remember(self, tree: int, support) -> None:
        pool = self.pools[tree]
        key = tuple(support)
        if key not in pool:
            pool[key] = None
            if len(pool) > self.cap:
                pool.popitem(last=False)

    def supports(self, tree: int) -> list[tuple]:
        return list(self.pools[tree])

    def antichain_matrix(self, tree: int):
        if tree not in self._enum:
            self._enum[tree] = _tree_antichain_matrix(self.rs, tree)
        return self._enum[tree]

    def local_parents(self, tree: int) -> np.ndarray:
        if tree not in self._parents:
            meta = self.rs.trees[tree]
            self._parents[tree] = antichain_parents_from_cliques(
                meta.num_cols, [cl - meta.offset for cl in meta.cliques])
        return self._parents[tree]


@dataclass
class BlockOutcome:
    support: tuple[int, ...]   # global column ids
    weights: np.ndarray
    value: float               # q_r + lambda * attribute sum
    ilp_solves: int
    screened: bool = False


def block_solve(rs: RuleSpace, tree: int, r: np.ndarray, lam: float,
                gamma: float, scheme: AttributeScheme, pools: CutPools,
                warm, *, bnb: BnBConfig | None = None, recycle: bool = True,
                check_recycled: bool = False, counters: dict | None = None,
                rel_tol: float = 1e-9) -> BlockOutcome:
    """Optimal single-tree selection against residual r (penalized form)."""
    bnb = bnb or default_bnb_config()
    counters = counters if counters is not None else {}
    meta = rs.trees[tree]
    offset = meta.offset
    warm = tuple(sorted(int(c) for c in warm))
    _bump(counters, "block_updates")

    evaluated: dict[tuple, float] = {}

    def q_of(support: tuple) -> float:
        fact = pools.fact(tree, support)
        val = fact.objective(r) + lam * _attr_sum(rs, scheme, support)
        evaluated[support] = val
        pools.remember(tree, support)
        return val

    def cut_of(support: tuple, recycled: bool) -> numcore.Cut:
        cut = numcore.recycle_cut(pools.fact(tree, support), r, lam, scheme)
        if recycled:
            _bump(counters, "recycled_cuts")
            if check_recycled:
                fresh = numcore.cut_at(
                    numcore.SupportFactorization(rs, gamma, support, tree),
                    r, lam, scheme)
                err = max(abs(cut.constant - fresh.constant),
                          float(np.max(np.abs(cut.gradient - fresh.gradient))),
                          abs(cut.value_at_origin - fresh.value_at_origin))
                _bump(counters, "recycle_checks")
                counters["recycle_check_max_err"] = max(
                    counters.get("recycle_check_max_err", 0.0), err)
        return cut

    empty_cut = cut_of((), recycled=False)
    q_empty = empty_cut.value_at_origin
    evaluated[()] = q_empty
    pools.remember(tree, ())

    # With an empty warm start, the empty-support cut alone bounds the master
    # below by q_r(empty) whenever its gradient is componentwise nonnegative,
    # so the empty selection is provably optimal and no master is needed.
    if warm == () and np.all(empty_cut.gradient >= -1e-12):
        _bump(counters, "screen_skips")
        return BlockOutcome((), np.zeros(0), q_empty, 0, screened=True)

    inc_s, inc_q = (), q_empty
    cuts = [empty_cut]
    if warm != ():
        q_warm = q_of(warm)
        if q_warm < inc_q:
            inc_s, inc_q = warm, q_warm
        cuts.append(cut_of(warm, recycled=False))
    if recycle:
        for s in pools.supports(tree):
            if s in evaluated:
                continue
            cuts.append(cut_of(s, recycled=True))

    # Single-tree masters over few enough antichains are solved by direct
    # enumeration (one matmul per solve); bushier trees get the antichain
    # branch and bound, which never touches an LP.
    Z = pools.antichain_matrix(tree)
    if Z is None:
        parents = pools.local_parents(tree)
    solves = 0
    for _ in range(_BLOCK_ITER_CAP):
        consts = np.array([ct.constant for ct in cuts])
        grads = np.stack([ct.gradient for ct in cuts])
        if Z is not None:
            row_best = (consts[None, :] + Z @ grads.T).max(axis=1)
            idx = int(np.argmin(row_best))
            bound_val = float(row_best[idx])
            zrow = Z[idx]
        else:
            bound_val, zrow = min_max_over_antichains(
                parents, consts, grads, rel_tol=bnb.rel_gap_tol)
        solves += 1
        _bump(counters, "ilp_solves")
        if inc_q - bound_val <= rel_tol * max(1.0, abs(inc_q)):
            break
        s_new = tuple(int(offset + i) for i in np.flatnonzero(zrow))
        if s_new in evaluated:
            break  # already cut; bounds cannot separate further
        q_new = q_of(s_new)
        if q_new < inc_q:
            inc_s, inc_q = s_new, q_new
        cuts.append(cut_of(s_new, recycled=False))
    else:
        _bump(counters, "block_iter_limit")

    weights = pools.fact(tree, inc_s).weights(r) if inc_s else np.zeros(0)
    return BlockOutcome(inc_s, weights, inc_q, solves)


@dataclass
class CbcdState:
    supports: list            # per tree: tuple of global column ids
    weights: list             # per tree: ndarray aligned with support
    total_pred: np.ndarray
    penalties: np.ndarray     # per tree: ||w||^2/(2 gamma) + lambda * attrs
    objective: float
    lam: float
    gamma: float
    scheme: AttributeScheme
    sweeps: int = 0
    sweep_limit_hit: bool = False
    counters: dict = field(default_factory=dict)
    objective_trace: list = field(default_factory=list)

    def merged_support(self) -> tuple[int, ...]:
        out: list[int] = []
        for s in self.supports:
            out.extend(s)
        return tuple(sorted(out))

    def num_rules(self) -> int:
        return sum(len(s) for s in self.supports)


def _attr_sum(rs, scheme, support) -> int:
    if not support:
        return 0
    a = attribute_values(rs, scheme)
    return int(a[list(support)].sum())


def _bump(counters: dict, key: str, by: int = 1) -> None:
    counters[key] = counters.get(key, 0) + by


def _init_state(rs, y, lam, gamma, scheme, warm, counters) -> CbcdState:
    T = len(rs.trees)
    if warm is None:
        supports = [() for _ in range(T)]
        weights = [np.zeros(0) for _ in range(T)]
    else:
        supports = [tuple(s) for s in warm.supports]
        weights = [w.copy() for w in warm.weights]
    total_pred = np.zeros(rs.n)
    penalties = np.zeros(T)
    for t in range(T):
        if supports[t]:
            rs.scatter_add(total_pred, supports[t], weights[t])
            penalties[t] = (float(weights[t] @ weights[t]) / (2.0 * gamma)
                            + lam * _attr_sum(rs, scheme, supports[t]))
    resid = y - total_pred
    objective = 0.5 * float(resid @ resid) + float(penalties.sum())
    return CbcdState(supports, weights, total_pred, penalties, objective,
                     lam, gamma, scheme, counters=counters)


def _update_block(rs, y, state: CbcdState, t: int, pools, opts) -> float:
    """One block update; returns the objective improvement (>= 0 up to noise)."""
    contrib_old = rs.predict_columns(state.supports[t], state.weights[t])
    r = y - state.total_pred + contrib_old
    out = block_solve(rs, t, r, state.lam, state.gamma, state.scheme, pools,
                      state.supports[t], bnb=opts["bnb"],
                      recycle=opts["recycle"],
                      check_recycled=opts["check_recycled"],
                      counters=state.counters, rel_tol=opts["block_tol"])
    before = state.objective
    state.supports[t] = out.support
    state.weights[t] = out.weights
    if out.support or contrib_old.any():
        contrib_new = rs.predict_columns(out.support, out.weights)
        state.total_pred += contrib_new - contrib_old
    state.penalties[t] = (float(out.weights @ out.weights) / (2.0 * state.gamma)
                          + state.lam * _attr_sum(rs, state.scheme, out.support))
    resid = y - state.total_pred
    state.objective = 0.5 * float(resid @ resid) + float(state.penalties.sum())
    state.objective_trace.append(state.objective)
    rise = state.objective - before
    if rise > state.counters.get("descent_worst_rise", 0.0):
        state.counters["descent_worst_rise"] = rise
    if opts["validate"]:
        fresh = recompute_objective(rs, y, state)
        if abs(fresh - state.objective) > 1e-8 * max(1.0, abs(fresh)):
            raise AssertionError(
                f"objective drift: stored {state.objective!r} vs {fresh!r}")
    return before - state.objective


def recompute_objective(rs: RuleSpace, y: np.ndarray, state: CbcdState) -> float:
    pred = np.zeros(rs.n)
    pen = 0.0
    for t in range(len(rs.trees)):
        rs.scatter_add(pred, state.supports[t], state.weights[t])
        w = state.weights[t]
        pen += (float(w @ w) / (2.0 * state.gamma)
                + state.lam * _attr_sum(rs, state.scheme, state.supports[t]))
    resid = y - pred
    return 0.5 * float(resid @ resid) + pen


def _opts(kwargs: dict) -> dict:
    opts = {
        "tol": 1e-8,
        "block_tol": 1e-9,
        "max_sweeps": 60,
        "n_warm": 2,
        "recycle": True,
        "check_recycled": False,
        "validate": False,
        "bnb": None,
    }
    opts.update(kwargs)
    if opts["bnb"] is None:
        opts["bnb"] = default_bnb_config()
    return opts


def cbcd_fit(rs: RuleSpace, y: np.ndarray, lam: float, gamma: float,
             scheme: AttributeScheme, warm: CbcdState | None = None,
             pools: CutPools | None = None, counters: dict | None = None,
             **kwargs) -> CbcdState:
    """Plain cyclic block descent until a full sweep stops improving."""
    opts = _opts(kwargs)
    y = np.asarray(y, dtype=np.float64)
    pools = pools or CutPools(rs, gamma)
    counters = counters if counters is not None else {}
    state = _init_state(rs, y, lam, gamma, scheme, warm, counters)
    T = len(rs.trees)
    for _ in range(opts["max_sweeps"]):
        improved = 0.0
        for t in range(T):
            improved += _update_block(rs, y, state, t, pools, opts)
        state.sweeps += 1
        _refresh_pred(rs, state)
        if improved <= opts["tol"] * max(1.0, abs(state.objective)):
            break
    else:
        state.sweep_limit_hit = True
    return state


def active_set_fit(rs: RuleSpace, y: np.ndarray, lam: float, gamma: float,
                   scheme: AttributeScheme, warm: CbcdState | None = None,
                   pools: CutPools | None = None, counters: dict | None = None,
                   **kwargs) -> CbcdState:
    """Block descent that cycles only the trees with nonempty selections.

    After `n_warm` full sweeps, updates restrict to the active trees until
    converged, then one full sweep refreshes the active set; the loop ends
    when that refresh neither changes the set nor improves the objective.
    """
    opts = _opts(kwargs)
    y = np.asarray(y, dtype=np.float64)
    pools = pools or CutPools(rs, gamma)
    counters = counters if counters is not None else {}
    state = _init_state(rs, y, lam, gamma, scheme, warm, counters)
    T = len(rs.trees)
    tol = lambda: opts["tol"] * max(1.0, abs(state.objective))

    def sweep(trees) -> float:
        improved = 0.0
        for t in trees:
            improved += _update_block(rs, y, state, t, pools, opts)
        state.sweeps += 1
        _refresh_pred(rs, state)
        return improved

    for _ in range(opts["n_warm"]):
        sweep(range(T))

    budget = opts["max_sweeps"]
    while state.sweeps < budget:
        active = [t for t in range(T) if state.supports[t]]
        while active and state.sweeps < budget:
            if sweep(active) <= tol():
                break
        refresh_gain = sweep(range(T))
        new_active = [t for t in range(T) if state.supports[t]]
        if new_active == active and refresh_gain <= tol():
            break
    else:
        state.sweep_limit_hit = True
    return state


def _refresh_pred(rs, state: CbcdState) -> None:
    """Rebuild the cached prediction to stop incremental drift."""
    pred = np.zeros(rs.n)
    for t in range(len(rs.trees)):
        rs.scatter_add(pred, state.supports[t], state.weights[t])
    state.total_pred = pred


# --- regularization paths -----------------------------------------------------

@dataclass
class PathConfig:
    lambdas: np.ndarray = None
    gamma: float = 1.0
    scheme: AttributeScheme = AttributeScheme.RULE
    tol: float = 1e-8
    block_tol: float = 1e-9
    max_sweeps: int = 60
    n_warm: int = 2
    active_set: bool = True
    recycle: bool = True
    pool_cap: int = 200
    check_recycled: bool = False
    validate: bool = False
    bnb: BnBConfig = field(default_factory=default_bnb_config)

    def __post_init__(self):
        if self.lambdas is None:
            self.lambdas = lambda_grid()
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if np.any(np.diff(self.lambdas) > 0):
            raise ValueError("lambda grid must be nonincreasing "
                             "(traverse from strongest penalty down)")


def lambda_grid(lo: float = 1.0, hi: float = 1000.0, num: int = 50) -> np.ndarray:
    """Log-spaced penalty grid, returned descending (hi -> lo)."""
    if not 0.0 < lo <= hi:
        raise ValueError(f"need 0 < lo <= hi, got lo={lo} hi={hi}")
    if num < 1:
        raise ValueError("grid needs at least one point")
    return np.logspace(math.log10(hi), math.log10(lo), num)


@dataclass
class PathPoint:
    lam: float
    selection: Selection
    penalized_objective: float
    train_obj: float          # refit data objective, no penalty term
    num_rules: int
    attribute_sum: int
    sum_depth: int
    num_features: int
    valid_r2: float | None = None


@dataclass
class PathResult:
    points: list
    counters: dict
    gamma: float
    scheme: AttributeScheme
    rs: RuleSpace
    empty_objective: float


def fit_path(rs: RuleSpace, y: np.ndarray, cfg: PathConfig) -> PathResult:
    """Warm-started descent down the lambda grid, shared cut pools throughout."""
    y = np.asarray(y, dtype=np.float64)
    pools = CutPools(rs, cfg.gamma, cfg.pool_cap)
    counters: dict = {}
    fit = active_set_fit if cfg.active_set else cbcd_fit
    opts = dict(tol=cfg.tol, block_tol=cfg.block_tol, max_sweeps=cfg.max_sweeps,
                n_warm=cfg.n_warm, recycle=cfg.recycle,
                check_recycled=cfg.check_recycled, validate=cfg.validate,
                bnb=cfg.bnb)
    state = None
    points = []
    for lam in cfg.lambdas:
        state = fit(rs, y, float(lam), cfg.gamma, cfg.scheme, warm=state,
                    pools=pools, counters=counters, **opts)
        points.append(_make_point(rs, y, float(lam), cfg, state))
    return PathResult(points, counters, cfg.gamma, cfg.scheme, rs,
                      0.5 * float(y @ y))


def state_selection(rs: RuleSpace, y: np.ndarray, gamma: float,
                    scheme: AttributeScheme, state: CbcdState) -> Selection:
    """Merged support of a descent state with globally refit weights."""
    support = state.merged_support()
    fact = numcore.SupportFactorization(rs, gamma, support)
    a = attribute_values(rs, scheme)
    return Selection(support,
                     fact.weights(y) if support else np.zeros(0),
                     fact.objective(y),
                     int(a[list(support)].sum()) if support else 0)


def _make_point(rs, y, lam, cfg, state: CbcdState) -> PathPoint:
    sel = state_selection(rs, y, cfg.gamma, cfg.scheme, state)
    support = sel.support
    train_obj = sel.objective
    attr_sum = sel.attribute_sum
    feats: set[int] = set()
    for c in support:
        feats |= features_on_path(rs, c)
    return PathPoint(
        lam=lam,
        selection=sel,
        penalized_objective=state.objective,
        train_obj=train_obj,
        num_rules=len(support),
        attribute_sum=attr_sum,
        sum_depth=int(rs.depth[list(support)].sum()) if support else 0,
        num_features=len(feats),
    )


def select_k(path: PathResult, K: int, scheme: AttributeScheme) -> Selection:
    """Densest path point whose attribute sum fits the budget K.

    Ties go to the lower refit objective. If nothing nonempty fits, the empty
    selection is returned.
    """
    a = attribute_values(path.rs, scheme)
    best: PathPoint | None = None
    best_key = None
    for pt in path.points:
        s = pt.selection.support
        asum = int(a[list(s)].sum()) if s else 0
        if asum > K:
            continue
        key = (-asum, pt.train_obj)
        if best is None or key < best_key:
            best, best_key = pt, key
    if best is None or not best.selection.support:
        return Selection.empty(path.empty_objective)
    s = best.selection.support
    return Selection(s, best.selection.weights.copy(), best.train_obj,
                     int(a[list(s)].sum()))
