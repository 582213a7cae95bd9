"""Slow reference implementations used to cross-check the fast paths in tests.

Everything here goes through dense linear algebra and explicit enumeration,
deliberately avoiding the small-system identities, factorization caches, and
cutting planes used by the solvers. Only usable at toy sizes.
"""

from __future__ import annotations

import numpy as np

from .rulespace import AttributeScheme, RuleSpace, attribute_values

_ENUM_LIMIT = 40


def ridge_direct(rs: RuleSpace, gamma: float, support, v: np.ndarray):
    """Penalized least squares on an explicit support via normal equations."""
    v = np.asarray(v, dtype=np.float64)
    support = tuple(int(c) for c in support)
    if not support:
        return 0.5 * float(v @ v), np.zeros(0)
    M = rs.dense_columns(support)
    k = len(support)
    A = M.T @ M + np.eye(k) / gamma
    w = np.linalg.solve(A, M.T @ v)
    r = v - M @ w
    obj = 0.5 * float(r @ r) + float(w @ w) / (2.0 * gamma)
    return obj, w


def relaxed_q_dense(rs: RuleSpace, gamma: float, z: np.ndarray,
                    v: np.ndarray) -> float:
    """Fractional objective via the full n-by-n system, no scaling tricks."""
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    M = rs.dense_columns(range(rs.m))
    H = np.eye(rs.n) + gamma * (M * z) @ M.T
    return 0.5 * float(v @ np.linalg.solve(H, v))


def fd_gradient(rs: RuleSpace, gamma: float, z: np.ndarray, v: np.ndarray,
                h: float = 1e-5, indices=None) -> np.ndarray:
    """Central-difference gradient of the fractional objective."""
    if rs.m > 200:
        raise ValueError("finite differences only intended for toy instances")
    z = np.asarray(z, dtype=np.float64)
    idx = list(range(rs.m)) if indices is None else [int(i) for i in indices]
    out = np.empty(len(idx))
    for j, i in enumerate(idx):
        zp = z.copy()
        zp[i] += h
        zm = z.copy()
        zm[i] -= h
        out[j] = (relaxed_q_dense(rs, gamma, zp, v)
                  - relaxed_q_dense(rs, gamma, zm, v)) / (2.0 * h)
    return out


def enumerate_tree_antichains(rs: RuleSpace, t: int) -> list:
    """Every antichain of one tree's columns (empty tuple included)."""
    meta = rs.trees[t]

    def at(nid: int) -> list:
        ch = meta.children[nid]
        if ch is None:
            combos = [()]
        else:
            left, right = at(ch[0]), at(ch[1])
            combos = [l + r for l in left for r in right]
        col = meta.col_of_node[nid]
        if col >= 0:
            combos.append((int(col),))
        return combos

    return [tuple(sorted(s)) for s in at(0)]


def enumerate_feasible_supports(rs: RuleSpace, K: int, scheme: AttributeScheme):
    """All cross-tree antichain unions within the attribute budget."""
    if rs.m > _ENUM_LIMIT:
        raise ValueError(f"refusing to enumerate {rs.m} columns (> {_ENUM_LIMIT})")
    a = attribute_values(rs, scheme)
    per_tree = [enumerate_tree_antichains(rs, t) for t in range(len(rs.trees))]
    costs = [[int(a[list(s)].sum()) if s else 0 for s in options]
             for options in per_tree]

    def rec(t: int, budget: int):
        if t == len(per_tree):
            yield ()
            return
        for s, cost in zip(per_tree[t], costs[t]):
            if cost > budget:
                continue
            for rest in rec(t + 1, budget - cost):
                yield s + rest

    yield from rec(0, int(K))


def brute_force_budgeted(rs: RuleSpace, y: np.ndarray, gamma: float, K: int,
                         scheme: AttributeScheme, cache: dict | None = None):
    """Exhaustive minimum of the budgeted problem; returns (objective, support).

    `cache` maps support -> objective and may be shared across calls with the
    same (y, gamma) to amortize refits over budgets and schemes.
    """
    y = np.asarray(y, dtype=np.float64)
    cache = {} if cache is None else cache
    best_obj, best_s = np.inf, ()
    for s in enumerate_feasible_supports(rs, K, scheme):
        obj = cache.get(s)
        if obj is None:
            obj, _ = ridge_direct(rs, gamma, s, y)
            cache[s] = obj
        if obj < best_obj:
            best_obj, best_s = obj, s
    return best_obj, best_s


def brute_force_penalized(rs: RuleSpace, t: int, r: np.ndarray, gamma: float,
                          lam: float, scheme: AttributeScheme,
                          cache: dict | None = None):
    """Exhaustive single-tree penalized minimum; returns (objective, support)."""
    r = np.asarray(r, dtype=np.float64)
    a = attribute_values(rs, scheme)
    cache = {} if cache is None else cache
    best_obj, best_s = np.inf, ()
    for s in enumerate_tree_antichains(rs, t):
        fit = cache.get(s)
        if fit is None:
            fit, _ = ridge_direct(rs, gamma, s, r)
            cache[s] = fit
        obj = fit + lam * (float(a[list(s)].sum()) if s else 0.0)
        if obj < best_obj:
            best_obj, best_s = obj, s
    return best_obj, best_s
