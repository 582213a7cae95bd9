"""Box relaxation of the budgeted problem: cutting-plane bound, then rounding.

The binary selection problem stays convex when z is allowed to range over
[0, 1], so a plain cutting-plane (Kelley) loop on LP masters converges to the
relaxation optimum and every master value along the way is a certified lower
bound on the integer optimum. Rounding maps the fractional point back to a
feasible antichain per tree (exact dynamic program), repairs the budget by
dropping the weakest picks, and refits weights on the rounded support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numcore
from .milp import MasterProblem, lp_solve, max_weight_antichain
from .rulespace import AttributeScheme, RuleSpace, Selection, attribute_values


@dataclass
class RelaxConfig:
    gamma: float = 1.0
    tol: float = 1e-6
    max_iters: int = 300
    max_lp_iter: int = 200_000


@dataclass
class RelaxResult:
    zeta: np.ndarray          # best fractional point found
    relax_bound: float        # certified lower bound on the integer optimum
    relax_value: float        # relaxed objective at zeta (upper bound on the relaxation)
    selection: Selection      # rounded support with refit weights
    iterations: int
    status: str               # "converged" | "stalled" | "iteration_limit"
    trace: list = field(default_factory=list)  # (iter, ub, lb) per master solve


def solve_relaxation(rs: RuleSpace, y: np.ndarray, K: int,
                     scheme: AttributeScheme,
                     cfg: RelaxConfig | None = None):
    """Kelley loop; returns (zeta, bound, value, iterations, status, trace)."""
    cfg = cfg or RelaxConfig()
    y = np.asarray(y, dtype=np.float64)
    attrs = attribute_values(rs, scheme)
    z0 = np.zeros(rs.m)
    cut0 = numcore.relaxed_cut(rs, cfg.gamma, z0, y)
    master = MasterProblem(rs.m, rs.cliques_global(), cuts=[cut0],
                           attrs=attrs, budget=int(K))
    best_z, best_val = z0, cut0.value_at_origin
    bound = -np.inf
    visited = {_zkey(z0)}
    status = "iteration_limit"
    trace = []
    iters = 0
    for iters in range(1, cfg.max_iters + 1):
        lp_status, obj, x = lp_solve(master, max_iter=cfg.max_lp_iter)
        if lp_status != "optimal":
            raise RuntimeError(f"relaxation master LP returned {lp_status}")
        bound = max(bound, obj)
        if best_val - bound <= cfg.tol * max(1.0, abs(best_val)):
            status = "converged"
            trace.append((iters, best_val, bound))
            break
        z = np.clip(x[:rs.m], 0.0, 1.0)
        key = _zkey(z)
        if key in visited:
            status = "stalled"
            trace.append((iters, best_val, bound))
            break
        visited.add(key)
        cut = numcore.relaxed_cut(rs, cfg.gamma, z, y)
        if cut.value_at_origin < best_val:
            best_val = cut.value_at_origin
            best_z = z
        master.add_cut(cut)
        trace.append((iters, best_val, bound))
    return best_z, float(bound), float(best_val), iters, status, trace


def _zkey(z: np.ndarray) -> tuple:
    return tuple(np.round(z, 12))


def round_fractional(rs: RuleSpace, zeta: np.ndarray, K: int,
                     scheme: AttributeScheme) -> tuple[int, ...]:
    """Per-tree max-weight antichain on zeta, then drop weakest picks to K."""
    zeta = np.asarray(zeta, dtype=np.float64)
    attrs = attribute_values(rs, scheme)
    picked: list[int] = []
    for meta in rs.trees:
        block = zeta[meta.offset:meta.offset + meta.num_cols]
        parents = _local_parents(rs, meta)
        _, local = max_weight_antichain(parents, block)
        picked.extend(int(meta.offset + i) for i in local)
    total = int(attrs[picked].sum()) if picked else 0
    order = sorted(picked, key=lambda i: (zeta[i], -i))
    keep = set(picked)
    while total > int(K) and order:
        drop = order.pop(0)
        keep.discard(drop)
        total -= int(attrs[drop])
    return tuple(sorted(keep))


def _local_parents(rs: RuleSpace, meta) -> np.ndarray:
    parents = np.full(meta.num_cols, -1, dtype=np.int64)
    for j in range(meta.num_cols):
        anc = rs.ancestors(meta.offset + j)
        if anc:
            parents[j] = anc[0] - meta.offset
    return parents


def relax_and_round(rs: RuleSpace, y: np.ndarray, K: int,
                    scheme: AttributeScheme,
                    cfg: RelaxConfig | None = None) -> RelaxResult:
    cfg = cfg or RelaxConfig()
    y = np.asarray(y, dtype=np.float64)
    zeta, bound, value, iters, status, trace = solve_relaxation(
        rs, y, K, scheme, cfg)
    support = round_fractional(rs, zeta, K, scheme)
    fact = numcore.SupportFactorization(rs, cfg.gamma, support)
    attrs = attribute_values(rs, scheme)
    sel = Selection(support,
                    fact.weights(y) if support else np.zeros(0),
                    fact.objective(y),
                    int(attrs[list(support)].sum()) if support else 0)
    return RelaxResult(zeta, bound, value, sel, iters, status, trace)
