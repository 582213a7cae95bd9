"""Self-contained LP/MILP backend for the selection master problems.

A master problem minimizes the epigraph variable nu over

    nu >= c_k + g_k . z                      (one row per cut)
    sum(z_j : j on a root-to-leaf path) <= 1 (one clique row per leaf)
    sum(a_i z_i) <= K                        (budget row, exact mode only)
    z in [0, 1]^m, binary for the integer solve.

LPs are solved with a dense bounded-variable two-phase primal simplex
(deterministic: Dantzig pricing with lowest-index ties, Bland's rule after a
degenerate streak). Integer solves use best-bound branch and bound with
most-fractional branching. Everything is desk-scale by design: dense tableaus,
no presolve, no warm starts across nodes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .numcore import Cut

_FEAS_TOL = 1e-7
_PIVOT_TOL = 1e-9
_BLAND_AFTER = 40
_REFRESH_EVERY = 200


@dataclass
class BnBConfig:
    rel_gap_tol: float = 1e-6
    int_tol: float = 1e-6
    node_limit: int = 200_000
    max_lp_iter: int = 50_000


@dataclass
class BnBResult:
    z: np.ndarray
    objective: float
    bound: float
    gap: float
    nodes: int
    status: str  # "optimal" | "node_limit" | "infeasible"


@dataclass
class MasterProblem:
    num_z: int
    cliques: list
    cuts: list = field(default_factory=list)
    attrs: np.ndarray | None = None
    budget: int | None = None
    z_lb: np.ndarray | None = None
    z_ub: np.ndarray | None = None

    def __post_init__(self):
        if self.z_lb is None:
            self.z_lb = np.zeros(self.num_z)
        if self.z_ub is None:
            self.z_ub = np.ones(self.num_z)
        if (self.budget is None) != (self.attrs is None):
            raise ValueError("budget and attrs must be given together")

    def add_cut(self, cut: Cut) -> None:
        if cut.gradient.shape != (self.num_z,):
            raise ValueError("cut gradient has wrong length")
        self.cuts.append(cut)

    def to_lp_text(self) -> str:
        """CPLEX-LP-style dump for debugging."""
        lines = ["Minimize", " obj: nu", "Subject To"]
        for k, cut in enumerate(self.cuts):
            terms = " ".join(f"{g:+.12g} z{i}" for i, g in enumerate(cut.gradient)
                             if g != 0.0)
            lines.append(f" cut{k}: {terms} -1 nu <= {-cut.constant:.12g}")
        for k, clique in enumerate(self.cliques):
            terms = " + ".join(f"z{int(i)}" for i in clique)
            lines.append(f" clique{k}: {terms} <= 1")
        if self.budget is not None:
            terms = " ".join(f"{int(a):+d} z{i}" for i, a in enumerate(self.attrs)
                             if a != 0)
            lines.append(f" budget: {terms} <= {int(self.budget)}")
        lines.append("Bounds")
        for i in range(self.num_z):
            lines.append(f" {self.z_lb[i]:g} <= z{i} <= {self.z_ub[i]:g}")
        lines.append(" nu free")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _assemble(mp: MasterProblem):
    """Rows (A x <= b) and bounds for variables (z_0..z_{m-1}, nu)."""
    if not mp.cuts:
        raise ValueError("master problem needs at least one cut "
                         "(nu is unbounded below otherwise)")
    m = mp.num_z
    rows = len(mp.cuts) + len(mp.cliques) + (1 if mp.budget is not None else 0)
    A = np.zeros((rows, m + 1))
    b = np.empty(rows)
    r = 0
    for cut in mp.cuts:
        A[r, :m] = cut.gradient
        A[r, m] = -1.0
        b[r] = -cut.constant
        r += 1
    for clique in mp.cliques:
        A[r, np.asarray(clique, dtype=np.int64)] = 1.0
        b[r] = 1.0
        r += 1
    if mp.budget is not None:
        A[r, :m] = mp.attrs
        b[r] = float(mp.budget)
        r += 1

    # nu is bounded below by every cut minimized over the clique polytope;
    # path-clique systems are integral, so that minimum is the min-weight
    # antichain. Children only shrink the feasible set, so the root value
    # stays valid throughout branch and bound.
    parents = getattr(mp, "_forest", None)
    if parents is None:
        try:
            parents = antichain_parents_from_cliques(mp.num_z, mp.cliques)
        except ValueError:
            parents = False  # not a forest; fall back to the box minimizer
        mp._forest = parents
    if parents is False:
        nu_lb = max(cut.constant + float(np.minimum(cut.gradient, 0.0).sum())
                    for cut in mp.cuts)
    else:
        nu_lb = max(cut.constant - max_weight_antichain(parents,
                                                        -cut.gradient)[0]
                    for cut in mp.cuts)
    lb = np.concatenate([mp.z_lb, [nu_lb]])
    ub = np.concatenate([mp.z_ub, [np.inf]])
    c = np.zeros(m + 1)
    c[m] = 1.0
    return c, A, b, lb, ub


def lp_solve(mp: MasterProblem, z_lb=None, z_ub=None, max_iter: int = 50_000):
    """Relaxed master; returns (status, objective, x) with x = (z..., nu)."""
    c, A, b, lb, ub = _assemble(mp)
    if z_lb is not None:
        lb[:mp.num_z] = z_lb
    if z_ub is not None:
        ub[:mp.num_z] = z_ub
    status, x, obj = simplex_solve(c, A, b, lb, ub, max_iter=max_iter)
    return status, obj, x


# --- bounded-variable two-phase primal simplex --------------------------------

def simplex_solve(c, A, b, lb, ub, max_iter=50_000):
    """min c.x  s.t.  A x <= b,  lb <= x <= ub (lb finite everywhere).

    Returns (status, x, objective); status one of "optimal", "infeasible",
    "unbounded". Raises on iteration limit (callers size problems so this
    indicates a bug, not an instance property).
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    if not np.all(np.isfinite(lb)):
        raise ValueError("simplex requires finite lower bounds")

    x_struct = lb[:n].copy()
    resid = b - A @ x_struct
    neg_rows = np.flatnonzero(resid < 0.0)
    n_art = neg_rows.size

    # columns: structural | slacks | artificials (-1 on their row)
    N = n + m + n_art
    Aall = np.zeros((m, N))
    Aall[:, :n] = A
    Aall[:, n:n + m] = np.eye(m)
    for k, i in enumerate(neg_rows):
        Aall[i, n + m + k] = -1.0
    lball = np.concatenate([lb, np.zeros(m + n_art)])
    uball = np.concatenate([ub, np.full(m + n_art, np.inf)])

    st = _SimplexState(Aall, b, lball, uball)
    for i in range(m):
        st.basis[i] = n + i
        st.xb[i] = resid[i]
    for k, i in enumerate(neg_rows):
        st.basis[i] = n + m + k
        st.xb[i] = -resid[i]
        st.Binv[i, i] = -1.0
    st.in_basis[st.basis] = True

    if n_art:
        c1 = np.zeros(N)
        c1[n + m:] = 1.0
        status = st.run(c1, max_iter)
        if status != "optimal":
            raise RuntimeError(f"phase-1 simplex ended with status {status}")
        if st.objective(c1) > _FEAS_TOL:
            return "infeasible", None, np.nan
        # pin artificials at zero for phase 2
        st.ub[n + m:] = 0.0
        st.xb[st.basis >= n + m] = 0.0

    c2 = np.concatenate([c, np.zeros(N - n)])
    status = st.run(c2, max_iter)
    if status == "iteration_limit":
        raise RuntimeError("simplex iteration limit")
    if status != "optimal":
        return status, None, np.nan
    x = st.full_x()[:n]
    return "optimal", x, float(c @ x)


class _SimplexState:
    def __init__(self, Aall, b, lb, ub):
        self.A = Aall
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m = Aall.shape[0]
        self.N = Aall.shape[1]
        self.basis = np.empty(self.m, dtype=np.int64)
        self.xb = np.empty(self.m)
        self.in_basis = np.zeros(self.N, dtype=bool)
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.Binv = np.eye(self.m)

    def full_x(self) -> np.ndarray:
        x = np.where(self.at_upper, self.ub, self.lb)
        x[self.basis] = self.xb
        return x

    def objective(self, c) -> float:
        return float(c @ self.full_x())

    def _refresh(self):
        """Refactor the basis inverse and recompute basic values from it."""
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        x_nb = np.where(self.at_upper, self.ub, self.lb)
        x_nb[self.basis] = 0.0
        self.xb = self.Binv @ (self.b - self.A @ x_nb)

    def run(self, c, max_iter) -> str:
        m = self.m
        degen_streak = 0
        free_range = (self.ub - self.lb) > _PIVOT_TOL
        for it in range(max_iter):
            if it and it % _REFRESH_EVERY == 0:
                self._refresh()
            y = self.Binv.T @ c[self.basis]
            d = c - self.A.T @ y
            viol = np.where(self.at_upper, d, -d)
            cand = (~self.in_basis) & free_range & (viol > _PIVOT_TOL)
            if not cand.any():
                return "optimal"
            if degen_streak >= _BLAND_AFTER:
                e = int(np.flatnonzero(cand)[0])
            else:
                e = int(np.argmax(np.where(cand, viol, -np.inf)))
            sigma = -1.0 if self.at_upper[e] else 1.0
            w = self.Binv @ self.A[:, e]
            delta = sigma * w

            # largest step before a basic variable hits a bound
            with np.errstate(divide="ignore", invalid="ignore"):
                lim_lo = np.where(delta > _PIVOT_TOL,
                                  (self.xb - self.lb[self.basis]) / delta, np.inf)
                lim_hi = np.where(delta < -_PIVOT_TOL,
                                  (self.xb - self.ub[self.basis]) / delta, np.inf)
            lims = np.maximum(np.minimum(lim_lo, lim_hi), 0.0)
            t_basic = float(lims.min())
            t_flip = self.ub[e] - self.lb[e]
            t = min(t_basic, t_flip)
            if not np.isfinite(t):
                return "unbounded"

            self.xb -= delta * t
            if t_flip <= t_basic:
                self.at_upper[e] = not self.at_upper[e]
            else:
                near = np.flatnonzero(lims <= t_basic + 1e-12)
                p = int(near[np.argmin(self.basis[near])])  # Bland tie-break
                leaving = self.basis[p]
                self.at_upper[leaving] = delta[p] < 0.0
                self.in_basis[leaving] = False
                self.in_basis[e] = True
                self.basis[p] = e
                self.xb[p] = self.lb[e] + t if sigma > 0 else self.ub[e] - t
                piv = w[p]
                self.Binv[p] /= piv
                others = np.arange(m) != p
                self.Binv[others] -= np.outer(w[others], self.Binv[p])
            degen_streak = degen_streak + 1 if t <= 1e-11 else 0
        return "iteration_limit"


# --- branch and bound ---------------------------------------------------------

def _batch_antichain_values(parents: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row-wise max-weight antichain value for a stack of weight vectors.

    Same recursion as max_weight_antichain, but sweeping all rows of W at
    once and returning only the values. -inf entries mark excluded nodes.
    """
    n = parents.size
    child_sum = np.zeros(W.shape)
    totals = np.zeros(W.shape[0])
    for i in range(n - 1, -1, -1):
        best_i = np.maximum(W[:, i], child_sum[:, i])
        p = parents[i]
        if p >= 0:
            child_sum[:, p] += best_i
        else:
            totals += best_i
    return totals


def _argmax_antichain(parents, kids, roots, w: np.ndarray) -> list[int]:
    """Columns of one max-weight antichain for weights w (-inf = excluded)."""
    n = parents.size
    child = np.zeros(n)
    for i in range(n - 1, -1, -1):
        p = parents[i]
        if p >= 0:
            child[p] += max(w[i], child[i])
    picks: list[int] = []
    stack = list(roots)
    while stack:
        i = stack.pop()
        if w[i] >= child[i]:
            picks.append(i)
        else:
            stack.extend(kids[i])
    return picks


def min_max_over_antichains(parents: np.ndarray, consts: np.ndarray,
                            grads: np.ndarray,
                            rel_tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Exact min over antichains z of max_k (consts[k] + grads[k] @ z).

    Master engine for single-tree blocks with too many antichains to
    enumerate. Nodes fix one column in or out; the bound is the cutwise
    antichain DP (each cut minimized independently over the node's free
    region), so no LP runs at all. Relies on parents[j] < j.
    """
    num_cuts, n = grads.shape
    if n == 0:
        return float(consts.max()), np.zeros(0)
    kids: list[list[int]] = [[] for _ in range(n)]
    roots: list[int] = []
    for j in range(n):
        p = int(parents[j])
        kids[p].append(j) if p >= 0 else roots.append(j)
    anc: list[list[int]] = [[] for _ in range(n)]
    for j in range(n):
        p = int(parents[j])
        while p >= 0:
            anc[j].append(p)
            p = int(parents[p])
    desc: list[list[int]] = [[] for _ in range(n)]
    for j in range(n - 1, -1, -1):
        for ch in kids[j]:
            desc[j].extend([ch] + desc[ch])

    best_val = np.inf
    best_z = np.zeros(n)
    lb_leaves = np.inf
    # node = (forced cols tuple, banned col set; banned covers forced and
    # every column comparable to a forced one)
    stack: list[tuple[tuple, frozenset]] = [((), frozenset())]
    while stack:
        forced, banned = stack.pop()
        W = -grads.copy()
        if banned:
            W[:, list(banned)] = -np.inf
        fsum = grads[:, list(forced)].sum(axis=1) if forced else 0.0
        cut_mins = consts + fsum - _batch_antichain_values(parents, W)
        bound = float(cut_mins.max())
        if np.isfinite(best_val) and \
                bound >= best_val - rel_tol * max(1.0, abs(best_val)):
            lb_leaves = min(lb_leaves, bound)
            continue
        picks = _argmax_antichain(parents, kids, roots,
                                  W[int(np.argmax(cut_mins))])
        z = np.zeros(n)
        z[picks] = 1.0
        z[list(forced)] = 1.0
        fvals = consts + grads @ z
        fz = float(fvals.max())
        if fz < best_val:
            best_val, best_z = fz, z
        free = [j for j in range(n) if j not in banned]
        if not free or fz - bound <= rel_tol * max(1.0, abs(bound)):
            lb_leaves = min(lb_leaves, bound)
            continue
        gabs = np.abs(grads[int(np.argmax(fvals))])
        j = max(free, key=lambda i: (gabs[i], -i))
        stack.append((forced, banned | {j}))
        stack.append((forced + (j,), banned | {j} | set(anc[j]) | set(desc[j])))
    return min(lb_leaves, best_val), best_z


_DP_ELEMS_CAP = 8_000_000  # budget DP size guard, elements of the D tensor


def min_max_budgeted(parents: np.ndarray, attrs: np.ndarray, budget: int,
                     consts: np.ndarray, grads: np.ndarray,
                     rel_tol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Exact min over budgeted antichain selections of max_k (c_k + g_k @ z).

    Forest analogue of min_max_over_antichains with the attribute budget as
    a second DP axis. Columns are linearized in DFS preorder; a position is
    either skipped (next position, children stay available) or picked (jump
    past its subtree), which is exactly the antichain constraint, so the
    per-cut budgeted minimum needs no LP. Attributes must be nonnegative
    integers and parents[j] < j.
    """
    num_cuts, n = grads.shape
    if n == 0:
        return float(consts.max()), np.zeros(0)
    attrs = attrs.astype(np.int64)
    kids: list[list[int]] = [[] for _ in range(n)]
    roots: list[int] = []
    for j in range(n):
        p = int(parents[j])
        kids[p].append(j) if p >= 0 else roots.append(j)
    anc: list[list[int]] = [[] for _ in range(n)]
    for j in range(n):
        p = int(parents[j])
        while p >= 0:
            anc[j].append(p)
            p = int(parents[p])
    desc: list[list[int]] = [[] for _ in range(n)]
    for j in range(n - 1, -1, -1):
        for ch in kids[j]:
            desc[j].extend([ch] + desc[ch])

    size = np.ones(n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        for ch in kids[j]:
            size[j] += size[ch]
    order: list[int] = []
    dfs = list(reversed(roots))
    while dfs:
        j = dfs.pop()
        order.append(j)
        dfs.extend(reversed(kids[j]))
    nxt = np.empty(n, dtype=np.int64)
    for pos, j in enumerate(order):
        nxt[pos] = pos + size[j]

    def budget_dp(banned: frozenset, width: int):
        # D[i, k, b]: best weight for cut k from positions >= i spending <= b
        D = np.zeros((n + 1, num_cuts, width))
        for i in range(n - 1, -1, -1):
            j = order[i]
            D[i] = D[i + 1]
            a = int(attrs[j])
            if j not in banned and a < width:
                np.minimum(D[i, :, a:],
                           grads[:, j:j + 1] + D[nxt[i], :, :width - a],
                           out=D[i, :, a:])
        return D

    def walk(D, k: int, banned: frozenset, width: int) -> list[int]:
        picks: list[int] = []
        i, b = 0, width - 1
        while i < n:
            j = order[i]
            a = int(attrs[j])
            if (j not in banned and a <= b
                    and grads[k, j] + D[nxt[i], k, b - a] == D[i, k, b]):
                picks.append(j)
                i, b = int(nxt[i]), b - a
            else:
                i += 1
        return picks

    best_val = np.inf
    best_z = np.zeros(n)
    lb_leaves = np.inf
    # node = (forced cols tuple, banned col set; banned covers forced and
    # every column comparable to a forced one)
    stack: list[tuple[tuple, frozenset]] = [((), frozenset())]
    while stack:
        forced, banned = stack.pop()
        spent = int(attrs[list(forced)].sum()) if forced else 0
        width = int(budget) - spent + 1
        fsum = grads[:, list(forced)].sum(axis=1) if forced else 0.0
        D = budget_dp(banned, width)
        cut_mins = consts + fsum + D[0, :, width - 1]
        bound = float(cut_mins.max())
        if np.isfinite(best_val) and \
                bound >= best_val - rel_tol * max(1.0, abs(best_val)):
            lb_leaves = min(lb_leaves, bound)
            continue
        picks = walk(D, int(np.argmax(cut_mins)), banned, width)
        z = np.zeros(n)
        z[picks] = 1.0
        z[list(forced)] = 1.0
        fvals = consts + grads @ z
        fz = float(fvals.max())
        if fz < best_val:
            best_val, best_z = fz, z
        free = [j for j in range(n)
                if j not in banned and int(attrs[j]) <= width - 1]
        if not free or fz - bound <= rel_tol * max(1.0, abs(bound)):
            lb_leaves = min(lb_leaves, bound)
            continue
        gabs = np.abs(grads[int(np.argmax(fvals))])
        j = max(free, key=lambda i: (gabs[i], -i))
        stack.append((forced, banned | {j}))
        stack.append((forced + (j,), banned | {j} | set(anc[j]) | set(desc[j])))
    return min(lb_leaves, best_val), best_z


def solve_master(mp: MasterProblem, cfg: BnBConfig | None = None) -> BnBResult:
    """Integer master dispatch.

    Budgeted masters with integer attributes route to the knapsack antichain
    engine while its DP tensor stays small; everything else (fixed columns,
    fractional attributes, non-forest cliques, oversized budgets) falls back
    to LP branch and bound.
    """
    cfg = cfg or BnBConfig()
    if mp.budget is None or mp.attrs is None or not mp.cuts:
        return bnb_solve(mp, cfg)
    attrs = np.asarray(mp.attrs)
    if np.any(attrs < 0) or np.any(attrs != np.round(attrs)):
        return bnb_solve(mp, cfg)
    if np.any(mp.z_lb > 0.5) or np.any(mp.z_ub < 0.5):
        return bnb_solve(mp, cfg)
    if (mp.num_z + 1) * len(mp.cuts) * (int(mp.budget) + 1) > _DP_ELEMS_CAP:
        return bnb_solve(mp, cfg)
    parents = getattr(mp, "_forest", None)
    if parents is None:
        try:
            parents = antichain_parents_from_cliques(mp.num_z, mp.cliques)
        except ValueError:
            parents = False
        mp._forest = parents
    if parents is False:
        return bnb_solve(mp, cfg)
    consts = np.array([ct.constant for ct in mp.cuts])
    grads = np.stack([ct.gradient for ct in mp.cuts])
    bound, z = min_max_budgeted(parents, attrs.astype(np.int64),
                                int(mp.budget), consts, grads,
                                rel_tol=cfg.rel_gap_tol)
    val = float((consts + grads @ z).max())
    gap = max(0.0, (val - bound) / max(1.0, abs(val)))
    return BnBResult(z.astype(np.int8), val, float(bound), gap, 1, "optimal")


def bnb_solve(mp: MasterProblem, cfg: BnBConfig | None = None) -> BnBResult:
    """Exact binary solve of the master by best-bound branch and bound."""
    cfg = cfg or BnBConfig()
    m = mp.num_z
    c, A, b, lb0, ub0 = _assemble(mp)

    # Cheap node bound: every cut minimized over the antichains that respect
    # the node's off-fixings (on-fixings relaxed, budget ignored; both only
    # enlarge the feasible set, so the value stays a lower bound). This
    # prunes most nodes before their LP ever runs.
    forest = getattr(mp, "_forest", None)
    if isinstance(forest, np.ndarray):
        grads = np.stack([cut.gradient for cut in mp.cuts])
        consts = np.array([cut.constant for cut in mp.cuts])

        def comb_bound(zub) -> float:
            W = np.where(zub[np.newaxis, :] < 0.5, -np.inf, -grads)
            return float(np.max(consts - _batch_antichain_values(forest, W)))
    else:
        comb_bound = None

    def lp(zlb, zub):
        lbv = lb0.copy()
        ubv = ub0.copy()
        lbv[:m] = zlb
        ubv[:m] = zub
        return simplex_solve(c, A, b, lbv, ubv, max_iter=cfg.max_lp_iter)

    def master_value(z: np.ndarray) -> float:
        return max(cut.constant + float(cut.gradient @ z) for cut in mp.cuts)

    def feasible_int(zi: np.ndarray) -> bool:
        for clique in mp.cliques:
            if int(zi[np.asarray(clique, dtype=np.int64)].sum()) > 1:
                return False
        if mp.budget is not None:
            if int(np.asarray(mp.attrs, dtype=np.int64) @ zi.astype(np.int64)) \
                    > int(mp.budget):
                return False
        if np.any(zi < np.ceil(mp.z_lb - 1e-9)) or \
                np.any(zi > np.floor(mp.z_ub + 1e-9)):
            return False
        return True

    status, x, obj = lp(mp.z_lb, mp.z_ub)
    if status != "optimal":
        return BnBResult(np.zeros(m, dtype=np.int8), np.inf, np.inf, 0.0, 1,
                         "infeasible")

    inc_z, inc_val = _seed_incumbent(mp, x[:m], master_value, feasible_int)

    nodes = 1
    counter = 0
    heap: list = []
    min_pruned = np.inf  # lowest LP bound ever discarded by the gap test

    def push_children(node_obj, zlb, zub, j):
        nonlocal counter
        for fix in (0.0, 1.0):
            counter += 1
            nlb, nub = zlb.copy(), zub.copy()
            if fix == 0.0:
                nub[j] = 0.0
            else:
                nlb[j] = 1.0
            heapq.heappush(heap, (node_obj, counter, nlb, nub))

    def handle(status, x, obj, zlb, zub) -> None:
        nonlocal inc_z, inc_val, min_pruned
        if status != "optimal":
            return
        scale = max(1.0, abs(inc_val)) if np.isfinite(inc_val) else 1.0
        if inc_val - obj <= cfg.rel_gap_tol * scale:
            min_pruned = min(min_pruned, obj)
            return
        z = x[:m]
        frac = np.abs(z - np.round(z))
        j = int(np.argmax(frac))
        if frac[j] <= cfg.int_tol:
            zi = np.round(z).astype(np.int8)
            if feasible_int(zi):
                val = master_value(zi.astype(np.float64))
                if val < inc_val:
                    inc_val = val
                    inc_z = zi
                min_pruned = min(min_pruned, obj)
                return
            j = int(np.argmax(np.where(zub - zlb > 0.5, frac, -np.inf)))
            if zub[j] - zlb[j] < 0.5:
                min_pruned = min(min_pruned, obj)  # keep the bound honest
                return
        push_children(obj, zlb, zub, j)

    handle(status, x, obj, mp.z_lb.copy(), mp.z_ub.copy())

    while heap and nodes < cfg.node_limit:
        bound, _, zlb, zub = heapq.heappop(heap)
        scale = max(1.0, abs(inc_val)) if np.isfinite(inc_val) else 1.0
        if inc_val - bound <= cfg.rel_gap_tol * scale:
            min_pruned = min(min_pruned, bound)
            break
        if comb_bound is not None:
            cb = comb_bound(zub)
            if inc_val - cb <= cfg.rel_gap_tol * scale:
                min_pruned = min(min_pruned, max(bound, cb))
                continue
        status, x, obj = lp(zlb, zub)
        nodes += 1
        handle(status, x, obj, zlb, zub)

    outstanding = [min_pruned] + [h[0] for h in heap]
    bound = min([inc_val] + [v for v in outstanding if np.isfinite(v)])
    gap = max(0.0, (inc_val - bound) / max(1.0, abs(inc_val)))
    status = "optimal" if gap <= cfg.rel_gap_tol else "node_limit"
    return BnBResult(inc_z, float(inc_val), float(bound), float(gap), nodes,
                     status)


def _seed_incumbent(mp: MasterProblem, z_frac, master_value, feasible_int):
    """Round the root LP per tree (antichain DP), then repair the budget."""
    parents = antichain_parents_from_cliques(mp.num_z, mp.cliques)
    zeta = np.clip(z_frac, 0.0, 1.0)
    zeta = np.where(mp.z_ub < 0.5, 0.0, zeta)  # respect hard off-fixings
    _, picked = max_weight_antichain(parents, zeta)
    z = np.zeros(mp.num_z, dtype=np.int8)
    z[picked] = 1
    z = np.maximum(z, (mp.z_lb > 0.5).astype(np.int8))
    if mp.budget is not None:
        total = int(sum(int(mp.attrs[i]) for i in np.flatnonzero(z)))
        order = sorted((int(i) for i in np.flatnonzero(z)),
                       key=lambda i: (zeta[i], -i))
        while total > int(mp.budget) and order:
            drop = order.pop(0)
            if mp.z_lb[drop] > 0.5:
                continue  # fixed on; cannot drop
            z[drop] = 0
            total -= int(mp.attrs[drop])
    if not feasible_int(z):
        return np.zeros(mp.num_z, dtype=np.int8), np.inf
    return z, master_value(z.astype(np.float64))


# --- antichain machinery ------------------------------------------------------

def antichain_parents_from_cliques(num_z: int, cliques) -> np.ndarray:
    """Recover the forest partial order from root-to-leaf clique rows.

    Clique entries are sorted ancestor-first (breadth-first ids grow with
    depth), so consecutive entries are parent/child pairs. Columns on no
    clique are isolated roots.
    """
    parent = np.full(num_z, -1, dtype=np.int64)
    for clique in cliques:
        cl = np.asarray(clique, dtype=np.int64)
        for a, bb in zip(cl[:-1], cl[1:]):
            if parent[bb] != -1 and parent[bb] != a:
                raise ValueError("clique rows do not describe a forest")
            parent[bb] = a
    return parent


def max_weight_antichain(parents: np.ndarray, weights: np.ndarray):
    """Max-total-weight set of pairwise incomparable nodes in a forest.

    `parents[i] < i` is required (breadth-first ids). The empty set is
    allowed, so the value is always >= 0; zero- or negative-weight nodes are
    never selected (ties prefer descendants / selecting nothing).

    Returns (value, sorted list of selected node ids).
    """
    parents = np.asarray(parents, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n = parents.size
    if np.any(parents >= np.arange(n)):
        raise ValueError("parents must precede children")
    child_sum = np.zeros(n)
    best = np.zeros(n)
    for i in range(n - 1, -1, -1):
        best[i] = max(weights[i], child_sum[i])
        if parents[i] >= 0:
            child_sum[parents[i]] += best[i]

    children: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        if parents[i] >= 0:
            children[parents[i]].append(i)
    picked = []
    stack = [i for i in range(n) if parents[i] == -1]
    value = float(sum(best[i] for i in stack))
    while stack:
        i = stack.pop()
        if weights[i] > child_sum[i]:
            picked.append(i)
        else:
            stack.extend(children[i])
    return value, sorted(picked)
