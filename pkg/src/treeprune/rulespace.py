"""Flattened view of an ensemble as a bank of candidate rule columns.

Each tree node i of tree t becomes one prediction column: value mu_i on the
training rows that reach the node, zero elsewhere. Selecting a set of columns
(an antichain within each tree, so no selected node is an ancestor of another)
and reweighting them yields a compact weighted rule set.

Column indices are global: trees in order, nodes in breadth-first id order
within each tree, skipping roots when `include_root=False`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dataio import Condition, Rule, RuleModel
from .ensemble import TreeEnsemble


class AttributeScheme(Enum):
    """Per-node budget cost: every rule 1, its depth, or its distinct features."""

    RULE = "rule"
    DEPTH = "depth"
    FEATURE = "feature"


@dataclass
class Selection:
    """A feasible set of columns with ridge-refit weights."""

    support: tuple[int, ...]
    weights: np.ndarray
    objective: float
    attribute_sum: int

    @classmethod
    def empty(cls, objective: float) -> "Selection":
        return cls((), np.zeros(0), objective, 0)

    @property
    def num_rules(self) -> int:
        return len(self.support)


@dataclass
class _TreeMeta:
    offset: int              # first global column of this tree
    num_cols: int
    col_of_node: np.ndarray  # node id -> global column, -1 if excluded
    node_of_col: np.ndarray  # local column -> node id
    parent: np.ndarray       # node id -> parent node id (-1 at root)
    children: list           # node id -> (left, right) or None
    leaf_nodes: np.ndarray   # node ids of leaves, slot order
    leaf_slot_of_row: np.ndarray  # training row -> leaf slot
    cliques: list = field(default_factory=list)  # root-to-leaf paths, global cols


class RuleSpace:
    def __init__(self, ensemble: TreeEnsemble, include_root: bool = True):
        for tree in ensemble.trees:
            if any(nd.member_rows is None for nd in tree.nodes):
                raise ValueError(
                    "ensemble has no training rows attached; call "
                    "attach_member_rows(X) first")
        self.ensemble = ensemble
        self.include_root = include_root
        self.n = int(ensemble.trees[0].nodes[0].member_rows.size)

        tree_of, mu, depth, n_rows, nfeat, is_leaf, is_root = [], [], [], [], [], [], []
        self.trees: list[_TreeMeta] = []
        self._rows: list[np.ndarray] = []
        offset = 0
        for t, tree in enumerate(ensemble.trees):
            nn = len(tree.nodes)
            col_of = np.full(nn, -1, dtype=np.int64)
            node_of = []
            parent = np.full(nn, -1, dtype=np.int64)
            children = [None] * nn
            for nd in tree.nodes:
                if nd.parent is not None:
                    parent[nd.id] = nd.parent
                if not nd.is_leaf:
                    children[nd.id] = (nd.left, nd.right)
                if nd.id == 0 and not include_root:
                    continue
                col_of[nd.id] = offset + len(node_of)
                node_of.append(nd.id)
                tree_of.append(t)
                mu.append(nd.mu)
                depth.append(nd.depth)
                n_rows.append(nd.member_rows.size)
                is_leaf.append(nd.is_leaf)
                is_root.append(nd.id == 0)
                nfeat.append(_distinct_feature_count(tree, nd.id))
                self._rows.append(nd.member_rows)

            leaf_nodes = np.array(tree.leaf_ids(), dtype=np.int64)
            slot = np.zeros(self.n, dtype=np.int64)
            for s, leaf in enumerate(leaf_nodes):
                slot[tree.nodes[leaf].member_rows] = s
            meta = _TreeMeta(offset, len(node_of), col_of,
                             np.array(node_of, dtype=np.int64),
                             parent, children, leaf_nodes, slot)
            meta.cliques = _path_cliques(tree, col_of)
            self.trees.append(meta)
            offset += len(node_of)

        self.m = offset
        self.tree_of = np.array(tree_of, dtype=np.int64)
        self.mu = np.array(mu, dtype=np.float64)
        self.depth = np.array(depth, dtype=np.int64)
        self.n_samples = np.array(n_rows, dtype=np.int64)
        self.distinct_features = np.array(nfeat, dtype=np.int64)
        self.is_leaf = np.array(is_leaf, dtype=bool)
        self.is_root = np.array(is_root, dtype=bool)
        self.col_sq_norm = self.n_samples * self.mu ** 2

    # --- column access -------------------------------------------------------

    def rows(self, col: int) -> np.ndarray:
        return self._rows[col]

    def tree_cols(self, t: int) -> range:
        meta = self.trees[t]
        return range(meta.offset, meta.offset + meta.num_cols)

    def dense_columns(self, cols) -> np.ndarray:
        out = np.zeros((self.n, len(cols)), dtype=np.float64)
        for j, c in enumerate(cols):
            out[self._rows[c], j] = self.mu[c]
        return out

    def column_sums(self, v: np.ndarray) -> np.ndarray:
        """Dot of every column with v, i.e. mu_i * sum(v over member rows)."""
        out = np.empty(self.m, dtype=np.float64)
        for t in range(len(self.trees)):
            meta = self.trees[t]
            out[meta.offset:meta.offset + meta.num_cols] = self.tree_column_sums(t, v)
        return out

    def tree_column_sums(self, t: int, v: np.ndarray) -> np.ndarray:
        """Per-column dots for one tree, via leaf bincount + upward sweep."""
        meta = self.trees[t]
        leaf_sums = np.bincount(meta.leaf_slot_of_row, weights=v,
                                minlength=meta.leaf_nodes.size)
        node_sum = np.zeros(meta.parent.size, dtype=np.float64)
        node_sum[meta.leaf_nodes] = leaf_sums
        for nid in range(meta.parent.size - 1, -1, -1):
            ch = meta.children[nid]
            if ch is not None:
                node_sum[nid] = node_sum[ch[0]] + node_sum[ch[1]]
        return self.mu[meta.offset:meta.offset + meta.num_cols] * node_sum[meta.node_of_col]

    def scatter_add(self, out: np.ndarray, cols, coefs) -> None:
        """out += sum_j coefs[j] * column(cols[j]), in place."""
        for c, w in zip(cols, coefs):
            out[self._rows[c]] += w * self.mu[c]

    def predict_columns(self, cols, coefs) -> np.ndarray:
        out = np.zeros(self.n, dtype=np.float64)
        self.scatter_add(out, cols, coefs)
        return out

    # --- structure -----------------------------------------------------------

    def ancestors(self, col: int) -> list[int]:
        meta = self.trees[self.tree_of[col]]
        out = []
        nid = meta.parent[_node_of(meta, col)]
        while nid >= 0:
            c = meta.col_of_node[nid]
            if c >= 0:
                out.append(int(c))
            nid = meta.parent[nid]
        return out

    def descendants(self, col: int) -> list[int]:
        meta = self.trees[self.tree_of[col]]
        out = []
        stack = list(meta.children[_node_of(meta, col)] or ())
        while stack:
            nid = stack.pop()
            c = meta.col_of_node[nid]
            if c >= 0:
                out.append(int(c))
            ch = meta.children[nid]
            if ch is not None:
                stack.extend(ch)
        return sorted(out)

    def cliques_global(self) -> list[np.ndarray]:
        out = []
        for meta in self.trees:
            out.extend(meta.cliques)
        return out

    def is_antichain(self, cols) -> bool:
        """True when no column is an ancestor of another (per tree)."""
        chosen = set(cols)
        for c in cols:
            if any(a in chosen for a in self.ancestors(c)):
                return False
        return True

    def validate_selection(self, sel: Selection, scheme: "AttributeScheme") -> None:
        if len(sel.support) != len(sel.weights):
            raise ValueError("support/weights length mismatch")
        if list(sel.support) != sorted(set(sel.support)):
            raise ValueError("support must be sorted and duplicate-free")
        if not self.is_antichain(sel.support):
            raise ValueError("support is not an antichain within each tree")
        a = attribute_values(self, scheme)
        if int(a[list(sel.support)].sum()) != sel.attribute_sum:
            raise ValueError("stored attribute_sum disagrees with the scheme")


def build_rulespace(ensemble: TreeEnsemble, include_root: bool = True) -> RuleSpace:
    return RuleSpace(ensemble, include_root)


def _node_of(meta: _TreeMeta, col: int) -> int:
    return int(meta.node_of_col[col - meta.offset])


def _path_cliques(tree, col_of) -> list[np.ndarray]:
    """One clique per leaf: columns on the root-to-leaf path."""
    cliques = []
    for nd in tree.nodes:
        if not nd.is_leaf:
            continue
        path = []
        cur = nd.id
        while cur is not None:
            c = col_of[cur]
            if c >= 0:
                path.append(int(c))
            cur = tree.nodes[cur].parent
        if path:
            cliques.append(np.array(sorted(path), dtype=np.int64))
    return cliques


def _distinct_feature_count(tree, nid: int) -> int:
    feats = set()
    cur = tree.nodes[nid].parent
    while cur is not None:
        feats.add(tree.nodes[cur].feature)
        cur = tree.nodes[cur].parent
    return len(feats)


def conflict_rows(rs: RuleSpace):
    """Per tree: ancestor/descendant column pairs and root-to-leaf cliques."""
    out = []
    for t, meta in enumerate(rs.trees):
        pairs = []
        for c in rs.tree_cols(t):
            for d in rs.descendants(c):
                pairs.append((c, d))
        out.append({"pairs": pairs, "cliques": list(meta.cliques)})
    return out


def attribute_values(rs: RuleSpace, scheme: AttributeScheme) -> np.ndarray:
    if scheme == AttributeScheme.RULE:
        return np.ones(rs.m, dtype=np.int64)
    if scheme == AttributeScheme.DEPTH:
        return rs.depth.copy()
    if scheme == AttributeScheme.FEATURE:
        return rs.distinct_features.copy()
    raise ValueError(f"unknown scheme {scheme!r}")


def attribute(rs: RuleSpace, scheme: AttributeScheme, col: int) -> int:
    return int(attribute_values(rs, scheme)[col])


def features_on_path(rs: RuleSpace, col: int) -> frozenset:
    """Distinct split features on the root-to-node path of a column."""
    t = int(rs.tree_of[col])
    tree = rs.ensemble.trees[t]
    feats = set()
    cur = tree.nodes[_node_of(rs.trees[t], col)].parent
    while cur is not None:
        feats.add(int(tree.nodes[cur].feature))
        cur = tree.nodes[cur].parent
    return frozenset(feats)


# --- rule models -------------------------------------------------------------

def path_conditions(rs: RuleSpace, col: int) -> list[Condition]:
    """Split conditions on the root-to-node path, outermost first."""
    t = int(rs.tree_of[col])
    tree = rs.ensemble.trees[t]
    meta = rs.trees[t]
    conds = []
    nid = _node_of(meta, col)
    while True:
        par = meta.parent[nid]
        if par < 0:
            break
        pnode = tree.nodes[par]
        op = "le" if pnode.left == nid else "gt"
        conds.append(Condition(int(pnode.feature), op, float(pnode.threshold)))
        nid = int(par)
    conds.reverse()
    return conds


def selection_to_rule_model(rs: RuleSpace, sel: Selection,
                            metadata: dict | None = None) -> RuleModel:
    """Root selections become the intercept; other columns become rules."""
    rules = []
    intercept = 0.0
    for col, w in zip(sel.support, sel.weights):
        if rs.is_root[col]:
            intercept += float(w) * float(rs.mu[col])
        else:
            rules.append(Rule(path_conditions(rs, col),
                              float(rs.mu[col]), float(w)))
    meta = dict(metadata or {})
    meta.setdefault("base_score", rs.ensemble.base_score)
    if rs.ensemble.feature_names is not None:
        meta.setdefault("feature_names", list(rs.ensemble.feature_names))
    return RuleModel(rules, intercept, meta)


def predict_rule_model(model: RuleModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    base = float(model.metadata.get("base_score", 0.0))
    out = np.full(X.shape[0], base + model.intercept, dtype=np.float64)
    for rule in model.rules:
        mask = np.ones(X.shape[0], dtype=bool)
        for c in rule.conditions:
            col = X[:, c.feature]
            mask &= (col <= c.threshold) if c.op == "le" else (col > c.threshold)
        out[mask] += rule.contribution
    return out


def validate_rule_model(model: RuleModel) -> None:
    """Reject rules whose merged conditions describe an empty region."""
    for k, rule in enumerate(model.rules):
        for feat, (lo, hi) in _merged_intervals(rule).items():
            if lo is not None and hi is not None and lo >= hi:
                raise ValueError(
                    f"rule {k}: empty interval on feature {feat} ({lo} .. {hi})")


def _merged_intervals(rule: Rule) -> dict:
    """feature -> (strict lower bound or None, upper bound or None)."""
    iv: dict = {}
    for c in rule.conditions:
        lo, hi = iv.get(c.feature, (None, None))
        if c.op == "le":
            hi = c.threshold if hi is None else min(hi, c.threshold)
        else:
            lo = c.threshold if lo is None else max(lo, c.threshold)
        iv[c.feature] = (lo, hi)
    return iv


def render_rules(model: RuleModel) -> str:
    """Human-readable listing, largest |contribution| first."""
    names = model.metadata.get("feature_names")

    def name(j: int) -> str:
        if names is not None and j < len(names):
            return names[j]
        return f"x{j + 1}"

    constant = float(model.metadata.get("base_score", 0.0)) + model.intercept
    if not model.rules:
        return f"Predict {_num(constant)}.\n"

    lines = []
    if constant != 0.0:
        lines.append(f"Start from {_num(constant)}.")
    order = sorted(range(len(model.rules)),
                   key=lambda k: -abs(model.rules[k].contribution))
    for k in order:
        rule = model.rules[k]
        iv = _merged_intervals(rule)
        parts = []
        for feat in sorted(iv):
            lo, hi = iv[feat]
            if lo is not None:
                parts.append(f"{name(feat)} > {_num(lo)}")
            if hi is not None:
                parts.append(f"{name(feat)} <= {_num(hi)}")
        cond = " and ".join(parts) if parts else "always"
        lines.append(f"If {cond} then add {_num(rule.contribution)} to prediction.")
    return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return f"{x:.6g}"
