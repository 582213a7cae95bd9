"""Gradient-boosted regression trees with per-node contribution values.

Trees are grown greedily by exact variance-reduction split search. Every node
(not just leaves) stores `mu = learning_rate * mean(residuals at node)`, the
additive contribution the node would make if used as a standalone rule; leaf
mus are what the boosted model actually adds, so on training rows

    predict(X) == base_score + sum over trees of the leaf mu containing the row.

Training is fully deterministic: splits scan features in ascending index
order, candidate thresholds are midpoints between consecutive distinct sorted
values, and ties in gain keep the first (lowest feature, smallest threshold)
candidate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataio import Dataset

_GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    id: int
    parent: int | None
    left: int | None
    right: int | None
    feature: int | None
    threshold: float | None
    n_samples: int
    mu: float
    depth: int
    member_rows: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class Tree:
    nodes: list[TreeNode]

    def leaf_ids(self) -> list[int]:
        return [nd.id for nd in self.nodes if nd.is_leaf]

    def leaf_assignment(self, X: np.ndarray) -> np.ndarray:
        """Node id of the leaf each row of X falls into."""
        n = X.shape[0]
        out = np.zeros(n, dtype=np.int32)
        stack = [(0, np.arange(n))]
        while stack:
            nid, rows = stack.pop()
            nd = self.nodes[nid]
            if nd.is_leaf:
                out[rows] = nid
                continue
            go_left = X[rows, nd.feature] <= nd.threshold
            stack.append((nd.left, rows[go_left]))
            stack.append((nd.right, rows[~go_left]))
        return out

    def attach_member_rows(self, X: np.ndarray) -> None:
        n = X.shape[0]
        rows_of = {0: np.arange(n)}
        for nd in self.nodes:
            rows = rows_of[nd.id]
            nd.member_rows = rows
            if not nd.is_leaf:
                go_left = X[rows, nd.feature] <= nd.threshold
                rows_of[nd.left] = rows[go_left]
                rows_of[nd.right] = rows[~go_left]


@dataclass
class TreeEnsemble:
    trees: list[Tree]
    learning_rate: float
    base_score: float
    max_depth: int
    feature_names: list[str] | None = None
    num_features: int | None = None

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def node_count(self) -> int:
        return sum(len(t.nodes) for t in self.trees)

    def attach_member_rows(self, X: np.ndarray) -> None:
        X = np.asarray(X, dtype=np.float64)
        self._check_columns(X)
        for tree in self.trees:
            tree.attach_member_rows(X)

    def _check_columns(self, X: np.ndarray) -> None:
        if self.num_features is not None and X.shape[1] != self.num_features:
            raise ValueError(
                f"ensemble was trained on {self.num_features} features, "
                f"got {X.shape[1]}"
            )

    def structural_equal(self, other: "TreeEnsemble") -> bool:
        """Same topology, splits, sample counts, and bit-exact node means."""
        if (self.learning_rate != other.learning_rate
                or self.base_score != other.base_score
                or self.num_trees != other.num_trees):
            return False
        for ta, tb in zip(self.trees, other.trees):
            if len(ta.nodes) != len(tb.nodes):
                return False
            for a, b in zip(ta.nodes, tb.nodes):
                if (a.id, a.parent, a.left, a.right, a.feature, a.depth,
                        a.n_samples) != (b.id, b.parent, b.left, b.right,
                                         b.feature, b.depth, b.n_samples):
                    return False
                if a.threshold != b.threshold or a.mu != b.mu:
                    return False
        return True


def fit_gbt(ds: Dataset, num_trees: int, max_depth: int, learning_rate: float,
            min_leaf: int, seed: int = 0) -> TreeEnsemble:
    """Boost `num_trees` depth-capped trees against squared error.

    base_score is the response mean; each tree fits the current residuals.
    `seed` is recorded in the model metadata; training itself has no random
    component.
    """
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if not (0.0 < learning_rate <= 1.0):
        raise ValueError("learning_rate must be in (0, 1]")
    X = np.asarray(ds.feature_matrix, dtype=np.float64)
    y = np.asarray(ds.response, dtype=np.float64)
    n = X.shape[0]

    base = float(np.mean(y))
    resid = y - base
    if np.ptp(y) == 0.0:
        warnings.warn("constant response: every tree will be a bare root",
                      stacklevel=2)

    trees = []
    for _ in range(num_trees):
        tree = _grow_tree(X, resid, max_depth, learning_rate, min_leaf)
        for nd in tree.nodes:
            if nd.is_leaf:
                resid[nd.member_rows] -= nd.mu
        trees.append(tree)

    return TreeEnsemble(trees, learning_rate, base, max_depth,
                        list(ds.feature_names), X.shape[1])


def _grow_tree(X, resid, max_depth, learning_rate, min_leaf) -> Tree:
    n, p = X.shape
    nodes: list[TreeNode] = []
    # queue of (node id, rows, depth); ids are assigned in breadth-first order
    queue = [(0, np.arange(n), 0, None)]
    nodes.append(_make_node(0, None, 0, np.arange(n), resid, learning_rate))
    head = 0
    while head < len(queue):
        nid, rows, depth, _ = queue[head]
        head += 1
        nd = nodes[nid]
        if depth >= max_depth or rows.size < 2 * min_leaf:
            continue
        best = _best_split(X, resid, rows, min_leaf)
        if best is None:
            continue
        feat, thr, go_left = best
        left_id = len(nodes)
        right_id = left_id + 1
        nd.feature, nd.threshold = feat, thr
        nd.left, nd.right = left_id, right_id
        lrows, rrows = rows[go_left], rows[~go_left]
        nodes.append(_make_node(left_id, nid, depth + 1, lrows, resid, learning_rate))
        nodes.append(_make_node(right_id, nid, depth + 1, rrows, resid, learning_rate))
        queue.append((left_id, lrows, depth + 1, nid))
        queue.append((right_id, rrows, depth + 1, nid))
    return Tree(nodes)


def _make_node(nid, parent, depth, rows, resid, learning_rate) -> TreeNode:
    return TreeNode(
        id=nid, parent=parent, left=None, right=None, feature=None,
        threshold=None, n_samples=int(rows.size),
        mu=float(learning_rate * np.mean(resid[rows])),
        depth=depth, member_rows=rows,
    )


def _best_split(X, resid, rows, min_leaf):
    """Exact greedy scan; returns (feature, threshold, left mask) or None.

    Maximizes n_L*mean_L^2 + n_R*mean_R^2 (equivalent to variance reduction).
    Gains are compared with strict >, so the first candidate in (feature asc,
    threshold asc) order wins ties.
    """
    r = resid[rows]
    n = rows.size
    total = r.sum()
    parent_score = total * total / n
    best_gain = _GAIN_EPS
    best = None
    for feat in range(X.shape[1]):
        v = X[rows, feat]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        csum = np.cumsum(r[order])
        # split after sorted position k: left = k+1 rows
        k = np.arange(n - 1)
        valid = (sv[:-1] < sv[1:]) & (k + 1 >= min_leaf) & (n - k - 1 >= min_leaf)
        if not valid.any():
            continue
        left_sum = csum[:-1]
        score = (left_sum ** 2 / (k + 1)
                 + (total - left_sum) ** 2 / (n - k - 1))
        score = np.where(valid, score, -np.inf)
        k_best = int(np.argmax(score))
        gain = score[k_best] - parent_score
        if gain > best_gain:
            best_gain = gain
            thr = 0.5 * (sv[k_best] + sv[k_best + 1])
            best = (feat, float(thr), None)
    if best is None:
        return None
    feat, thr, _ = best
    return feat, thr, X[rows, feat] <= thr


def predict(ens: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    ens._check_columns(X)
    out = np.full(X.shape[0], ens.base_score, dtype=np.float64)
    for tree in ens.trees:
        leaf = tree.leaf_assignment(X)
        mus = np.array([nd.mu for nd in tree.nodes])
        out += mus[leaf]
    return out


def r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SSE/SST; can be negative for models worse than the mean."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    sse = float(np.sum((y_true - y_pred) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else -np.inf
    return 1.0 - sse / sst
