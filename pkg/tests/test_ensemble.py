import numpy as np
import pytest

import treeprune as tp
from treeprune import synthetic
from treeprune.dataio import Dataset
from treeprune.ensemble import r2


def _steps_dataset():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    return Dataset.from_arrays(X, y)


def test_single_split_midpoint_and_means():
    ds = _steps_dataset()
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=1.0, min_leaf=1)
    assert ens.base_score == 0.5
    tree = ens.trees[0]
    root = tree.nodes[0]
    assert root.feature == 0
    assert root.threshold == 1.5  # midpoint of 1.0 and 2.0
    assert root.mu == 0.0  # learning_rate * mean residual at the root
    left, right = tree.nodes[root.left], tree.nodes[root.right]
    assert left.mu == -0.5 and right.mu == 0.5
    np.testing.assert_allclose(
        tp.predict(ens, ds.feature_matrix), ds.response, atol=1e-15)


def test_node_means_scale_with_learning_rate():
    ds = _steps_dataset()
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=0.25, min_leaf=1)
    tree = ens.trees[0]
    assert tree.nodes[tree.nodes[0].left].mu == -0.125
    assert tree.nodes[tree.nodes[0].right].mu == 0.125


def test_every_node_mean_is_lr_times_residual_mean():
    ds = synthetic.friedman(90, 5, noise=0.3, seed=3)
    lr = 0.3
    ens = tp.fit_gbt(ds, num_trees=5, max_depth=3, learning_rate=lr, min_leaf=4)
    ens.attach_member_rows(ds.feature_matrix)
    resid = ds.response - ens.base_score
    for tree in ens.trees:
        for nd in tree.nodes:
            expect = lr * resid[nd.member_rows].mean()
            assert nd.mu == pytest.approx(expect, abs=1e-12)
        for nd in tree.nodes:
            if nd.is_leaf:
                resid[nd.member_rows] -= nd.mu


def test_split_tie_prefers_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    ds = Dataset.from_arrays(X, y)
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=1.0, min_leaf=1)
    assert ens.trees[0].nodes[0].feature == 0


def test_split_tie_prefers_smallest_threshold():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])  # 0.5 and 2.5 give identical gains
    ds = Dataset.from_arrays(X, y)
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=1.0, min_leaf=1)
    assert ens.trees[0].nodes[0].threshold == 0.5


def test_breadth_first_ids_and_structure():
    ds = synthetic.friedman(120, 5, noise=0.2, seed=7)
    ens = tp.fit_gbt(ds, num_trees=3, max_depth=4, learning_rate=0.2, min_leaf=3)
    for tree in ens.trees:
        for i, nd in enumerate(tree.nodes):
            assert nd.id == i
            if nd.parent is not None:
                assert nd.parent < nd.id
                assert tree.nodes[nd.parent].depth == nd.depth - 1
            else:
                assert nd.id == 0 and nd.depth == 0
            assert nd.is_leaf == (nd.left is None and nd.right is None)
            if not nd.is_leaf:
                assert nd.left < nd.right
                assert nd.feature is not None and nd.threshold is not None
            assert nd.depth <= 4


def test_min_leaf_respected():
    ds = synthetic.friedman(60, 5, noise=0.2, seed=5)
    min_leaf = 7
    ens = tp.fit_gbt(ds, num_trees=4, max_depth=5, learning_rate=0.2,
                     min_leaf=min_leaf)
    for tree in ens.trees:
        for nd in tree.nodes:
            if nd.is_leaf:
                assert nd.n_samples >= min_leaf


def test_leaf_assignment_routes_by_threshold():
    ds = synthetic.friedman(70, 5, noise=0.2, seed=9)
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=3, learning_rate=0.5, min_leaf=2)
    tree = ens.trees[0]
    leaves = tree.leaf_assignment(ds.feature_matrix)
    for i in range(ds.n):
        nd = tree.nodes[0]
        while not nd.is_leaf:
            branch = nd.left if ds.feature_matrix[i, nd.feature] <= nd.threshold else nd.right
            nd = tree.nodes[branch]
        assert leaves[i] == nd.id


def test_member_rows_match_leaf_assignment():
    ds = synthetic.friedman(70, 5, noise=0.2, seed=13)
    ens = tp.fit_gbt(ds, num_trees=2, max_depth=3, learning_rate=0.3, min_leaf=2)
    ens.attach_member_rows(ds.feature_matrix)
    for tree in ens.trees:
        leaves = tree.leaf_assignment(ds.feature_matrix)
        for nd in tree.nodes:
            if nd.is_leaf:
                np.testing.assert_array_equal(
                    nd.member_rows, np.flatnonzero(leaves == nd.id))
            assert nd.n_samples == nd.member_rows.size


def test_boosting_reduces_training_error():
    ds = synthetic.friedman(200, 6, noise=0.2, seed=2)
    few = tp.fit_gbt(ds, num_trees=2, max_depth=3, learning_rate=0.1, min_leaf=5)
    many = tp.fit_gbt(ds, num_trees=40, max_depth=3, learning_rate=0.1, min_leaf=5)
    assert (r2(ds.response, tp.predict(many, ds.feature_matrix))
            > r2(ds.response, tp.predict(few, ds.feature_matrix)))


def test_constant_response_warns_and_fits_bare_roots():
    X = np.arange(12.0).reshape(-1, 1)
    ds = Dataset.from_arrays(X, np.full(12, 3.25))
    with pytest.warns(UserWarning, match="constant"):
        ens = tp.fit_gbt(ds, num_trees=2, max_depth=2, learning_rate=0.5,
                         min_leaf=1)
    assert all(len(t.nodes) == 1 for t in ens.trees)
    np.testing.assert_array_equal(tp.predict(ens, X), np.full(12, 3.25))


def test_hyperparameter_validation():
    ds = _steps_dataset()
    with pytest.raises(ValueError):
        tp.fit_gbt(ds, num_trees=0, max_depth=1, learning_rate=0.1, min_leaf=1)
    with pytest.raises(ValueError):
        tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=0.0, min_leaf=1)
    with pytest.raises(ValueError):
        tp.fit_gbt(ds, num_trees=1, max_depth=1, learning_rate=0.1, min_leaf=0)


def test_r2_reference_points():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2(y, y) == 1.0
    assert r2(y, np.full(4, y.mean())) == 0.0
    assert r2(y, -y) < 0.0


def test_structural_equal_detects_changes(small_dataset):
    a = tp.fit_gbt(small_dataset, num_trees=2, max_depth=2, learning_rate=0.2,
                   min_leaf=3)
    b = tp.fit_gbt(small_dataset, num_trees=2, max_depth=2, learning_rate=0.2,
                   min_leaf=3)
    assert a.structural_equal(b)
    b.trees[0].nodes[1].mu += 1e-9
    assert not a.structural_equal(b)


def test_feature_count_mismatch_rejected(small_dataset):
    ens = tp.fit_gbt(small_dataset, num_trees=1, max_depth=1,
                     learning_rate=0.2, min_leaf=3)
    with pytest.raises(ValueError, match="features"):
        ens.attach_member_rows(small_dataset.feature_matrix[:, :3])
