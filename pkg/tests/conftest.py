import numpy as np
import pytest

import treeprune as tp
from treeprune import synthetic


def toy_instance(seed: int):
    """Small trained ensemble plus centered response, sized for brute force.

    At most 5 trees, depth at most 2, n <= 60, m <= 40; ensembles with 4-5
    trees are kept at depth 1 so exhaustive support enumeration stays cheap.
    """
    T = 1 + seed % 5
    depth = 2 if T <= 3 else 1
    n = 40 + (seed * 7) % 21
    p = 5 + seed % 2
    ds = synthetic.friedman(n, p, noise=0.3, seed=seed)
    ens = tp.fit_gbt(ds, num_trees=T, max_depth=depth,
                     learning_rate=0.2 + 0.05 * (seed % 3),
                     min_leaf=2 + seed % 3, seed=seed)
    ens.attach_member_rows(ds.feature_matrix)
    rs = tp.build_rulespace(ens)
    v = ds.response - ens.base_score
    assert rs.m <= 40 and rs.n <= 60
    return rs, v


def single_tree_instance(seed: int, depth: int = 3):
    """One tree of the given depth; block and antichain oracles stay exact."""
    n = 50 + seed % 30
    ds = synthetic.friedman(n, 5, noise=0.3, seed=1000 + seed)
    ens = tp.fit_gbt(ds, num_trees=1, max_depth=depth, learning_rate=0.5,
                     min_leaf=2, seed=seed)
    ens.attach_member_rows(ds.feature_matrix)
    rs = tp.build_rulespace(ens)
    v = ds.response - ens.base_score
    return rs, v


@pytest.fixture
def small_dataset():
    return synthetic.friedman(80, 5, noise=0.2, seed=11)


@pytest.fixture
def small_rulespace():
    rs, v = toy_instance(2)
    return rs, v
