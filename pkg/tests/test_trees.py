from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import kde_1d
from treeanomaly.clustering import kmeans
from treeanomaly.datasets import Dataset, SyntheticSpec, generate_synthetic
from treeanomaly.trees import (
    ClusterTree,
    TreeParams,
    _child_seed,
    build_tree,
    density_weight_scores,
    ecblof_scores,
    leaf_weights,
    tree_detect,
)

MGBTAI = TreeParams.preset("mgbtai")
DBTAI = TreeParams.preset("dbtai")
PLAIN = TreeParams(min_cluster_frac=0.5, leaf_level=1)  # no small-cluster redirection


def test_presets():
    assert (MGBTAI.min_cluster_frac, MGBTAI.leaf_level, MGBTAI.density_weighting) == (0.20, 4, False)
    assert (DBTAI.small_cluster_frac, DBTAI.leaf_level, DBTAI.min_cluster_frac) == (0.02, 3, 0.10)
    assert (DBTAI.branching, DBTAI.split_threshold, DBTAI.density_weighting) == (2, 0.9, True)


def test_params_validation():
    with pytest.raises(ValueError):
        TreeParams(min_cluster_frac=0.1, leaf_level=3, small_cluster_frac=0.2)
    with pytest.raises(ValueError):
        TreeParams(min_cluster_frac=0.1, leaf_level=3, branching=3)


def _leaf_sets(tree):
    return [set(leaf.indices.tolist()) for leaf in tree.leaves]


def _check_partition(tree, n):
    sets = _leaf_sets(tree)
    assert sum(len(s) for s in sets) == n
    assert set().union(*sets) == set(range(n))
    assert np.all(tree.leaf_of >= 0)


def test_single_point_tree():
    tree = build_tree(np.array([[3.0, 4.0]]), DBTAI, seed=0)
    assert len(tree.leaves) == 1 and tree.leaves[0] is tree.root


def test_empty_points_rejected():
    with pytest.raises(ValueError):
        build_tree(np.empty((0, 2)), MGBTAI)


def test_mgbtai_depth_and_min_size():
    x = np.random.default_rng(1).normal(size=(100, 3))
    tree = build_tree(x, MGBTAI, seed=5)
    _check_partition(tree, 100)
    for node in tree.nodes():
        assert node.depth <= 4
        if not node.is_leaf:
            assert node.size >= 20
            assert len(node.children) == 2


def test_dbtai_first_split_separates_blobs():
    rng = np.random.default_rng(2)
    x = np.vstack([rng.normal(size=(50, 2)), rng.normal(size=(50, 2)) + 20])
    tree = build_tree(x, DBTAI, seed=9)
    direct = kmeans(x, 2, seed=_child_seed(9, ""))
    first = sorted(c.size for c in tree.root.children)
    assert first == [50, 50]
    for c, child in enumerate(tree.root.children):
        np.testing.assert_array_equal(child.indices, np.flatnonzero(direct.assignments == c))
    assert {frozenset(c.indices.tolist()) for c in tree.root.children} == {frozenset(range(50)), frozenset(range(50, 100))}


def test_dbtai_rejects_lopsided_split():
    # one far point would take a split of 1 vs 99
    x = np.concatenate([np.zeros(99), [50.0]]) + np.linspace(0, 1e-3, 100)
    tree = build_tree(x, TreeParams(min_cluster_frac=0.1, leaf_level=3, split_threshold=0.9), seed=0)
    assert len(tree.leaves) == 1


@settings(max_examples=1000, deadline=None)
@given(
    n=st.integers(1, 60),
    d=st.integers(1, 3),
    seed=st.integers(0, 2**32 - 1),
    preset=st.sampled_from([MGBTAI, DBTAI]),
)
def test_random_trees_partition_and_depth(n, d, seed, preset):
    x = np.random.default_rng(seed).normal(size=(n, d)) * np.random.default_rng(seed + 1).uniform(0.1, 10)
    tree = build_tree(x, preset, seed)
    _check_partition(tree, n)
    assert tree.depth <= preset.leaf_level
    s = ecblof_scores(tree, x)
    assert np.all(np.isfinite(s)) and np.all(s >= 0)


def test_build_is_deterministic():
    x = np.random.default_rng(3).normal(size=(300, 4))
    a, b = build_tree(x, DBTAI, 11), build_tree(x, DBTAI, 11)
    assert _leaf_sets(a) == _leaf_sets(b)


def test_score_zero_at_centroid():
    x = np.array([[-1.0], [0.0], [1.0]])
    tree = ClusterTree.from_leaves(x, [[0, 1, 2]], PLAIN)
    assert ecblof_scores(tree, x)[1] == 0.0


def test_small_leaf_scores_against_nearest_large_leaf():
    x = np.array([[0.0], [1.0], [100.0]])
    params = TreeParams(min_cluster_frac=0.5, leaf_level=3, small_cluster_frac=0.4)
    tree = ClusterTree.from_leaves(x, [[0, 1], [2]], params)
    np.testing.assert_allclose(ecblof_scores(tree, x), [0.5, 0.5, 99.5])


def test_scores_invariant_under_duplication():
    x = np.array([0.0, 0.1, 0.25, 10.0, 10.1, 10.3, 100.0, 100.0])
    params = TreeParams(min_cluster_frac=0.05, leaf_level=2, small_cluster_frac=0.01)
    once = ecblof_scores(build_tree(x, params, 4), x)
    xx = np.concatenate([x, x])
    twice = ecblof_scores(build_tree(xx, params, 4), xx)
    np.testing.assert_allclose(twice[:8], once, atol=1e-12)
    np.testing.assert_allclose(twice[8:], once, atol=1e-12)


def test_density_weighting_single_leaf_is_identity():
    x = np.random.default_rng(0).normal(size=(20, 2))
    tree = ClusterTree.from_leaves(x, [np.arange(20)], DBTAI)
    raw = ecblof_scores(tree, x)
    np.testing.assert_allclose(density_weight_scores(raw, tree, x), raw)
    np.testing.assert_allclose(density_weight_scores(raw, tree, x, combine="product"), raw)


def _two_leaf_oracle(x, groups, h, combine):
    dens = [kde_1d(x, v, h) for v in x]
    d = [sum(dens[i] for i in g) / len(g) for g in groups]
    med = sorted(d)[len(d) // 2] if len(d) % 2 else (sorted(d)[len(d) // 2 - 1] + sorted(d)[len(d) // 2]) / 2
    biggest = max(len(g) for g in groups)
    out = [0.0] * len(x)
    for g, dc in zip(groups, d):
        r, m = dc / med, len(g) / biggest
        factor = 1 + m * (r - 1) if combine == "blend" else r * m
        c = sum(x[i] for i in g) / len(g)
        for i in g:
            out[i] = abs(x[i] - c) * factor
    return out


@pytest.mark.parametrize("combine", ["blend", "product"])
def test_density_weighting_matches_scalar_oracle(combine):
    x = [0.0, 0.2, 0.4, 0.7, 5.0, 6.0, 7.5]
    groups = [[0, 1, 2, 3], [4, 5, 6]]
    tree = ClusterTree.from_leaves(np.array(x), groups, PLAIN)
    raw = ecblof_scores(tree, np.array(x))
    got = density_weight_scores(raw, tree, np.array(x), bandwidth=1.0, combine=combine)
    np.testing.assert_allclose(got, _two_leaf_oracle(x, groups, 1.0, combine), rtol=1e-9, atol=1e-12)


def test_denser_leaf_amplifies_equal_raw_score():
    # A and B have equal size and equal raw scores; C sits next to A and raises its density
    x = np.array([0.0, 0.3, 10.0, 10.3, 0.45, 0.5])
    tree = ClusterTree.from_leaves(x, [[0, 1], [2, 3], [4, 5]], PLAIN)
    raw = ecblof_scores(tree, x)
    assert raw[0] == pytest.approx(raw[2])
    w = density_weight_scores(raw, tree, x, bandwidth=0.5)
    assert w[0] > w[2]


@pytest.mark.parametrize("combine", ["blend", "product"])
def test_weighting_monotone_in_density(combine):
    # helper leaf C approaches A; three isolated leaves pin the median density
    prev = None
    for gap in (8.0, 4.0, 2.0, 1.0, 0.5):
        x = np.array([0.0, 0.3, 0.3 + gap, 0.6 + gap, 30.0, 30.3, 50.0, 50.3, 70.0, 70.3])
        groups = [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]
        tree = ClusterTree.from_leaves(x, groups, PLAIN)
        raw = ecblof_scores(tree, x)
        w = density_weight_scores(raw, tree, x, bandwidth=0.5, combine=combine)[0]
        if prev is not None:
            assert w >= prev * (1 - 1e-12)
        prev = w
    assert prev > raw[0]


def test_density_weighting_zero_variance_needs_bandwidth():
    x = np.ones((6, 1))
    tree = ClusterTree.from_leaves(x, [[0, 1, 2], [3, 4, 5]], PLAIN)
    with pytest.raises(ValueError, match="bandwidth"):
        leaf_weights(tree, x)


def test_identical_points_flag_nothing():
    for preset in ("mgbtai", "dbtai"):
        res = tree_detect(Dataset("flat", np.full((50, 2), 3.0)), preset, seed=0)
        assert not res.predictions.any()


@pytest.mark.parametrize("preset", ["mgbtai", "dbtai"])
def test_singleton_detected(preset):
    ds = generate_synthetic(SyntheticSpec("univariate-series", 1000, 1, 1, 8.0, 7))
    res = tree_detect(ds, preset, seed=7)
    assert res.predictions[ds.labels == 1].all()


def test_dbtai_blob_recall():
    ds = generate_synthetic(SyntheticSpec("multivariate-blobs", 500, 5, 5, 6.0, 1))
    res = tree_detect(ds, "dbtai", seed=1)
    assert res.predictions[ds.labels == 1].mean() == 1.0


def test_detect_threadsafe_and_deterministic():
    ds = generate_synthetic(SyntheticSpec("multivariate-blobs", 400, 3, 4, 6.0, 3))
    serial = [tree_detect(ds, p, 5).predictions for p in ("mgbtai", "dbtai") * 4]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(lambda p: tree_detect(ds, p, 5).predictions, ("mgbtai", "dbtai") * 4))
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a, b)


def test_combine_rule_selectable():
    from treeanomaly import bench

    with pytest.raises(ValueError, match="combine"):
        TreeParams(0.1, 3, combine="sum")
    ds = generate_synthetic(SyntheticSpec("multivariate-blobs", 300, 3, 3, 6.0, 0))
    product = bench.detect(ds, "dbtai", seed=0)
    blend = bench.detect(ds, "dbtai", seed=0, combine="blend")
    assert not np.allclose(product.scores, blend.scores)
