import json
import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowprice import (FbmSpec, ParameterError, ResourceError, ScenarioTree, binomial_tree, enumerate_paths,
                         example_divergence_tree, fbm_quantization_tree)
from shadowprice.tree import divergence_rise_prob
from instances import random_trees


def test_nested_depth1():
    tree = ScenarioTree.from_nested((1.0, [(0.5, 2.0), (0.5, 0.5)]))
    assert tree.n_nodes == 3 and tree.depth == 1
    np.testing.assert_array_equal(tree.leaves, [1, 2])
    np.testing.assert_array_equal(tree.S, [1.0, 2.0, 0.5])


@pytest.mark.parametrize("kwargs, field", [
    (dict(parent=[-1, 0, 0], t=[0, 1, 1], p=[1.0, 0.5, 0.4], S=[1.0, 1.0, 1.0]), "p"),
    (dict(parent=[-1, 0, 0], t=[0, 1, 1], p=[1.0, 0.5, 0.5], S=[1.0, 0.0, 1.0]), "S"),
    (dict(parent=[-1, 0, 0, 1], t=[0, 1, 1, 2], p=[1.0, 0.5, 0.5, 1.0], S=[1.0] * 4), "tree"),
    (dict(parent=[-1, 2, 0], t=[0, 2, 1], p=[1.0, 1.0, 1.0], S=[1.0] * 3), "parent"),
    (dict(parent=[-1, 0], t=[0, 2], p=[1.0, 1.0], S=[1.0] * 2), "t"),
])
def test_invalid_trees(kwargs, field):
    with pytest.raises(ParameterError) as exc:
        ScenarioTree(**kwargs)
    assert exc.value.field == field


@given(random_trees())
def test_path_probabilities_sum_to_one(tree):
    paths = enumerate_paths(tree)
    assert len(paths) == len(tree.leaves)
    assert sum(p for _, _, p in paths) == pytest.approx(1.0, abs=1e-12)
    for leaf, nodes, prob in paths:
        assert nodes[0] == 0 and nodes[-1] == leaf
        assert prob == pytest.approx(np.prod(tree.p[nodes]), rel=1e-14)


@given(random_trees())
def test_tree_json_round_trip(tree):
    back = ScenarioTree.from_json(tree.to_json())
    for name in ("parent", "t", "p", "S"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tree, name))


@given(random_trees())
def test_conditional_expectation_of_node_prices(tree):
    # towers: E[X_T | node] is a P-martingale on the tree
    x = tree.S[tree.leaves]
    m = tree.conditional_expectation(x)
    agg = np.zeros(tree.n_nodes)
    np.add.at(agg, tree.parent[1:], tree.p[1:] * m[1:])
    np.testing.assert_allclose(agg[tree.inner], m[tree.inner], rtol=1e-12)


def test_json_fields_exact():
    tree = ScenarioTree.from_nested((1.0, [(0.5, 2.0), (0.5, 0.5)]))
    recs = json.loads(tree.to_json())
    assert [sorted(r) for r in recs] == [["S", "id", "p", "parent", "t"]] * 3
    recs[0]["extra"] = 1
    with pytest.raises(ParameterError):
        ScenarioTree.from_records(recs)


def test_enumerate_binary_depths():
    assert [p for _, _, p in enumerate_paths(ScenarioTree.constant(1.0, 1))] == [0.5, 0.5]
    paths = enumerate_paths(ScenarioTree.constant(1.0, 3))
    assert len(paths) == 8 and all(p == 0.125 for _, _, p in paths)


def test_quantized_depth1_brownian():
    tree = fbm_quantization_tree(FbmSpec(0.5, sigma=1.0), 1)
    np.testing.assert_allclose(tree.S[tree.leaves], [math.e, 1 / math.e], rtol=1e-15)
    np.testing.assert_array_equal(tree.p, [1.0, 0.5, 0.5])


@given(st.integers(1, 9), st.floats(0.1, 2.0), st.floats(-1.0, 1.0))
def test_quantized_brownian_recombines(depth, sigma, mu):
    tree = fbm_quantization_tree(FbmSpec(0.5, sigma=sigma, mu=mu), depth)
    step = sigma * math.sqrt(1.0 / depth)
    groups = defaultdict(list)
    for leaf in tree.leaves:
        pth = tree.path(leaf)
        ups = sum(1 for a, b in zip(pth, pth[1:]) if tree.children[a][0] == b)
        groups[ups].append(tree.S[leaf])
    for ups, vals in groups.items():
        assert np.ptp(vals) <= 1e-12 * max(vals)
        expected = math.exp(step * (2 * ups - depth) + mu)
        assert vals[0] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("h", [0.25, 0.75])
def test_quantized_log_variance(h):
    # two-point moment matching keeps Var(log S_T) exact at every depth
    sigma = 0.3
    target = sigma ** 2
    errs = []
    for depth in (4, 6, 8, 10):
        tree = fbm_quantization_tree(FbmSpec(h, sigma=sigma), depth)
        logs = np.log(tree.S[tree.leaves])
        var = tree.leaf_prob @ logs ** 2 - (tree.leaf_prob @ logs) ** 2
        errs.append(abs(var - target) / target)
    assert max(errs) < 1e-12


def test_quantized_tree_depth_guard():
    with pytest.raises(ResourceError, match="65535"):
        fbm_quantization_tree(FbmSpec(0.7), 15)


def test_quantized_tree_is_history_dependent():
    tree = fbm_quantization_tree(FbmSpec(0.75, sigma=1.0), 2)
    # the rise after a rise is larger than the rise after a fall for H > 1/2
    up, down = tree.children[0]
    uu = math.log(tree.S[tree.children[up][0]] / tree.S[up])
    du = math.log(tree.S[tree.children[down][0]] / tree.S[down])
    assert uu > du


def test_divergence_tree_small():
    tree = example_divergence_tree(2, 0.5)
    assert len(tree.leaves) == 3
    assert sum(p for _, _, p in enumerate_paths(tree)) == pytest.approx(1.0, abs=1e-12)
    assert sorted(tree.S[tree.leaves]) == [1.0, 2.0, 3.0]
    assert tree.S[0] == 2.0


@pytest.mark.parametrize("n", [2, 4, 8])
def test_divergence_tree_rise_probabilities(n):
    tail = 0.3
    tree = example_divergence_tree(n, tail)
    c = tree.meta["tail_constant"]
    assert c == pytest.approx((1 - tail) * math.exp(4))
    for level in range(2, n + 2):
        reach = (1 - tail) * math.prod(divergence_rise_prob(k) for k in range(2, level))
        assert reach <= c * math.exp(-level ** 2) * (1 + 1e-12)
        # the top of the ladder is reached with exactly this probability
        if level == n + 1:
            top = tree.node_prob[np.argmax(tree.S)]
            assert top == pytest.approx(reach, rel=1e-12)
    assert tree.leaf_prob.sum() == pytest.approx(1.0, abs=1e-12)


def test_divergence_tree_parameter_errors():
    with pytest.raises(ParameterError):
        example_divergence_tree(1)
    with pytest.raises(ParameterError):
        example_divergence_tree(3, 1.0)


def test_binomial_tree_prices():
    tree = binomial_tree(1.0, 1.1, 0.9, 2, 0.6)
    np.testing.assert_allclose(sorted(tree.S[tree.leaves]), sorted([1.21, 0.99, 0.99, 0.81]))
    np.testing.assert_allclose(tree.leaf_prob, [0.36, 0.24, 0.24, 0.16])
