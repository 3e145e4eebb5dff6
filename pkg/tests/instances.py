"""Tree catalogue shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from shadowprice import FbmSpec, InfeasibleError, ScenarioTree, binomial_tree, fbm_quantization_tree
from shadowprice.dual import feasibility_margin

LAMBDAS = (0.0, 0.01, 0.1, 0.3)
HURSTS = (0.25, 0.5, 0.75)


def depth1_tree() -> ScenarioTree:
    return ScenarioTree.from_nested((1.0, [(0.5, 2.0), (0.5, 0.5)]))


def hand_trees() -> dict:
    return {
        "depth1": depth1_tree(),
        "depth1_skew": ScenarioTree.from_nested((1.0, [(0.3, 1.2), (0.7, 0.9)])),
        "depth2_drift": binomial_tree(1.0, 1.3, 0.85, 2, 0.6),
        "depth2_hand": ScenarioTree.from_nested(
            (1.0, [(0.4, (1.3, [(0.5, 1.6), (0.5, 1.1)])), (0.6, (0.8, [(0.3, 1.0), (0.7, 0.6)]))])),
    }


def fbm_tree(hurst: float, depth: int, sigma: float, mu: float = 0.0) -> ScenarioTree:
    return fbm_quantization_tree(FbmSpec(hurst, n_steps=depth, mu=mu, sigma=sigma), depth)


def small_trees() -> dict:
    """Every catalogue tree with at most eight leaves."""
    trees = hand_trees()
    for h in HURSTS:
        trees[f"fbm_H{h}_d3"] = fbm_tree(h, 3, 0.2)
    return trees


def duality_suite() -> list:
    """``(name, tree, lambda)`` instances for the duality and shadow-price checks."""
    out = [(name, tree, lam) for name, tree in small_trees().items() for lam in LAMBDAS]
    for h in HURSTS:
        tree = fbm_tree(h, 6, 0.1)
        out += [(f"fbm_H{h}_d6", tree, lam) for lam in (0.01, 0.1)]
    out.append(("fbm_H0.75_d8", fbm_tree(0.75, 8, 0.05), 0.01))
    return out


def split_arbitrage(instances) -> tuple[list, list]:
    """Separate instances admitting a strictly consistent price system from the rest."""
    ok, excluded = [], []
    for inst in instances:
        try:
            feasibility_margin(inst[1], inst[2])
        except InfeasibleError:
            excluded.append(inst)
        else:
            ok.append(inst)
    return ok, excluded


@st.composite
def random_trees(draw, max_depth=3, max_branch=3):
    depth = draw(st.integers(1, max_depth))

    def node(d):
        price = draw(st.floats(0.2, 5.0))
        if d == depth:
            return price
        k = draw(st.integers(1, max_branch))
        w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        return (price, [(float(q), node(d + 1)) for q in w])

    return ScenarioTree.from_nested(node(0))


@st.composite
def arbitrage_free_trees(draw, max_depth=3):
    """Binary trees with one up- and one down-move at every node, so ``lambda = 0`` is feasible."""
    depth = draw(st.integers(1, max_depth))

    def node(price, d):
        if d == depth:
            return price
        up = price * draw(st.floats(1.02, 1.6))
        down = price * draw(st.floats(0.6, 0.98))
        q = draw(st.floats(0.1, 0.9))
        return (price, [(q, node(up, d + 1)), (1.0 - q, node(down, d + 1))])

    return ScenarioTree.from_nested(node(draw(st.floats(0.5, 2.0)), 0))


def example_divergence_tree_small():
    from shadowprice import example_divergence_tree

    return example_divergence_tree(3, 0.5)
