import dataclasses
import math

import numpy as np
import pytest

from shadowprice import FbmSpec, ParameterError, ScenarioTree, example_divergence_tree
from shadowprice.diagnostics import (HittingRule, TradingRule, arbitrage_demo, divergence_demo, f_lambda_curve,
                                     rule_payoffs, stickiness_estimate)
from shadowprice.fbm import PathSet
from shadowprice.utility import exponential_utility
from instances import depth1_tree, hand_trees


def _paths(values, mu=0.0, sigma=1.0):
    values = np.asarray(values, dtype=float)
    spec = FbmSpec(0.5, horizon=1.0, n_steps=values.shape[1], mu=mu, sigma=sigma)
    return PathSet(values, spec, seed=0)


def test_stickiness_trivial_rules():
    rng = np.random.default_rng(3)
    paths = _paths(rng.normal(size=(200, 10)).cumsum(axis=1) * 0.1)
    rep = stickiness_estimate(paths, 1e6, HittingRule("zero"))
    assert rep.empirical_prob == 1.0 and rep.standard_error == 0.0
    rep = stickiness_estimate(paths, 1e6, HittingRule("horizon"))
    assert rep.empirical_prob == 0.0 and not rep.positive


def test_stickiness_barrier_by_hand():
    # path 0 hits 0.5 at step 1 and stays within 0.1; path 1 hits and leaves; path 2 never hits
    paths = _paths([[0.5, 0.55, 0.52], [0.6, 0.0, 0.1], [0.1, 0.2, 0.1]])
    rep = stickiness_estimate(paths, 0.1, HittingRule("barrier", 0.5))
    assert rep.empirical_prob == pytest.approx(1 / 3)
    assert rep.standard_error == pytest.approx(math.sqrt((1 / 3) * (2 / 3) / 3))


def test_stickiness_parameter_errors():
    paths = _paths([[0.0, 1.0]])
    for bad in (0.0, -1.0):
        with pytest.raises(ParameterError):
            stickiness_estimate(paths, bad)
    with pytest.raises(ParameterError):
        HittingRule("sometimes")
    with pytest.raises(ParameterError):
        HittingRule("barrier", 0.0)


def test_f_curve_shape():
    tree = hand_trees()["depth2_drift"]
    curve = f_lambda_curve(tree, [0.0, 0.01, 0.05, 0.2])
    assert np.all((curve.f > 0) & (curve.f <= 1.0))
    assert np.all(np.diff(curve.f) >= 0)
    assert curve.passing


def test_f_is_one_without_trading():
    curve = f_lambda_curve(ScenarioTree.constant(1.0, 2), [0.0, 0.1])
    np.testing.assert_allclose(curve.f, 1.0, rtol=1e-12)
    assert curve.checks["f_in_unit_interval"] and curve.checks["f_nondecreasing"]
    assert not curve.checks["f_strict_trend"]


def test_f_curve_errors():
    with pytest.raises(ParameterError):
        f_lambda_curve(depth1_tree(), [0.1])
    with pytest.raises(ParameterError):
        f_lambda_curve(depth1_tree(), [0.0, 1.0])
    with pytest.raises(ParameterError):
        other = dataclasses.replace(exponential_utility(), name="shifted")
        f_lambda_curve(depth1_tree(), [0.0, 0.1], utility=other)


def test_rule_payoffs_by_hand():
    b = np.array([[0.2, 0.6, 1.0], [0.0, -0.1, 0.3]])
    paths = _paths(b, sigma=0.5)
    S = paths.prices()
    fr, co, cost = rule_payoffs(paths, TradingRule("zero"), 0.1)
    assert np.all(fr == 0) and np.all(co == 0) and np.all(cost == 0)
    fr, co, cost = rule_payoffs(paths, TradingRule("hold", 2.0), 0.1)
    np.testing.assert_allclose(fr, 2.0 * (S[:, -1] - S[:, 0]), rtol=1e-14)
    np.testing.assert_allclose(fr - co, 0.1 * 2.0 * S[:, -1], rtol=1e-12)
    # momentum enters after the driver reaches 0.5: path 0 at step 2, path 1 never
    fr, co, cost = rule_payoffs(paths, TradingRule("momentum", 1.0, 0.5), 0.2)
    assert fr[0] == pytest.approx(S[0, 3] - S[0, 2], rel=1e-14)
    assert fr[1] == 0.0 and cost[1] == 0.0


def test_costs_erode_momentum_payoff():
    rng = np.random.default_rng(7)
    paths = _paths(rng.normal(size=(2000, 16)).cumsum(axis=1) * 0.25, sigma=0.3)
    rep = arbitrage_demo(paths, 0.05, TradingRule("momentum", 1.0, 0.5))
    assert rep.passing
    assert rep.with_costs.mean < rep.frictionless.mean
    assert rep.mean_cost > 0


def test_unbounded_rule_rejected():
    with pytest.raises(ParameterError):
        TradingRule("hold", 2e6)
    with pytest.raises(ParameterError):
        TradingRule("martingale")


def test_divergence_small_case_closed_form():
    # only the head node matters: short a shares at the bid, cover at the leaf
    lam = 0.25
    tree = example_divergence_tree(2, 0.5)
    head = tree.meta["head"]
    up, down = tree.children[head]
    p_up, p_down = tree.p[up], tree.p[down]
    s, s_up, s_down = tree.S[head], tree.S[up], tree.S[down]
    sale = (1 - lam) * s
    a = math.log(p_down * (sale - s_down) / (p_up * (s_up - sale))) / (s_up - s_down)
    head_value = -p_up * math.exp((s_up - sale) * a) - p_down * math.exp(-(sale - s_down) * a)
    want = (1 - tree.p[head]) * -1.0 + tree.p[head] * head_value
    row = divergence_demo([2], 0.5, lam).rows[0]
    assert row.value == pytest.approx(want, rel=1e-9)
    assert row.expected_tv == pytest.approx(2 * a * tree.p[head], rel=1e-7)
    assert row.dual_value == pytest.approx(row.value, rel=1e-9)


def test_divergence_trends():
    rep = divergence_demo([2, 3, 4], 0.5, 0.25)
    assert rep.passing
    assert rep.rows[-1].head_mass < rep.rows[0].head_mass


def test_divergence_parameter_errors():
    for bad in (0.0, 0.5, 0.7):
        with pytest.raises(ParameterError):
            divergence_demo([2], lam=bad)
