import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowprice import (CostSpec, FbmSpec, ParameterError, PriceModel, ScenarioTree, Strategy,
                         is_admissible, liquidation_value, liquidation_values, self_finance, total_variation)
from shadowprice.market import ledger_residual
from instances import random_trees

lams = st.floats(0.0, 0.9)


def _strategy(phi0, phi1):
    phi0, phi1 = np.atleast_1d(float(phi0)), np.atleast_1d(float(phi1))
    return Strategy(phi0, phi1, np.maximum(phi1, 0), np.maximum(-phi1, 0))


def test_cost_validation():
    for bad in (1.0, -0.1, 1.5, float("nan")):
        with pytest.raises(ParameterError) as exc:
            CostSpec(bad)
        assert exc.value.field == "lambda"
    with pytest.raises(ParameterError):
        CostSpec(0.1, float("inf"))


def test_zero_trades_keep_cash():
    tree = ScenarioTree.chain([1.0, 2.0, 3.0])
    s = self_finance(np.zeros((3, 2)), tree, CostSpec(0.2, 5.0))
    np.testing.assert_array_equal(s.phi0, 5.0)
    np.testing.assert_array_equal(s.phi1, 0.0)
    assert total_variation(s, 2) == (0.0, 0.0)


def test_round_trip_ledger():
    s = self_finance([[1.0, 0.0], [0.0, 1.0]], [100.0, 110.0], CostSpec(0.01, 3.0))
    assert s.phi0[-1] == pytest.approx(3.0 + 8.9, rel=1e-14)
    assert s.phi1[-1] == 0.0
    assert total_variation(s, 1)[1] == 2.0


@pytest.mark.parametrize("lam", [0.0, 0.1, 0.25, 0.49])
def test_short_and_cover(lam):
    s = self_finance([[0.0, 1.0], [1.0, 0.0]], [2.0, 1.0], CostSpec(lam))
    assert s.phi0[-1] == pytest.approx(2 * (1 - lam) - 1, rel=1e-14)


def test_liquidation_examples():
    cost = CostSpec(0.1)
    assert liquidation_value(_strategy(3.0, 0.0), [10.0], cost, 0) == 3.0
    assert liquidation_value(_strategy(0.0, 2.0), [10.0], cost, 0) == pytest.approx(18.0)
    for lam in (0.0, 0.3, 0.9):
        assert liquidation_value(_strategy(0.0, -1.0), [10.0], CostSpec(lam), 0) == -10.0
    with pytest.raises(ParameterError):
        liquidation_value(_strategy(0.0, 0.0), [10.0], cost, 3)


def test_negative_volume_rejected():
    with pytest.raises(ParameterError):
        self_finance([[1.0, -0.5]], [1.0], CostSpec())


def test_admissibility():
    cost = CostSpec(0.0, 0.0)
    zero = self_finance(np.zeros((2, 2)), [1.0, 1.0], cost)
    assert is_admissible(zero, [1.0, 1.0], cost, 0.0)
    # short one share at 2 with no cash buffer; the price reaches 5 before cover
    short = self_finance([[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]], [2.0, 5.0, 1.0], cost)
    assert not is_admissible(short, [2.0, 5.0, 1.0], cost, 2.0)
    assert is_admissible(short, [2.0, 5.0, 1.0], cost, 3.0)
    assert is_admissible(short, [2.0, 5.0, 1.0], cost, math.inf)
    with pytest.raises(ParameterError):
        is_admissible(zero, [1.0, 1.0], cost, -1.0)


@st.composite
def trades_on_tree(draw):
    tree = draw(random_trees())
    vols = draw(st.lists(st.tuples(st.floats(0, 3), st.floats(0, 3)), min_size=tree.n_nodes,
                         max_size=tree.n_nodes))
    return tree, np.array(vols)


@given(trades_on_tree(), lams, st.floats(-5, 5))
def test_ledger_is_exact(tt, lam, x):
    tree, vols = tt
    cost = CostSpec(lam, x)
    s = self_finance(vols, tree, cost)
    assert ledger_residual(s, tree, cost) <= 1e-12
    np.testing.assert_allclose(s.phi1, s.buys - s.sells, atol=1e-12)
    for leaf in tree.leaves:
        pth = tree.path(leaf)
        assert np.all(np.diff(s.buys[pth]) >= 0) and np.all(np.diff(s.sells[pth]) >= 0)
        tv_cash, tv_shares = total_variation(s, leaf, tree)
        assert tv_shares == pytest.approx(vols[pth].sum(), rel=1e-12)


@given(trades_on_tree(), st.floats(0.0, 0.45), st.floats(0.0, 0.45))
def test_liquidation_monotone_in_cost(tt, l1, l2):
    tree, vols = tt
    lo, hi = sorted((l1, l2))
    v_lo = liquidation_values(self_finance(vols, tree, CostSpec(lo)), tree, CostSpec(lo))
    v_hi = liquidation_values(self_finance(vols, tree, CostSpec(hi)), tree, CostSpec(hi))
    assert np.all(v_hi <= v_lo + 1e-12 * (1 + np.abs(v_lo)))


@given(trades_on_tree())
def test_frictionless_liquidation_is_mark_to_market(tt):
    tree, vols = tt
    s = self_finance(vols, tree, CostSpec(0.0))
    np.testing.assert_allclose(liquidation_values(s, tree, CostSpec(0.0)), s.phi0 + s.phi1 * tree.S,
                               rtol=1e-12, atol=1e-12)


def test_price_models():
    spec = FbmSpec(0.7, mu=0.1, sigma=0.2)
    m = PriceModel.geometric_fbm(spec)
    np.testing.assert_allclose(m.evaluate([0.0, 1.0], [0.0, 1.0]), [1.0, math.exp(0.3)])
    c = PriceModel.custom([1.0, 2.0])
    assert c.to_tree().n_nodes == 2
    with pytest.raises(ParameterError):
        PriceModel.custom([1.0, 0.0])
    with pytest.raises(ParameterError):
        PriceModel("geometric-fbm")
    s = self_finance([[1.0, 0.0], [0.0, 1.0]], c, CostSpec(0.5))
    assert s.phi0[-1] == pytest.approx(-1.0 + 2.0 * 0.5)


def test_strategy_csv(tmp_path):
    s = self_finance([[1.0, 0.0], [0.0, 1.0]], [1.0, 2.0], CostSpec())
    s.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "node_id,phi0,phi1,buys,sells"
    assert lines[2] == "1,1.0,0.0,1.0,1.0"
