"""Price models and the proportional-cost trading ledger on trees and grids.

Trades are attached to nodes. A purchase at node ``n`` pays the ask ``S_n``
per share; a sale receives the bid ``(1 - lam) S_n``. A discrete time grid
is simply a single-path tree (``ScenarioTree.chain``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_lambda, check_nonnegative_array, check_positive_array, check_scalar
from .exceptions import ParameterError
from .fbm import FbmSpec
from .tree import ScenarioTree

LEDGER_RTOL = 1e-12


@dataclass(frozen=True)
class CostSpec:
    """Proportional cost ``lam`` in [0, 1) and initial cash ``x``."""

    lam: float = 0.0
    x: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lam", check_lambda(self.lam))
        x = check_scalar(self.x, "x")
        if not math.isfinite(x):
            raise ParameterError("x", "initial cash must be finite")
        object.__setattr__(self, "x", float(x))


@dataclass(frozen=True)
class PriceModel:
    """Either geometric fBm ``exp(sigma B_t + mu t)`` or an explicit price list."""

    kind: str
    fbm: FbmSpec | None = None
    prices: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("geometric-fbm", "custom-sequence"):
            raise ParameterError("kind", f"unknown price model {self.kind!r}")
        if self.kind == "geometric-fbm" and self.fbm is None:
            raise ParameterError("fbm", "geometric-fbm needs an FbmSpec")
        if self.kind == "custom-sequence":
            if self.prices is None:
                raise ParameterError("prices", "custom-sequence needs explicit prices")
            check_positive_array(self.prices, "prices")

    @classmethod
    def geometric_fbm(cls, spec: FbmSpec) -> "PriceModel":
        return cls("geometric-fbm", fbm=spec)

    @classmethod
    def custom(cls, prices) -> "PriceModel":
        return cls("custom-sequence", prices=tuple(float(s) for s in np.ravel(prices)))

    def evaluate(self, fbm_values, times) -> np.ndarray:
        """Prices from fBm values at the given times (geometric model only)."""
        if self.kind != "geometric-fbm":
            return np.asarray(self.prices, dtype=float)
        return np.exp(self.fbm.sigma * np.asarray(fbm_values) + self.fbm.mu * np.asarray(times))

    def to_tree(self) -> ScenarioTree:
        if self.kind != "custom-sequence":
            raise ParameterError("kind", "only explicit sequences map to a single-path tree")
        return ScenarioTree.chain(self.prices)


@dataclass
class Strategy:
    """Per-node holdings after the node's trade.

    ``x`` is the pre-trade cash at the root; the pre-trade share position is
    always zero. ``buys`` and ``sells`` are cumulative volumes.
    """

    phi0: np.ndarray
    phi1: np.ndarray
    buys: np.ndarray
    sells: np.ndarray
    x: float = 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "phi0", "phi1", "buys", "sells"])
            for i in range(len(self.phi0)):
                w.writerow([i, repr(float(self.phi0[i])), repr(float(self.phi1[i])),
                            repr(float(self.buys[i])), repr(float(self.sells[i]))])

    def increments(self, tree: ScenarioTree) -> tuple[np.ndarray, np.ndarray]:
        par = tree.parent[1:]
        db, ds = self.buys.copy(), self.sells.copy()
        db[1:] -= self.buys[par]
        ds[1:] -= self.sells[par]
        return db, ds

    def closed_at_leaves(self, tree: ScenarioTree, atol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.phi1[tree.leaves]) <= atol))


def _as_tree(prices) -> ScenarioTree:
    if isinstance(prices, ScenarioTree):
        return prices
    if isinstance(prices, PriceModel):
        return prices.to_tree()
    return ScenarioTree.chain(check_positive_array(prices, "prices"))


def self_finance(trades, prices, cost: CostSpec) -> Strategy:
    """Propagate the cash ledger for per-node ``(buy, sell)`` volumes.

    ``trades`` is an ``(n_nodes, 2)`` array or a ``(buys, sells)`` pair of
    per-node increments; ``prices`` is a tree, a ``PriceModel`` or a plain
    price sequence.
    """
    tree = _as_tree(prices)
    if isinstance(trades, tuple):
        db, ds = (np.asarray(a, dtype=float) for a in trades)
    else:
        arr = np.asarray(trades, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ParameterError("trades", "expected an (n_nodes, 2) array of (buy, sell)")
        db, ds = arr[:, 0], arr[:, 1]
    if db.shape != (tree.n_nodes,) or ds.shape != (tree.n_nodes,):
        raise ParameterError("trades", f"need one (buy, sell) pair per node ({tree.n_nodes})")
    check_nonnegative_array(db, "buy")
    check_nonnegative_array(ds, "sell")
    cash_step = -tree.S * db + (1.0 - cost.lam) * tree.S * ds
    cash_step[0] += cost.x
    buys, sells = tree.cumulative(db), tree.cumulative(ds)
    return Strategy(tree.cumulative(cash_step), buys - sells, buys, sells, cost.x)


def liquidation_values(strategy: Strategy, prices, cost: CostSpec) -> np.ndarray:
    """Liquidation value at every node: long shares at the bid, shorts at the ask."""
    S = _as_tree(prices).S
    pos = strategy.phi1
    return strategy.phi0 + np.maximum(pos, 0.0) * (1.0 - cost.lam) * S - np.maximum(-pos, 0.0) * S


def liquidation_value(strategy: Strategy, prices, cost: CostSpec, node: int) -> float:
    tree = _as_tree(prices)
    if not 0 <= node < tree.n_nodes:
        raise ParameterError("node", f"node {node} not in tree")
    pos, S = strategy.phi1[node], tree.S[node]
    return float(strategy.phi0[node] + max(pos, 0.0) * (1.0 - cost.lam) * S - max(-pos, 0.0) * S)


def total_variation(strategy: Strategy, up_to: int, tree: ScenarioTree | None = None) -> tuple[float, float]:
    """``(tv_cash, tv_shares)`` accumulated along the root-to-node path.

    Without a tree the strategy is read as a single path (node ``i`` has
    parent ``i - 1``).
    """
    pth = tree.path(up_to) if tree is not None else list(range(up_to + 1))
    cash = np.concatenate([[strategy.x], strategy.phi0[pth]])
    tv_cash = float(np.abs(np.diff(cash)).sum())
    return tv_cash, float(strategy.buys[up_to] + strategy.sells[up_to])


def is_admissible(strategy: Strategy, prices, cost: CostSpec, bound: float) -> bool:
    """True iff the liquidation value never drops below ``-bound``."""
    bound = float(bound)
    if bound < 0 or math.isnan(bound):
        raise ParameterError("bound", "admissibility bound must be >= 0")
    if math.isinf(bound):
        return True
    return bool(np.all(liquidation_values(strategy, prices, cost) >= -bound))


def ledger_residual(strategy: Strategy, tree: ScenarioTree, cost: CostSpec) -> float:
    """Largest relative violation of the equality self-financing condition."""
    db, ds = strategy.increments(tree)
    prev = np.empty(tree.n_nodes)
    prev[0] = strategy.x
    prev[1:] = strategy.phi0[tree.parent[1:]]
    expected = -tree.S * db + (1.0 - cost.lam) * tree.S * ds
    scale = np.maximum.reduce([np.abs(prev), np.abs(strategy.phi0), tree.S * (db + ds), np.ones_like(prev)])
    return float(np.max(np.abs(strategy.phi0 - prev - expected) / scale))
