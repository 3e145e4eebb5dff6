"""Shadow prices from dual optimizers, and checks of their structure.

The candidate shadow price is ``s_hat = z1 / z0``. On a solved instance it
should lie in the bid-ask spread, sit at the ask wherever the optimizer
buys and at the bid wherever it sells, be a martingale under the measure
with density ``z0``, and reproduce the optimizer as a frictionless market.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import DualSolution
from .exceptions import ShapeError, VerificationError
from .market import CostSpec, Strategy
from .primal import PrimalSolution, SolverConfig, maximize_utility
from .tree import ScenarioTree
from .utility import UtilitySpec

TOL_ZERO = 1e-12
TOL_BIND = 1e-8
MAX_OFFENDERS = 50

ASK, BID, INTERIOR, UNDEFINED = "ask", "bid", "interior", "undefined"


@dataclass
class ShadowPrice:
    s_hat: np.ndarray  # NaN where undefined
    binding: np.ndarray  # per node: ask, bid, interior or undefined
    lam: float

    @property
    def defined(self) -> np.ndarray:
        return self.binding != UNDEFINED

    @property
    def undefined_nodes(self) -> list[int]:
        return np.nonzero(~self.defined)[0].tolist()


def extract_shadow(dual: DualSolution, tree: ScenarioTree, cost: CostSpec, tol_zero: float = TOL_ZERO,
                   tol_bind: float = TOL_BIND) -> ShadowPrice:
    z0, z1 = dual.cps.z0, dual.cps.z1
    defined = z0 > tol_zero
    s_hat = np.full(tree.n_nodes, np.nan)
    s_hat[defined] = z1[defined] / z0[defined]
    tol = tol_bind * tree.S
    binding = np.full(tree.n_nodes, INTERIOR, dtype=object)
    with np.errstate(invalid="ignore"):
        binding[defined & (s_hat - (1.0 - cost.lam) * tree.S <= tol)] = BID
        binding[defined & (tree.S - s_hat <= tol)] = ASK  # lam = 0 collapses both bands onto the ask
    binding[~defined] = UNDEFINED
    return ShadowPrice(s_hat, binding, cost.lam)


def slackness(strategy: Strategy, shadow: ShadowPrice, tree: ScenarioTree, cost: CostSpec) -> float:
    """Expected terminal value of the cumulative trading loss against ``s_hat``.

    Each purchase pays ``S - s_hat`` above the shadow price and each sale
    gives up ``s_hat - (1 - lam) S``; both are non-negative.
    """
    db, ds = strategy.increments(tree)
    s_hat = np.where(shadow.defined, shadow.s_hat, tree.S)
    loss = (tree.S - s_hat) * db + (s_hat - (1.0 - cost.lam) * tree.S) * ds
    return float(tree.node_prob @ loss)


@dataclass
class Check:
    name: str
    max_violation: float
    passing: bool
    offending_nodes: list = field(default_factory=list)
    tolerance: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "max_violation": self.max_violation, "passing": self.passing,
                "offending_nodes": [int(n) for n in self.offending_nodes[:MAX_OFFENDERS]],
                "tolerance": self.tolerance}


@dataclass
class VerificationReport:
    checks: list
    shadow: ShadowPrice
    frictionless: PrimalSolution | None = None

    @property
    def passing(self) -> bool:
        return all(c.passing for c in self.checks)

    def failing(self) -> list[str]:
        return [c.name for c in self.checks if not c.passing]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self, path=None) -> str:
        text = json.dumps({"passing": self.passing, "checks": [c.to_dict() for c in self.checks]}, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _offenders(mask) -> list[int]:
    return np.nonzero(mask)[0][:MAX_OFFENDERS].tolist()


def identifiable_nodes(shadow: ShadowPrice, tree: ScenarioTree, rtol: float = 1e-12) -> np.ndarray:
    """Inner nodes where the frictionless position is pinned down by a moving ``s_hat``."""
    out = np.zeros(tree.n_nodes, dtype=bool)
    for n in tree.inner:
        kids = tree.children[n]
        if shadow.defined[n] and np.all(shadow.defined[kids]):
            out[n] = np.max(np.abs(shadow.s_hat[kids] - shadow.s_hat[n])) > rtol * shadow.s_hat[n]
    return out


def verify_shadow(tree: ScenarioTree, cost: CostSpec, utility: UtilitySpec, primal: PrimalSolution,
                  dual: DualSolution, *, tol_spread: float = 1e-10, tol_trade: float = 1e-8,
                  tol_slack: float = 1e-8, tol_value: float = 1e-6, tol_position: float = 1e-5,
                  strict: bool = True, solver_cfg: SolverConfig | None = None) -> VerificationReport:
    """Run the shadow-price checks on a solved primal/dual pair.

    With ``strict`` a failing check raises ``VerificationError`` carrying the
    full report.
    """
    shadow = extract_shadow(dual, tree, cost)
    d = shadow.defined
    S, s_hat = tree.S, shadow.s_hat
    checks = []

    viol = np.zeros(tree.n_nodes)
    viol[d] = np.maximum.reduce([(1.0 - cost.lam) * S[d] - s_hat[d], s_hat[d] - S[d], np.zeros(d.sum())]) / S[d]
    checks.append(Check("spread_containment", float(viol.max(initial=0.0)), bool(viol.max(initial=0.0) <= tol_spread),
                        _offenders(viol > tol_spread), tol_spread))

    db, ds = primal.strategy.increments(tree)
    bad_buy = (db > tol_trade) & (shadow.binding != ASK)
    bad_sell = (ds > tol_trade) & (shadow.binding != BID)
    if cost.lam == 0.0:
        bad_sell = (ds > tol_trade) & (shadow.binding != ASK)
    gap = np.zeros(tree.n_nodes)
    gap[d] = np.where(db[d] > tol_trade, (S[d] - s_hat[d]) / S[d], 0.0)
    gap[d] = np.maximum(gap[d], np.where(ds[d] > tol_trade, (s_hat[d] - (1 - cost.lam) * S[d]) / S[d], 0.0))
    mask = bad_buy | bad_sell
    checks.append(Check("complementary_slackness", float(gap.max(initial=0.0)), not mask.any(),
                        _offenders(mask), tol_trade))

    expected_loss = slackness(primal.strategy, shadow, tree, cost)
    checks.append(Check("expected_slackness", expected_loss, abs(expected_loss) <= tol_slack, [], tol_slack))

    frictionless = None
    if d.all():
        frictionless = maximize_utility(tree.with_prices(s_hat), CostSpec(0.0, cost.x), utility, solver_cfg)
        dv = abs(frictionless.value - primal.value) / max(abs(primal.value), 1e-300)
        checks.append(Check("frictionless_value", dv, dv <= tol_value, [], tol_value))
        ident = identifiable_nodes(shadow, tree)
        diff = np.where(ident, np.abs(frictionless.strategy.phi1 - primal.strategy.phi1), 0.0)
        checks.append(Check("frictionless_position", float(diff.max(initial=0.0)),
                            bool(diff.max(initial=0.0) <= tol_position), _offenders(diff > tol_position),
                            tol_position))
    else:
        checks.append(Check("frictionless_value", math.inf, False, shadow.undefined_nodes, tol_value))
        checks.append(Check("frictionless_position", math.inf, False, shadow.undefined_nodes, tol_position))

    # informational: undefined nodes are listed, never dropped
    checks.append(Check("undefined_nodes", float(len(shadow.undefined_nodes)), True, shadow.undefined_nodes, 0.0))

    report = VerificationReport(checks, shadow, frictionless)
    if strict and not report.passing:
        raise VerificationError(f"shadow-price checks failed: {report.failing()}", report)
    return report


def girsanov_check(dual: DualSolution, shadow: ShadowPrice, tree: ScenarioTree) -> float:
    """Largest ``|sum_c p_c (z0_c / z0_n)(s_c / s_n) - 1|`` over inner nodes with defined prices."""
    z0, s = dual.cps.z0, shadow.s_hat
    worst = 0.0
    for n in tree.inner:
        kids = tree.children[n]
        if not (shadow.defined[n] and np.all(shadow.defined[kids])):
            continue
        val = np.sum(tree.p[kids] * (z0[kids] / z0[n]) * (s[kids] / s[n]))
        worst = max(worst, abs(val - 1.0))
    return float(worst)


@dataclass
class TouchingStats:
    frac_paths_touch_ask: float
    frac_paths_touch_bid: float
    frac_paths_touch_both: float
    max_log_spread: float
    min_log_spread: float
    containment_ok: bool
    spread_width: float
    difference_paths: np.ndarray  # (n_leaves, depth + 1) of log S - log s_hat

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("frac_paths_touch_ask", "frac_paths_touch_bid",
                                              "frac_paths_touch_both", "max_log_spread",
                                              "min_log_spread", "containment_ok", "spread_width")}


def touching_stats(shadow: ShadowPrice, tree: ScenarioTree, cost: CostSpec, tol_bind: float = TOL_BIND,
                   tol_log: float = 1e-10) -> TouchingStats:
    """Path-wise contact of ``s_hat`` with the ask and bid bands, weighted by ``P``."""
    width = -math.log1p(-cost.lam)
    diff = np.log(tree.S) - np.log(shadow.s_hat)
    rel_ask = (tree.S - shadow.s_hat) <= tol_bind * tree.S
    rel_bid = (shadow.s_hat - (1.0 - cost.lam) * tree.S) <= tol_bind * tree.S
    ask_hit = tree.incidence @ (rel_ask & shadow.defined).astype(float) > 0
    bid_hit = tree.incidence @ (rel_bid & shadow.defined).astype(float) > 0
    p = tree.leaf_prob
    paths = np.array([diff[tree.path(leaf)] for leaf in tree.leaves])
    d = shadow.defined
    lo, hi = float(np.min(diff[d], initial=0.0)), float(np.max(diff[d], initial=0.0))
    return TouchingStats(float(p @ ask_hit), float(p @ bid_hit), float(p @ (ask_hit & bid_hit)), hi, lo,
                         bool(lo >= -tol_log and hi <= width + tol_log), width, paths)


@dataclass
class ItoCoefficients:
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    alpha_hat: np.ndarray
    checked: np.ndarray
    max_error: float


def ito_coefficients(shadow: ShadowPrice, dual: DualSolution, tree: ScenarioTree,
                     sigma_floor: float = 1e-10) -> ItoCoefficients:
    """Per-node discrete drift, volatility and market price of risk of ``s_hat``.

    The market price of risk is read off the density ratio: on a two-point
    node ``z0_c / z0_n = 1 - alpha sqrt(dt) xi_c`` with ``xi`` the
    standardized increment, which pins down ``alpha`` without regression.
    """
    n = tree.n_nodes
    mu, sig, alpha = (np.full(n, np.nan) for _ in range(3))
    checked = np.zeros(n, dtype=bool)
    rdt = math.sqrt(tree.dt)
    worst = 0.0
    for node in tree.inner:
        kids = tree.children[node]
        if len(kids) != 2:
            raise ShapeError(f"node {node} has {len(kids)} children; the two-point identity needs a binary tree")
        if not (shadow.defined[node] and np.all(shadow.defined[kids])):
            continue
        pk = tree.p[kids]
        ds = shadow.s_hat[kids] - shadow.s_hat[node]
        mean = pk @ ds
        std = math.sqrt(max(pk @ (ds - mean) ** 2, 0.0))
        mu[node] = mean / (shadow.s_hat[node] * tree.dt)
        sig[node] = std / (shadow.s_hat[node] * rdt)
        if sig[node] <= sigma_floor:
            continue
        xi = (ds - mean) / std
        ratio = dual.cps.z0[kids] / dual.cps.z0[node]
        alpha[node] = -(pk @ (ratio * xi)) / rdt
        checked[node] = True
        worst = max(worst, abs(alpha[node] - mu[node] / sig[node]))
    return ItoCoefficients(mu, sig, alpha, checked, float(worst))
