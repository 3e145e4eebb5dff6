"""Monte Carlo and tree-family diagnostics.

* stickiness of sampled paths for a family of hitting-time rules,
* the welfare factor ``f(lam) = -u(0)`` for exponential utility,
* payoffs of simple predictable rules with and without costs,
* the divergent-maximizer tree family.

Every report carries its checks as ``{name: bool}`` so callers can turn
them into exit codes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_lambda, check_scalar
from .dual import minimize_dual
from .exceptions import ParameterError
from .fbm import PathSet
from .market import CostSpec
from .primal import SolverConfig, maximize_utility
from .tree import ScenarioTree, example_divergence_tree
from .utility import UtilitySpec, exponential_utility

MAX_POSITION = 1e6


def _stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n) if n else math.nan


# -- stickiness ---------------------------------------------------------------


@dataclass(frozen=True)
class HittingRule:
    """Path-wise stopping rule on the sampling grid.

    ``zero``: stop at time 0. ``horizon``: stop at the last grid time, so
    the stopped event never happens. ``barrier``: first grid time with
    ``|X_t - X_0| >= level``, or the horizon if the barrier is never hit.
    """

    kind: str = "barrier"
    level: float = 0.5

    def __post_init__(self):
        if self.kind not in ("zero", "horizon", "barrier"):
            raise ParameterError("tau_rule", f"unknown hitting rule {self.kind!r}")
        if self.kind == "barrier":
            check_scalar(self.level, "barrier", low=0.0, include_low=False)

    def describe(self) -> str:
        if self.kind == "barrier":
            return f"first t with |X_t - X_0| >= {self.level:g}, else T"
        return {"zero": "tau = 0", "horizon": "tau = T"}[self.kind]

    def index(self, x: np.ndarray) -> np.ndarray:
        """Stopping index per row of ``x`` (column 0 is time 0)."""
        n_paths, width = x.shape
        if self.kind == "zero":
            return np.zeros(n_paths, dtype=np.int64)
        if self.kind == "horizon":
            return np.full(n_paths, width - 1, dtype=np.int64)
        hit = np.abs(x - x[:, :1]) >= self.level
        return np.where(hit.any(axis=1), hit.argmax(axis=1), width - 1)


@dataclass
class StickinessReport:
    delta: float
    tau_rule: str
    empirical_prob: float
    n_paths: int
    standard_error: float
    n_sigma: float = 3.0

    @property
    def positive(self) -> bool:
        """Positivity of the event probability at ``n_sigma`` standard errors."""
        return self.empirical_prob > 0 and self.empirical_prob - self.n_sigma * self.standard_error > 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["positive"] = self.positive
        return out


def stickiness_events(x: np.ndarray, delta: float, rule: HittingRule) -> np.ndarray:
    """Per-path indicator of ``tau < T`` and ``max_{t >= tau} |X_t - X_tau| < delta``."""
    tau = rule.index(x)
    width = x.shape[1]
    rows = np.arange(x.shape[0])
    after = np.arange(width)[None, :] >= tau[:, None]
    dev = np.where(after, np.abs(x - x[rows, tau][:, None]), 0.0)
    return (tau < width - 1) & (dev.max(axis=1) < delta)


def stickiness_estimate(paths: PathSet, delta: float, tau_rule: HittingRule | None = None,
                        n_sigma: float = 3.0) -> StickinessReport:
    """Empirical frequency of staying in a ``delta``-tube from the stopping time on."""
    delta = float(check_scalar(delta, "delta", low=0.0, include_low=False))
    rule = tau_rule or HittingRule()
    x = np.hstack([np.zeros((paths.n_paths, 1)), paths.values])
    events = stickiness_events(x, delta, rule)
    n = paths.n_paths
    prob = float(events.mean()) if n else 0.0
    return StickinessReport(delta, rule.describe(), prob, n, _stderr(prob, n), n_sigma)


# -- f(lambda) ----------------------------------------------------------------


@dataclass
class FCurve:
    lambdas: np.ndarray
    f: np.ndarray
    checks: dict = field(default_factory=dict)

    @property
    def passing(self) -> bool:
        return all(self.checks.values())

    def rows(self):
        return [(float(lam), float(v)) for lam, v in zip(self.lambdas, self.f)]


def f_lambda_curve(tree: ScenarioTree, lambdas, x: float = 0.0, utility: UtilitySpec | None = None,
                   solver_cfg: SolverConfig | None = None, rtol: float = 1e-9) -> FCurve:
    """``f(lam) = -u(x) e^x`` for each cost level, with its monotonicity checks."""
    utility = utility or exponential_utility()
    if utility.name != "exponential":
        raise ParameterError("utility", "the f(lambda) factorization needs exponential utility")
    lams = np.array([check_lambda(lam) for lam in lambdas], dtype=float)
    if lams.size < 2:
        raise ParameterError("lambdas", "need at least two cost levels")
    f = np.array([-maximize_utility(tree, CostSpec(lam, x), utility, solver_cfg).value * math.exp(x)
                  for lam in lams])
    order = np.argsort(lams)
    fs = f[order]
    checks = {
        "f_in_unit_interval": bool(np.all((fs > 0) & (fs <= 1.0 + rtol))),
        "f_nondecreasing": bool(np.all(np.diff(fs) >= -rtol * fs[1:])),
        "f_strict_trend": bool(fs[0] < fs[-1] * (1.0 - rtol)),
    }
    return FCurve(lams, f, checks)


# -- arbitrage demonstration --------------------------------------------------


@dataclass(frozen=True)
class TradingRule:
    """Bounded buy/hold/exit rule on the sampling grid.

    ``zero`` never trades; ``hold`` buys ``size`` shares at 0 and sells at T;
    ``momentum`` buys ``size`` shares at the first grid time the driving
    fBm reaches ``threshold`` and sells at T.
    """

    kind: str = "momentum"
    size: float = 1.0
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in ("zero", "hold", "momentum"):
            raise ParameterError("strategy", f"unknown rule {self.kind!r}")
        check_scalar(self.size, "size")
        if not abs(self.size) <= MAX_POSITION:
            raise ParameterError("size", f"position must be bounded by {MAX_POSITION:g} shares")

    def positions(self, b: np.ndarray) -> np.ndarray:
        """Shares held after trading at each grid time; flat at the last column."""
        n_paths, width = b.shape
        pos = np.zeros((n_paths, width))
        if self.kind == "hold":
            pos[:, :-1] = self.size
        elif self.kind == "momentum":
            entered = np.maximum.accumulate(b >= self.threshold, axis=1)
            pos[:, :-1] = self.size * entered[:, :-1]
        return pos


@dataclass
class PayoffSummary:
    mean: float
    standard_error: float
    minimum: float
    prob_above: float
    level: float

    @classmethod
    def of(cls, payoff: np.ndarray, level: float) -> "PayoffSummary":
        n = payoff.size
        if n == 0:
            return cls(math.nan, math.nan, math.nan, math.nan, level)
        se = float(payoff.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        return cls(float(payoff.mean()), se, float(payoff.min()), float(np.mean(payoff >= level)), level)


@dataclass
class ArbitrageReport:
    rule: TradingRule
    lam: float
    frictionless: PayoffSummary
    with_costs: PayoffSummary
    mean_cost: float
    cost_standard_error: float
    checks: dict = field(default_factory=dict)

    @property
    def passing(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"rule": asdict(self.rule), "lambda": self.lam, "frictionless": asdict(self.frictionless),
                "with_costs": asdict(self.with_costs), "mean_cost": self.mean_cost,
                "cost_standard_error": self.cost_standard_error, "checks": dict(self.checks)}


def rule_payoffs(paths: PathSet, rule: TradingRule, lam: float):
    """Per-path ``(frictionless payoff, payoff under costs, lam * sold volume * S)``.

    Buys pay the ask ``S``, sales receive the bid ``(1 - lam) S``; the
    position is closed at T, so the two payoffs differ exactly by the last
    column.
    """
    lam = check_lambda(lam)
    b = np.hstack([np.zeros((paths.n_paths, 1)), paths.values])
    S = paths.prices()
    pos = rule.positions(b)
    trade = np.diff(np.hstack([np.zeros((paths.n_paths, 1)), pos]), axis=1)
    bought = np.maximum(trade, 0.0)
    sold = np.maximum(-trade, 0.0)
    frictionless = np.sum(-S * trade, axis=1)
    cost = lam * np.sum(S * sold, axis=1)
    costly = np.sum(-S * bought + (1.0 - lam) * S * sold, axis=1)
    return frictionless, costly, cost


def arbitrage_demo(paths: PathSet, lam: float, rule: TradingRule | None = None, level: float = 0.0,
                   n_sigma: float = 3.0) -> ArbitrageReport:
    """Payoff summaries of ``rule`` with and without proportional costs."""
    rule = rule or TradingRule()
    fr, co, cost = rule_payoffs(paths, rule, lam)
    diff = fr - co
    n = diff.size
    diff_se = float(diff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    cost_se = float(cost.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    mean_cost = float(cost.mean()) if n else 0.0
    checks = {
        # cash lost to the spread is exactly lam * S per share sold
        "cost_ledger": bool(np.allclose(diff, cost, rtol=1e-12, atol=1e-12)),
        "costs_erode_mean": bool(np.mean(diff) >= mean_cost - n_sigma * diff_se) if n else True,
    }
    return ArbitrageReport(rule, float(lam), PayoffSummary.of(fr, level), PayoffSummary.of(co, level),
                           mean_cost, cost_se, checks)


# -- divergence family --------------------------------------------------------


@dataclass
class DivergenceRow:
    n: int
    value: float
    expected_tv: float
    head_mass: float
    dual_value: float
    root_position: float


@dataclass
class DivergenceReport:
    lam: float
    tail_prob: float
    rows: list
    checks: dict = field(default_factory=dict)

    @property
    def passing(self) -> bool:
        return all(self.checks.values())


def divergence_demo(n_values, tail_prob: float = 0.5, lam: float = 0.25, x: float = 0.0,
                    utility: UtilitySpec | None = None, solver_cfg: SolverConfig | None = None,
                    rtol: float = 1e-9) -> DivergenceReport:
    """Solve the divergent-maximizer family and check its finite-size trends.

    ``head_mass`` is the mass the optimal dual density puts on the head
    branch, ``expected_tv`` the expected total traded share volume.
    """
    lam = check_lambda(lam)
    if not 0.0 < lam < 0.5:
        raise ParameterError("lambda", f"the example needs 0 < lambda < 1/2, got {lam}")
    utility = utility or exponential_utility()
    ns = sorted(int(n) for n in n_values)
    rows = []
    for n in ns:
        tree = example_divergence_tree(n, tail_prob)
        cost = CostSpec(lam, x)
        primal = maximize_utility(tree, cost, utility, solver_cfg)
        dual = minimize_dual(tree, cost, primal.y_hat, utility, solver_cfg)
        head = tree.meta["head"]
        tv = float(tree.node_prob @ (primal.buys + primal.sells))
        rows.append(DivergenceRow(n, primal.value, tv, float(dual.cps.z0[head] * tree.node_prob[head]),
                                  dual.value + x * primal.y_hat, float(primal.strategy.phi1[head])))
    u = np.array([r.value for r in rows])
    tv = np.array([r.expected_tv for r in rows])
    mass = np.array([r.head_mass for r in rows])
    checks = {
        # above no-trade, below U(+inf) = 0
        "value_bounds": bool(np.all((u > -math.exp(-x)) & (u < 0.0))),
        "value_nondecreasing": bool(np.all(np.diff(u) >= -rtol * np.abs(u[1:]))),
        "tv_nondecreasing": bool(np.all(np.diff(tv) >= -rtol * tv[1:])),
        "head_mass_nonincreasing": bool(np.all(np.diff(mass) <= rtol * mass[:-1])),
    }
    return DivergenceReport(lam, float(tail_prob), rows, checks)
