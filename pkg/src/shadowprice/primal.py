"""Utility maximization under proportional costs on a scenario tree.

The decision variables are non-negative buy and sell volumes at every node,
leaves included, subject to a flat position at every leaf. Terminal wealth
is affine in the volumes, so the program is concave and is solved by the
interior-point routine in ``_ipm``. Without costs the problem reduces to an
unconstrained concave program in the share positions, solved by Newton's
method.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from ._ipm import ConvexProgram, interior_point
from ._validation import check_scalar
from .exceptions import ParameterError, SolverError
from .market import CostSpec, Strategy, liquidation_values, self_finance
from .tree import ScenarioTree
from .utility import UtilitySpec, exponential_utility


@dataclass(frozen=True)
class SolverConfig:
    """Stopping tolerance on the scaled KKT residual, iteration cap, first trial step."""

    tol: float = 1e-9
    max_iters: int = 200
    step0: float = 1.0

    def __post_init__(self):
        check_scalar(self.tol, "tol", low=0.0, include_low=False)
        check_scalar(self.max_iters, "max_iters", kind=int, low=1)
        check_scalar(self.step0, "step0", low=0.0, high=1.0, include_low=False)


@dataclass
class PrimalSolution:
    strategy: Strategy
    value: float
    wealth: np.ndarray
    y_hat: float
    buys: np.ndarray
    sells: np.ndarray
    cost: CostSpec
    report: dict = field(default_factory=dict)

    def to_csv(self, path):
        self.strategy.to_csv(path)
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["value", "kkt_residual"])
            w.writerow([repr(float(self.value)), repr(float(self.report["kkt_residual"]))])


def _resolve(cost, utility, solver_cfg):
    if not isinstance(cost, CostSpec):
        raise ParameterError("cost", "expected a CostSpec")
    return (utility or exponential_utility()), (solver_cfg or SolverConfig())


def wealth_map(tree: ScenarioTree, lam: float) -> sp.csr_matrix:
    """Matrix ``C`` with terminal wealth ``x + C @ [buys, sells]`` for a flat final position."""
    S = sp.diags(tree.S)
    return sp.hstack([-tree.incidence @ S, (1.0 - lam) * (tree.incidence @ S)]).tocsr()


def _position_map(tree: ScenarioTree):
    """Matrix ``D`` with terminal wealth ``x + D @ theta``, theta the positions at inner nodes."""
    child = np.arange(1, tree.n_nodes)
    col = np.full(tree.n_nodes, -1)
    col[tree.inner] = np.arange(len(tree.inner))
    step = tree.S[child] - tree.S[tree.parent[child]]
    P = sp.csr_matrix((step, (child - 1, col[tree.parent[child]])), shape=(len(child), len(tree.inner)))
    return (tree.incidence[:, 1:] @ P).toarray()


def _solve_frictionless(tree, x, utility, cfg):
    D = _position_map(tree)
    p = tree.leaf_prob
    scale = abs(float(p @ utility.u(np.full(len(p), x)))) or 1.0
    theta = np.zeros(D.shape[1])

    def value(th):
        return float(p @ utility.u(x + D @ th)) / scale

    def grad(th):
        return D.T @ (p * utility.u_prime(x + D @ th)) / scale

    f = value(theta)
    g = grad(theta)
    res = float(np.max(np.abs(g), initial=0.0))
    best = (res, theta.copy())
    it = 0
    prev = np.inf
    for it in range(1, cfg.max_iters + 1):
        # past tol, keep taking Newton steps while they still shrink the residual;
        # flat directions on rare paths need this to pin the positions down
        if res <= cfg.tol and (res >= 0.5 * prev or res < 1e-15):
            break
        prev = res
        wealth = x + D @ theta
        negH = (D.T * (-p * utility.u_second(wealth) / scale)) @ D
        step = np.linalg.lstsq(negH, g, rcond=1e-14)[0]
        t = cfg.step0
        slope = float(g @ step)
        while t > 1e-14:
            cand = theta + t * step
            fc = value(cand)
            if np.isfinite(fc) and fc >= f + 1e-4 * t * slope:
                break
            t *= 0.5
        theta = theta + t * step
        f, g = value(theta), grad(theta)
        res = float(np.max(np.abs(g), initial=0.0))
        if res < best[0]:
            best = (res, theta.copy())
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta), initial=0.0) > 1e10:
            raise SolverError("positions diverged; the frictionless tree admits arbitrage",
                              best=best[1], residual=best[0])
        if t <= 1e-14:
            break
    res, theta = best
    if res > cfg.tol:
        raise SolverError(f"Newton iteration stalled above tol={cfg.tol:g}", best=best[1], residual=best[0])
    pos = np.zeros(tree.n_nodes)
    pos[tree.inner] = theta
    delta = pos.copy()
    delta[1:] -= pos[tree.parent[1:]]
    return np.maximum(delta, 0.0), np.maximum(-delta, 0.0), {"iterations": it, "kkt_residual": res,
                                                             "method": "newton"}


def _solve_with_costs(tree, cost, utility, cfg):
    n = tree.n_nodes
    C = wealth_map(tree, cost.lam)
    A = (tree.incidence @ sp.hstack([sp.identity(n), -sp.identity(n)])).tocsr()
    p = tree.leaf_prob
    x = cost.x
    scale = abs(float(p @ utility.u(np.full(len(p), x)))) or 1.0

    def value(w):
        return -float(p @ utility.u(x + C @ w)) / scale

    def grad(w):
        return -C.T @ (p * utility.u_prime(x + C @ w)) / scale

    def hess(w):
        return (C.T @ sp.diags(-p * utility.u_second(x + C @ w) / scale) @ C).toarray()

    prog = ConvexProgram(value, grad, hess, A, np.zeros(A.shape[0]), -sp.identity(2 * n, format="csr"),
                         np.zeros(2 * n))
    res = interior_point(prog, np.ones(2 * n), tol=cfg.tol, max_iters=cfg.max_iters,
                         step0=cfg.step0)
    w = res.w.copy()
    if res.polished:
        w[res.active] = 0.0
    w = np.maximum(w, 0.0)
    buys, sells = w[:n], w[n:]
    overlap = np.minimum(buys, sells)
    buys, sells = buys - overlap, sells - overlap
    report = {"iterations": res.iterations, "kkt_residual": res.residual, "method": "interior-point",
              "polished": res.polished}
    return buys, sells, report


def maximize_utility(tree: ScenarioTree, cost: CostSpec, utility: UtilitySpec | None = None,
                     solver_cfg: SolverConfig | None = None) -> PrimalSolution:
    """Maximize expected utility of terminal liquidation wealth over buy/sell volumes."""
    utility, cfg = _resolve(cost, utility, solver_cfg)
    if cost.lam == 0.0:
        buys, sells, report = _solve_frictionless(tree, cost.x, utility, cfg)
    else:
        buys, sells, report = _solve_with_costs(tree, cost, utility, cfg)
    strategy = self_finance((buys, sells), tree, cost)
    if not strategy.closed_at_leaves(tree, atol=1e-8):
        raise SolverError("solution leaves an open position at a leaf", best=(buys, sells),
                          residual=float(np.max(np.abs(strategy.phi1[tree.leaves]))))
    wealth = liquidation_values(strategy, tree, cost)[tree.leaves]
    p = tree.leaf_prob
    value = float(p @ utility.u(wealth))
    y_hat = float(p @ utility.u_prime(wealth))
    return PrimalSolution(strategy, value, wealth, y_hat, buys, sells, cost, report)


def indirect_utility_curve(tree: ScenarioTree, cost: CostSpec, utility: UtilitySpec | None = None,
                           xs=(), step: float = 1e-4, solver_cfg: SolverConfig | None = None):
    """``(x, u(x), u'(x))`` with the derivative from central differences."""
    xs = [float(x) for x in xs]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ParameterError("xs", "must be sorted")

    def u_at(x):
        return maximize_utility(tree, CostSpec(cost.lam, x), utility, solver_cfg).value

    return [(x, u_at(x), (u_at(x + step) - u_at(x - step)) / (2 * step)) for x in xs]


class UtilityMaximizer(BaseEstimator):
    """Estimator wrapper: ``fit(tree)`` solves the primal problem.

    Attributes set by ``fit``: ``solution_``, ``value_``, ``strategy_``,
    ``wealth_``, ``y_hat_``, ``report_``.
    """

    def __init__(self, lam=0.0, x=0.0, tol=1e-9, max_iters=200, step0=1.0):
        self.lam = lam
        self.x = x
        self.tol = tol
        self.max_iters = max_iters
        self.step0 = step0

    def fit(self, tree: ScenarioTree, y=None):
        sol = maximize_utility(tree, CostSpec(self.lam, self.x), exponential_utility(),
                               SolverConfig(self.tol, self.max_iters, self.step0))
        self.solution_ = sol
        self.value_ = sol.value
        self.strategy_ = sol.strategy
        self.wealth_ = sol.wealth
        self.y_hat_ = sol.y_hat
        self.report_ = sol.report
        return self
