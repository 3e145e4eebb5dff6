"""Minimization over consistent price systems on a scenario tree.

A consistent price system is parameterized by its terminal masses
``m0 = p * z0`` and ``m1 = p * z1`` on the leaves; node values follow from
the martingale towers, so the only constraints left are the per-node spread
conditions ``(1 - lam) S M0 <= M1 <= S M0`` and ``sum(m0) = 1``. Masses
rather than densities keep the variables bounded on rare branches, where
consistency can force densities of order ``1 / p``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize_scalar, root_scalar
from sklearn.base import BaseEstimator

from ._ipm import ConvexProgram, interior_point
from ._validation import check_scalar
from .exceptions import InfeasibleError, ParameterError, SolverError
from .market import CostSpec
from .primal import PrimalSolution, SolverConfig, maximize_utility
from .tree import ScenarioTree
from .utility import UtilitySpec, exponential_utility

MIN_MARGIN = 1e-12
ROW_SCALE_FLOOR = 1e-8
SEARCH_HALF_WIDTH = 1.0  # in log y
# below this the band is thinner than phase-one precision; z1 = S z0 is consistent for any lam
NARROW_BAND = 1e-9


@dataclass
class ConsistentPriceSystem:
    """Node values of the density process ``z0`` and of ``z1 = z0 * s_hat``."""

    z0: np.ndarray
    z1: np.ndarray

    def tower_residual(self, tree: ScenarioTree) -> float:
        """Largest relative violation of ``z(node) = sum_children p z(child)``."""
        worst = 0.0
        for z in (self.z0, self.z1):
            agg = np.zeros(tree.n_nodes)
            np.add.at(agg, tree.parent[1:], tree.p[1:] * z[1:])
            inner = tree.inner
            scale = np.maximum(np.abs(z[inner]), 1e-300)
            worst = max(worst, float(np.max(np.abs(agg[inner] - z[inner]) / scale, initial=0.0)))
        return worst

    def spread_violation(self, tree: ScenarioTree, lam: float) -> float:
        """Largest violation of ``(1 - lam) S z0 <= z1 <= S z0`` relative to ``S z0``."""
        ref = tree.S * self.z0
        lo = (1.0 - lam) * ref - self.z1
        hi = self.z1 - ref
        scale = np.maximum(np.abs(ref), 1e-300)
        return float(np.max(np.maximum(np.maximum(lo, hi), 0.0) / scale))

    def is_equivalent(self) -> bool:
        return bool(np.all(self.z0 > 0))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "z0", "z1"])
            for i in range(len(self.z0)):
                w.writerow([i, repr(float(self.z0[i])), repr(float(self.z1[i]))])


@dataclass
class DualSolution:
    cps: ConsistentPriceSystem
    y: float
    value: float
    m0: np.ndarray
    m1: np.ndarray
    cost: CostSpec
    report: dict = field(default_factory=dict)

    def leaf_density(self, tree: ScenarioTree) -> np.ndarray:
        return self.m0 / tree.leaf_prob

    def derivative(self, tree: ScenarioTree, utility: UtilitySpec) -> float:
        """``v'(y) = E[z0 V'(y z0)]`` at the solved system."""
        z = self.leaf_density(tree)
        pos = self.m0 > 0
        return float(np.sum(self.m0[pos] * utility.v_prime(self.y * z[pos])))


class _DualProgram:
    """Constraint matrices and a strictly feasible start, cached per (tree, lam)."""

    def __init__(self, tree: ScenarioTree, lam: float):
        self.tree, self.lam = tree, lam
        inc = tree.incidence.toarray().T  # (n_nodes, n_leaves): node mass = inc @ leaf mass
        # rows in density units where that is safe; capped on very rare nodes
        row_scale = 1.0 / np.maximum(tree.node_prob, ROW_SCALE_FLOOR)
        L = len(tree.leaves)
        self.L = L
        if lam > 0:
            keep = [n for n in range(tree.n_nodes) if not self._duplicate(n)]
            self.rows = np.array(keep)
            # (1-lam) M0 - M1/S <= 0 and M1/S - M0 <= 0 at every kept node
            R = inc[self.rows] * row_scale[self.rows, None]
            inv_s = 1.0 / tree.S[self.rows]
            G = np.vstack([np.hstack([(1.0 - lam) * R, -R * inv_s[:, None]]),
                           np.hstack([-R, R * inv_s[:, None]])])
            self.G = sp.csr_matrix(G)
            self.h = np.zeros(2 * len(self.rows))
            self.A = np.hstack([np.ones((1, L)), np.zeros((1, L))])
            self.b = np.ones(1)
        else:
            mart = []
            for n in tree.inner:
                kids = tree.children[n]
                row = (tree.S[kids, None] / tree.S[n] * inc[kids]).sum(axis=0) - inc[n]
                if np.max(np.abs(row)) > 1e-14:
                    mart.append(row * row_scale[n])
            self.A = np.vstack([np.ones((1, L))] + ([np.array(mart)] if mart else []))
            self.b = np.zeros(self.A.shape[0])
            self.b[0] = 1.0
            self.G = sp.diags(-row_scale[tree.leaves]).tocsr()
            self.h = np.zeros(L)
        self.start, self.margin = self._phase_one()

    def _duplicate(self, n: int) -> bool:
        kids = self.tree.children[n]
        return len(kids) == 1 and self.tree.S[kids[0]] == self.tree.S[n]

    def _phase_one(self):
        """Maximize the smallest constraint slack; a positive optimum certifies strict feasibility."""
        nv = self.G.shape[1]
        c = np.zeros(nv + 1)
        c[-1] = -1.0
        A_ub = sp.hstack([self.G, np.ones((self.G.shape[0], 1))]).tocsr()
        A_eq = np.hstack([self.A, np.zeros((self.A.shape[0], 1))])
        bounds = [(None, None)] * nv + [(None, 1.0)]
        res = linprog(c, A_ub=A_ub, b_ub=self.h, A_eq=A_eq, b_eq=self.b, bounds=bounds, method="highs",
                      options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
        if res.status != 0:
            raise InfeasibleError(f"no consistent price system: phase-one LP status {res.status} ({res.message})")
        margin = float(res.x[-1])
        if margin <= MIN_MARGIN:
            raise InfeasibleError("no strictly consistent price system exists on this tree "
                                  f"(best margin {margin:.3e}); the market admits (approximate) arbitrage "
                                  "at this cost level")
        w = res.x[:-1]
        slack = self.h - self.G @ w
        if np.min(slack, initial=np.inf) <= 0:
            raise InfeasibleError(f"phase-one point not strictly feasible (margin {margin:.3e} "
                                  "below solver precision)")
        return w, margin

    def program(self, y: float, utility: UtilitySpec) -> ConvexProgram:
        p = self.tree.leaf_prob
        L = self.L

        def split(w):
            return w[:L]

        # objective divided by y: same minimizer, multipliers independent of y's scale
        def value(w):
            m0 = split(w)
            return float(p @ utility.v(y * m0 / p)) / y

        def grad(w):
            g = np.zeros_like(w)
            g[:L] = utility.v_prime(y * split(w) / p)
            return g

        def hess(w):
            diag = np.zeros(w.size)
            diag[:L] = (y / p) * utility.v_second(y * split(w) / p)
            return np.diag(diag)

        return ConvexProgram(value, grad, hess, self.A, self.b, self.G, self.h)


_PROGRAM_CACHE: dict = {}


def _dual_program(tree: ScenarioTree, lam: float) -> _DualProgram:
    if lam < NARROW_BAND:
        lam = 0.0
    key = (id(tree), lam)
    hit = _PROGRAM_CACHE.get(key)
    if hit is not None and hit.tree is tree:
        return hit
    prog = _DualProgram(tree, lam)
    if len(_PROGRAM_CACHE) > 32:
        _PROGRAM_CACHE.clear()
    _PROGRAM_CACHE[key] = prog
    return prog


def feasibility_margin(tree: ScenarioTree, lam: float) -> float:
    """Phase-one margin; raises ``InfeasibleError`` when no strictly consistent system exists."""
    return _dual_program(tree, float(lam)).margin


def minimize_dual(tree: ScenarioTree, cost: CostSpec, y: float, utility: UtilitySpec | None = None,
                  solver_cfg: SolverConfig | None = None) -> DualSolution:
    """Minimize ``E[V(y z0_T)]`` over consistent price systems."""
    check_scalar(y, "y", low=0.0, include_low=False)
    utility = utility or exponential_utility()
    cfg = solver_cfg or SolverConfig()
    probe = utility.v(np.array([0.5, 1.0, 2.0]))
    if probe[0] + probe[2] - 2 * probe[1] < 0:
        raise ParameterError("utility", "conjugate function is not convex")
    dp = _dual_program(tree, cost.lam)
    res = interior_point(dp.program(float(y), utility), dp.start, tol=cfg.tol,
                         max_iters=cfg.max_iters, step0=cfg.step0)
    L = dp.L
    m0 = np.maximum(res.w[:L], 0.0)
    m1 = res.w[L:].copy() if dp.lam > 0 else tree.S[tree.leaves] * m0
    inc_t = tree.incidence.T
    node_prob = tree.node_prob
    z0 = (inc_t @ m0) / node_prob
    z1 = (inc_t @ m1) / node_prob
    p = tree.leaf_prob
    value = float(p @ utility.v(y * m0 / p))
    report = {"iterations": res.iterations, "kkt_residual": res.residual, "polished": res.polished,
              "phase_one_margin": dp.margin, "band_collapsed": dp.lam != cost.lam}
    return DualSolution(ConsistentPriceSystem(z0, z1), float(y), value, m0, m1, cost, report)


def dual_value_curve(tree: ScenarioTree, cost: CostSpec, utility: UtilitySpec | None = None, ys=(),
                     rel_step: float = 1e-4, solver_cfg: SolverConfig | None = None):
    """``(y, v(y), central difference, formula derivative)`` for each ``y``."""
    utility = utility or exponential_utility()
    out = []
    for y in ys:
        sol = minimize_dual(tree, cost, y, utility, solver_cfg)
        hi = minimize_dual(tree, cost, y * (1 + rel_step), utility, solver_cfg).value
        lo = minimize_dual(tree, cost, y * (1 - rel_step), utility, solver_cfg).value
        out.append((float(y), sol.value, (hi - lo) / (2 * y * rel_step), sol.derivative(tree, utility)))
    return out


@dataclass
class ConjugacyReport:
    u: float
    v_plus_xy: float
    gap: float
    y_hat: float
    u_prime: float
    x: float
    primal: PrimalSolution
    dual: DualSolution
    marginal_lhs: float
    marginal_rhs: float
    evaluations: int

    @property
    def relative_gap(self) -> float:
        return self.gap / max(abs(self.u), 1e-300)

    def to_dict(self) -> dict:
        return {"u": self.u, "v_plus_xy": self.v_plus_xy, "gap": self.gap, "y_hat": self.y_hat,
                "u_prime": self.u_prime}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def conjugacy_check(tree: ScenarioTree, cost: CostSpec, utility: UtilitySpec | None = None,
                    x: float | None = None, solver_cfg: SolverConfig | None = None,
                    primal: PrimalSolution | None = None) -> ConjugacyReport:
    """Compare ``u(x)`` with ``min_y v(y) + x y``.

    ``v`` is convex, so the minimizer solves ``v'(y) + x = 0``; a secant
    iteration in ``log y`` started at the primal marginal utility finds it,
    with a bounded line search as fallback.
    """
    utility = utility or exponential_utility()
    x = cost.x if x is None else float(x)
    cost = CostSpec(cost.lam, x)
    if primal is None:
        primal = maximize_utility(tree, cost, utility, solver_cfg)
    cache = {}

    def solve(log_y):
        if log_y not in cache:
            cache[log_y] = minimize_dual(tree, cost, math.exp(log_y), utility, solver_cfg)
        return cache[log_y]

    def objective(log_y):
        return solve(log_y).value + x * math.exp(log_y)

    def slope(log_y):
        return math.exp(log_y) * (solve(log_y).derivative(tree, utility) + x)

    centre = math.log(primal.y_hat) if primal.y_hat > 0 else 0.0
    root = root_scalar(slope, x0=centre, x1=centre + 1e-3, method="secant", xtol=1e-12, maxiter=50)
    if root.converged and math.isfinite(root.root):
        best = float(root.root)
    else:
        lo, hi = centre - SEARCH_HALF_WIDTH, centre + SEARCH_HALF_WIDTH
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
        if not res.success or min(res.x - lo, hi - res.x) < 1e-6:
            raise SolverError(f"outer search over y failed near log y = {res.x:.6g}")
        best = float(res.x)
    fun = objective(best)
    dual = cache[best]
    lhs = x * primal.y_hat
    rhs = float(tree.leaf_prob @ (primal.wealth * utility.u_prime(primal.wealth)))
    return ConjugacyReport(primal.value, fun, abs(primal.value - fun),
                           dual.y, primal.y_hat, x, primal, dual, lhs, rhs, len(cache))


class DualMinimizer(BaseEstimator):
    """Estimator wrapper: ``fit(tree)`` minimizes the dual at fixed ``y``."""

    def __init__(self, lam=0.0, y_dual=1.0, tol=1e-9, max_iters=200, step0=1.0):
        self.lam = lam
        self.y_dual = y_dual
        self.tol = tol
        self.max_iters = max_iters
        self.step0 = step0

    def fit(self, tree: ScenarioTree, y=None):
        sol = minimize_dual(tree, CostSpec(self.lam), self.y_dual, exponential_utility(),
                            SolverConfig(self.tol, self.max_iters, self.step0))
        self.solution_ = sol
        self.value_ = sol.value
        self.cps_ = sol.cps
        self.report_ = sol.report
        return self
