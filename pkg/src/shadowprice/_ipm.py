"""Dense primal-dual interior-point method for smooth convex programs.

Solves ``min f(w)`` subject to ``A w = b`` and ``G w <= h`` from a point
that strictly satisfies the inequalities, then polishes the result with
equality-constrained Newton steps on the identified active set so that
active constraints hold to rounding and inactive multipliers are exactly 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import nnls

from .exceptions import SolverError


@dataclass
class ConvexProgram:
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    A: np.ndarray  # dense or scipy.sparse
    b: np.ndarray
    G: np.ndarray  # dense or scipy.sparse
    h: np.ndarray


@dataclass
class IpmResult:
    w: np.ndarray
    eq_mult: np.ndarray
    ineq_mult: np.ndarray
    iterations: int
    residual: float
    active: np.ndarray
    polished: bool
    history: list = field(default_factory=list)


def _dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _gram(G, d) -> np.ndarray:
    """``G^T diag(d) G`` as a dense array."""
    if sp.issparse(G):
        return (G.T @ sp.diags(d) @ G).toarray()
    return (G.T * d) @ G


def _solve_kkt(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # barrier systems are ill-conditioned by design near the boundary; only a
    # genuinely singular matrix (dependent constraint rows) needs least squares
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            sol = sla.solve(K, rhs, assume_a="sym", check_finite=False)
            if np.all(np.isfinite(sol)):
                return sol
        except (np.linalg.LinAlgError, ValueError):
            pass
    return sla.lstsq(K, rhs, lapack_driver="gelsd")[0]


def kkt_residual(prog: ConvexProgram, w, nu, z) -> float:
    """Max of stationarity, primal infeasibility, dual sign and complementarity."""
    g = prog.grad(w)
    rd = g + prog.A.T @ nu + prog.G.T @ z
    scale = 1.0 + np.max(np.abs(g), initial=0.0)
    slack = prog.h - prog.G @ w
    parts = [np.max(np.abs(rd), initial=0.0) / scale,
             np.max(np.abs(prog.A @ w - prog.b), initial=0.0),
             np.max(np.maximum(-slack, 0.0), initial=0.0),
             np.max(np.maximum(-z, 0.0), initial=0.0),
             np.max(np.abs(z * slack), initial=0.0)]
    return float(max(parts))


def interior_point(prog: ConvexProgram, w0: np.ndarray, *, tol: float = 1e-10,
                   max_iters: int = 200, sigma: float = 0.1, step0: float = 1.0,
                   divergence_norm: float = 1e10, extra_iters: int = 4,
                   stall_factor: float = 1e3) -> IpmResult:
    w = np.array(w0, dtype=float)
    A, b, G, h = prog.A, prog.b, prog.G, prog.h
    n, p, m = w.size, A.shape[0], G.shape[0]
    s = h - G @ w
    if np.any(s <= 0):
        raise SolverError("interior-point start is not strictly feasible", best=w,
                          residual=float(-s.min()))
    z = np.ones(m)
    nu = np.zeros(p)
    history = []

    def residuals(w, nu, z, s, target):
        g = prog.grad(w)
        rd = g + A.T @ nu + G.T @ z
        rp = A @ w - b
        rc = z * s - target
        return rd, rp, rc, g

    mu = float(s @ z / m) if m else 0.0
    best = (np.inf, w.copy(), nu.copy(), z.copy())
    it = extra = stalled = 0
    for it in range(1, max_iters + 1):
        target = sigma * mu
        rd, rp, rc, g = residuals(w, nu, z, s, target)
        H = prog.hess(w)
        d = z / s
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H + _gram(G, d)
        K[:n, n:] = _dense(A).T
        K[n:, :n] = _dense(A)
        rhs = np.concatenate([-rd + G.T @ (rc / s), -rp])
        sol = _solve_kkt(K, rhs)
        dw, dnu = sol[:n], sol[n:]
        ds = -G @ dw
        dz = (-rc - z * ds) / s
        alpha = step0
        neg = ds < 0
        if np.any(neg):
            alpha = min(alpha, 0.99 * np.min(-s[neg] / ds[neg]))
        neg = dz < 0
        if np.any(neg):
            alpha = min(alpha, 0.99 * np.min(-z[neg] / dz[neg]))
        scale = 1.0 + np.max(np.abs(g), initial=0.0)
        merit0 = np.linalg.norm(np.concatenate([rd / scale, rp, rc]))
        for _ in range(60):
            w1, nu1, z1 = w + alpha * dw, nu + alpha * dnu, z + alpha * dz
            s1 = h - G @ w1
            if np.all(s1 > 0) and np.all(z1 > 0):
                v1 = prog.value(w1)
                if np.isfinite(v1):
                    rd1, rp1, rc1, _ = residuals(w1, nu1, z1, s1, target)
                    merit1 = np.linalg.norm(np.concatenate([rd1 / scale, rp1, rc1]))
                    if merit1 <= (1.0 - 1e-4 * alpha) * merit0 or alpha < 1e-12:
                        break
            alpha *= 0.5
        w, nu, z, s = w1, nu1, z1, h - G @ w1
        mu = float(s @ z / m) if m else 0.0
        res = kkt_residual(prog, w, nu, z)
        history.append(res)
        if res < best[0]:
            best = (res, w.copy(), nu.copy(), z.copy())
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > divergence_norm:
            raise SolverError("iterates diverged; the program is likely unbounded", best=best[1],
                              residual=best[0])
        stalled = stalled + 1 if alpha < 1e-3 else 0
        if res <= tol or extra:
            extra += 1
            # a few more steps shrink degenerate slack/multiplier pairs, which
            # sharpens the active-set guess used by the polish
            if extra > extra_iters or mu <= 1e-16 or alpha < 1e-3:
                break
        elif stalled >= 3 and best[0] <= stall_factor * tol:
            # rounding floor of the barrier system; the polish decides
            break
    if best[0] > stall_factor * tol:
        raise SolverError(f"interior point did not reach tol={tol:g} in {it} iterations",
                          best=best[1], residual=best[0])
    res, w, nu, z = best
    s = h - G @ w
    result = polish(prog, IpmResult(w, nu, z, it, res, s < z, False, history))
    if result.residual > tol:
        raise SolverError(f"interior point stalled at its rounding floor above tol={tol:g} "
                          "and the active-set polish did not recover", best=result.w,
                          residual=result.residual)
    return result


def _independent_rows(E: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the rows of ``E``."""
    if E.shape[0] == 0:
        return np.zeros(0, dtype=int)
    _, R, piv = sla.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] > 0 else 0
    return np.sort(piv[:rank])


def _nonnegative_multipliers(A, G_act, g):
    """Least-squares ``A^T nu + G_act^T z = -g`` with ``z >= 0`` (``nu`` free)."""
    M = G_act.T
    if A.shape[0]:
        Q = sla.orth(A.T)
        PM, pg = M - Q @ (Q.T @ M), g - Q @ (Q.T @ g)
    else:
        PM, pg = M, g
    z = nnls(PM, -pg, maxiter=50 * max(M.shape[1], 1))[0]
    nu = sla.lstsq(A.T, -g - M @ z)[0] if A.shape[0] else np.zeros(0)
    return z, np.concatenate([nu, z])


def _newton_on(prog: ConvexProgram, w0: np.ndarray, active: np.ndarray, max_newton: int):
    """Equality-constrained Newton on ``A w = b`` and the active rows of ``G w = h``."""
    E = np.vstack([_dense(prog.A), _dense(prog.G[active])])
    e = np.concatenate([prog.b, prog.h[active]])
    rows = _independent_rows(E)
    Er, er = E[rows], e[rows]
    n, kr = w0.size, Er.shape[0]
    w = w0.copy()
    last = np.inf
    # the interior point is already close; a long step means a wrong active set
    radius = 1e-3 * (1.0 + np.max(np.abs(w0), initial=0.0))
    with np.errstate(all="ignore"):
        for _ in range(max_newton):
            g = prog.grad(w)
            Hw = prog.hess(w)
            K = np.zeros((n + kr, n + kr))
            K[:n, :n] = Hw + 1e-12 * (1.0 + np.max(np.abs(np.diag(Hw)), initial=0.0)) * np.eye(n)
            K[:n, n:] = Er.T
            K[n:, :n] = Er
            if not np.all(np.isfinite(K)) or not np.all(np.isfinite(g)):
                return None
            step = _solve_kkt(K, np.concatenate([-g, er - Er @ w]))[:n]
            if not np.all(np.isfinite(step)) or np.max(np.abs(w + step - w0), initial=0.0) > radius:
                return None
            w = w + step
            size = np.max(np.abs(step), initial=0.0)
            if size <= 1e-14 * (1.0 + np.max(np.abs(w))) or size >= 0.5 * last:
                break  # converged, or at the rounding floor
            last = size
    return w, E, rows


def _multipliers(prog: ConvexProgram, w, active, E, rows, sign_tol):
    g = prog.grad(w)
    n_eq = prog.A.shape[0]
    lam = np.zeros(E.shape[0])
    if rows.size:
        lam[rows] = sla.lstsq(E[rows].T, -g, lapack_driver="gelsd")[0]
    scale = 1.0 + np.max(np.abs(lam), initial=0.0)
    if np.any(lam[n_eq:] < -sign_tol * scale):
        # dependent rows admit other multiplier vectors; look for a sign-feasible one
        z_nn, lam_nn = _nonnegative_multipliers(_dense(prog.A), _dense(prog.G[active]), g)
        rd = g + E.T @ lam_nn
        if np.max(np.abs(rd), initial=0.0) <= 1e-12 * (1.0 + np.max(np.abs(g), initial=0.0)):
            lam = lam_nn
    z = np.zeros(prog.G.shape[0])
    z[active] = lam[n_eq:]
    return lam[:n_eq], z


def polish(prog: ConvexProgram, result: IpmResult, *, max_newton: int = 20, max_rounds: int = 12,
           sign_tol: float = 1e-9) -> IpmResult:
    """Refine on an active set; keep the refined point only if it is a valid KKT point.

    Starting from two guesses of the active set, constraints found violated
    are added and the most negative multiplier is dropped until the signs
    are consistent.
    """
    G, h = prog.G, prog.h
    s = h - G @ result.w
    mu = float(np.mean(s * result.ineq_mult)) if s.size else 0.0
    # loose guess first: degenerate pairs (slack and multiplier both ~ sqrt(mu))
    # are treated as active, which yields exact zeros where the optimum allows them
    for guess in (s < 100.0 * np.sqrt(mu), result.active):
        active = guess.copy()
        for _ in range(max_rounds):
            out = _newton_on(prog, result.w, active, max_newton)
            if out is None:
                break
            w, E, rows = out
            nu, z = _multipliers(prog, w, active, E, rows, sign_tol)
            slack = h - G @ w
            violated = ~active & (slack < -sign_tol)
            zscale = 1.0 + np.max(np.abs(z), initial=0.0)
            negative = active & (z < -sign_tol * zscale)
            if violated.any():
                active = active | violated
                continue
            if negative.any():
                active[np.argmin(np.where(active, z, np.inf))] = False
                continue
            z = np.maximum(z, 0.0)
            res = kkt_residual(prog, w, nu, z)
            if res <= max(result.residual, 1e-12):
                return IpmResult(w, nu, z, result.iterations, res, active, True, result.history)
            break
    return result
