"""Fractional Brownian motion: covariance, two samplers, Gaussian conditioning.

Two independent routes to the law of ``(B_{t_1}, ..., B_{t_n})``:

* :func:`covariance` + :func:`sample_cholesky` use the closed-form covariance
  ``R(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2``.
* :func:`sample_mvn` discretizes the Mandelbrot-van Ness moving-average
  integral on a truncated history window and never touches ``R``.

Agreement of the two in law is the main validity check for both.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack
from scipy.special import gammaln

from ._validation import check_scalar, check_seed
from .exceptions import ConditioningError, FactorizationError, ParameterError

GENERATORS = {"pcg64": np.random.PCG64, "philox": np.random.Philox}
DEFAULT_GENERATOR = "pcg64"
BLOCK_SIZE = 8192
JITTER_MAX = 1e-10

# history window default, in multiples of the horizon
DEFAULT_TRUNCATION_FACTOR = 1.0e8
DEFAULT_SUBSTEPS = 20
HISTORY_GROWTH = 1.1


@dataclass(frozen=True)
class FbmSpec:
    """Parameters of fBm and of the geometric model ``S_t = exp(sigma B_t + mu t)``."""

    hurst: float
    horizon: float = 1.0
    n_steps: int = 16
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        check_scalar(self.hurst, "hurst", low=0.0, high=1.0, include_low=False, include_high=False)
        check_scalar(self.horizon, "horizon", low=0.0, include_low=False)
        check_scalar(self.n_steps, "n_steps", kind=int, low=1)
        check_scalar(self.mu, "mu")
        check_scalar(self.sigma, "sigma", low=0.0, include_low=False)

    @property
    def times(self) -> np.ndarray:
        return self.horizon * np.arange(1, self.n_steps + 1) / self.n_steps


@dataclass(frozen=True)
class GaussianGrid:
    """Time grid with covariance matrix and its lower Cholesky factor."""

    times: np.ndarray
    cov: np.ndarray
    factor: np.ndarray
    jitter: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times)


@dataclass
class PathSet:
    """``n_paths x n_steps`` samples at ``times`` (time 0, where B = 0, excluded)."""

    values: np.ndarray
    spec: FbmSpec
    seed: int
    generator: str = DEFAULT_GENERATOR
    method: str = "cholesky"
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.times is None:
            self.times = self.spec.times

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def prices(self) -> np.ndarray:
        """Geometric fBm prices, including the initial column ``S_0 = 1``."""
        b = np.hstack([np.zeros((self.n_paths, 1)), self.values])
        t = np.concatenate([[0.0], self.times])
        return np.exp(self.spec.sigma * b + self.spec.mu * t)

    def to_csv(self, path=None) -> str:
        """Write ``path_id,t,value`` rows ordered by path, then time."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path_id", "t", "value"])
        for i, row in enumerate(self.values):
            for t, v in zip(self.times, row):
                writer.writerow([i, repr(float(t)), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def fbm_covariance(s, t, hurst: float) -> np.ndarray:
    """``R(s, t)`` evaluated elementwise with broadcasting."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if hurst == 0.5:
        # exact min(s, t); the general formula rounds
        return np.where(s * t > 0, np.minimum(np.abs(s), np.abs(t)), 0.0)
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(t - s) ** two_h)


def _cholesky(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor with escalating diagonal jitter up to ``JITTER_MAX``."""
    scale = float(np.max(np.diag(cov))) if cov.size else 1.0
    info = 0
    for jitter in (0.0, 1e-16, 1e-14, 1e-12, JITTER_MAX):
        work = cov + jitter * scale * np.eye(len(cov))
        factor, info = lapack.dpotrf(work, lower=1, clean=1)
        if info == 0:
            return np.tril(factor), jitter * scale
    raise FactorizationError(int(info) - 1, "matrix numerically indefinite even with jitter "
                             f"{JITTER_MAX:g} x max diagonal")


def covariance(spec: FbmSpec) -> GaussianGrid:
    """Covariance of fBm on the grid ``t_k = k * horizon / n_steps``."""
    t = spec.times
    cov = fbm_covariance(t[:, None], t[None, :], spec.hurst)
    factor, jitter = _cholesky(cov)
    return GaussianGrid(times=t, cov=cov, factor=factor, jitter=jitter)


def _rng(seed: int, block: int, generator: str) -> np.random.Generator:
    try:
        bitgen = GENERATORS[generator]
    except KeyError:
        raise ParameterError("generator", f"unknown generator {generator!r}; "
                             f"choose from {sorted(GENERATORS)}") from None
    return np.random.Generator(bitgen(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocked_normals(n_paths, width, seed, generator, transform, jobs=1):
    """Apply ``transform`` to standard-normal blocks seeded by ``(seed, block index)``.

    The block layout is independent of ``jobs``, so results are too.
    """
    n_blocks = -(-n_paths // BLOCK_SIZE)

    def run(b):
        rows = min(BLOCK_SIZE, n_paths - b * BLOCK_SIZE)
        z = _rng(seed, b, generator).standard_normal((rows, width))
        return transform(z)

    if jobs > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    return parts


def sample_cholesky(grid: GaussianGrid, n_paths: int, seed: int, *, spec: FbmSpec | None = None,
                    generator: str = DEFAULT_GENERATOR, jobs: int = 1) -> PathSet:
    """Exact-in-law sampler: each path is ``factor @ xi`` with ``xi`` iid N(0, 1)."""
    check_scalar(n_paths, "n_paths", kind=int, low=0)
    seed = check_seed(seed)
    if spec is None:
        horizon = float(grid.times[-1])
        hurst = _infer_hurst(grid)
        spec = FbmSpec(hurst=hurst, horizon=horizon, n_steps=grid.n_steps)
    n = grid.n_steps
    if n_paths == 0:
        return PathSet(np.empty((0, n)), spec, seed, generator, "cholesky", grid.times)
    parts = _blocked_normals(n_paths, n, seed, generator, lambda z: z @ grid.factor.T, jobs)
    return PathSet(np.vstack(parts), spec, seed, generator, "cholesky", grid.times)


def _infer_hurst(grid: GaussianGrid) -> float:
    t, v = grid.times[-1], grid.cov[-1, -1]
    return float(np.log(v) / (2 * np.log(t))) if t != 1.0 else 0.5


# -- Mandelbrot-van Ness -----------------------------------------------------

def mvn_constant(hurst: float) -> float:
    """``C(H)`` normalizing the moving-average integral to ``Var(B_1) = 1``."""
    log_inv_sq = 2 * gammaln(hurst + 0.5) - gammaln(2 * hurst + 1) - math.log(math.sin(math.pi * hurst))
    return math.exp(-0.5 * log_inv_sq)


def _kernel(right: np.ndarray, dist: np.ndarray, t: np.ndarray, hurst: float) -> np.ndarray:
    """Unnormalized kernel ``(t-s)_+^{H-1/2} - (-s)_+^{H-1/2}`` at ``s = right - dist``.

    Taking the point as an offset from a cell edge keeps ``t - s`` exact
    next to the singularities; result has shape ``dist.shape + t.shape``.
    """
    a = hurst - 0.5
    right = right[..., None]
    dist = dist[..., None]
    ahead = (t - right) + dist
    behind = dist - right
    fwd = np.where(ahead > 0, ahead, 1.0) ** a * (ahead > 0)
    back = np.where(behind > 0, behind, 1.0) ** a * (behind > 0)
    return fwd - back


def _mvn_mesh(spec: FbmSpec, truncation: float, n_substeps: int) -> np.ndarray:
    """Cell edges: uniform on [0, T] aligned to the output grid, geometric on [-L, 0)."""
    per_step = max(1, math.ceil(n_substeps * spec.horizon / spec.n_steps))
    h = spec.horizon / (spec.n_steps * per_step)
    n_cells = spec.n_steps * per_step
    # same rounding as FbmSpec.times at the aligned edges
    fwd = spec.horizon * (np.arange(n_cells + 1) / n_cells)
    back = [0.0]
    width = h
    while back[-1] > -truncation:
        back.append(max(back[-1] - width, -truncation))
        width *= HISTORY_GROWTH
    return np.concatenate([np.array(back[::-1]), fwd[1:]])


def _gauss_legendre(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def mvn_weights(spec: FbmSpec, truncation: float, n_substeps: int):
    """Per-cell Riemann weights and the within-cell residual covariance.

    Returns ``(A, residual)``: ``A[c, i]`` is the cell-average kernel for
    output time ``t_i`` times ``sqrt(width_c)``, and ``residual`` is
    ``sum_c (int_c K K^T ds - A_c A_c^T)``, the part of each cell's
    contribution orthogonal to its Brownian increment. Both are computed by
    quadrature of the kernel and scaled by ``C(H)``.
    """
    edges = _mvn_mesh(spec, truncation, n_substeps)
    left, right = edges[:-1], edges[1:]
    width = right - left
    t = spec.times
    hurst = spec.hurst

    # cells whose right edge is 0 or an output time carry an endpoint singularity
    singular = np.isclose(right[:, None], np.concatenate([[0.0], t])[None, :],
                          rtol=0, atol=1e-12 * spec.horizon).any(axis=1)
    u_reg, w_reg = _gauss_legendre(8)
    # clustering substitution r = width * v^(1/H) towards the right edge
    v_sing, wv = _gauss_legendre(48)
    k = 1.0 / hurst
    r_sing = v_sing ** k  # distance to the right edge, in cell widths
    w_sing = wv * k * v_sing ** (k - 1.0)

    n_cells = len(width)
    A = np.empty((n_cells, len(t)))
    residual = np.zeros((len(t), len(t)))
    for mask, r, w in ((~singular, 1.0 - u_reg, w_reg), (singular, r_sing, w_sing)):
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        dist = np.broadcast_to(width[idx, None] * r[None, :], (idx.size, r.size))
        edge = np.broadcast_to(right[idx, None], dist.shape)
        kv = _kernel(edge, dist, t, hurst)              # cells x q x n
        ww = w[None, :, None] * width[idx, None, None]  # quadrature weights in s
        integral = np.sum(ww * kv, axis=1)              # cells x n
        A[idx] = integral / np.sqrt(width[idx, None])
        second = np.einsum("cqi,cqj->ij", ww * kv, kv)
        residual += second - A[idx].T @ A[idx]
    c = mvn_constant(hurst)
    return c * A, c * c * 0.5 * (residual + residual.T)


def sample_mvn(spec: FbmSpec, truncation: float | None = None, n_substeps: int | None = None,
               n_paths: int = 1, seed: int = 0, *, generator: str = DEFAULT_GENERATOR,
               jobs: int = 1) -> PathSet:
    """Sample fBm from its Mandelbrot-van Ness integral on ``[-truncation, T]``.

    ``n_substeps`` is the minimum number of Brownian cells per unit time on
    ``[0, T]``; the history window uses geometrically growing cells.
    """
    if truncation is None:
        truncation = DEFAULT_TRUNCATION_FACTOR * spec.horizon
    if n_substeps is None:
        n_substeps = DEFAULT_SUBSTEPS
    check_scalar(truncation, "truncation", low=0.0, include_low=False)
    check_scalar(n_substeps, "n_substeps", kind=int, low=1)
    check_scalar(n_paths, "n_paths", kind=int, low=0)
    seed = check_seed(seed)

    A, residual = mvn_weights(spec, float(truncation), int(n_substeps))
    evals, evecs = np.linalg.eigh(residual)
    res_factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    n_cells = A.shape[0]
    weights = np.vstack([A, res_factor.T])  # (cells + n) x n

    if n_paths == 0:
        values = np.empty((0, spec.n_steps))
    else:
        parts = _blocked_normals(n_paths, n_cells + spec.n_steps, seed, generator,
                                 lambda z: z @ weights, jobs)
        values = np.vstack(parts)
    return PathSet(values, spec, seed, generator, "mvn", spec.times)


# -- conditioning ------------------------------------------------------------

def conditional_increment(grid: GaussianGrid, history) -> tuple[float, float]:
    """Mean and std of ``B_{t_{k+1}} - B_{t_k}`` given ``B_{t_1..t_k} = history``.

    An empty history conditions on ``B_0 = 0`` only.
    """
    h = np.asarray(history, dtype=float).ravel()
    k = h.size
    if k >= grid.n_steps:
        raise ParameterError("history", f"length {k} leaves no increment on a grid of "
                             f"{grid.n_steps} steps")
    if k == 0:
        return 0.0, math.sqrt(grid.cov[0, 0])
    cov = grid.cov
    block = cov[:k, :k]
    cross = cov[k, :k]
    try:
        chol = np.linalg.cholesky(block)
    except np.linalg.LinAlgError:
        raise ConditioningError(range(k), "history covariance not positive definite") from None
    if np.min(np.diag(chol)) <= 1e-12 * math.sqrt(np.max(np.diag(block))):
        raise ConditioningError(range(k), "history covariance numerically singular")
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, cross))
    mean_next = float(coef @ h)
    var = float(cov[k, k] - cross @ coef)
    var = max(var, 0.0)
    return mean_next - float(h[-1]), math.sqrt(var)


def conditional_coefficients(grid: GaussianGrid) -> tuple[list[np.ndarray], np.ndarray]:
    """Regression coefficients and conditional stds for every history length.

    ``coefs[k] @ history`` is the conditional mean of ``B_{t_{k+1}}`` given
    the first ``k`` values; used to quantize trees without re-factorizing at
    each node.
    """
    coefs, stds = [np.zeros(0)], [math.sqrt(grid.cov[0, 0])]
    for k in range(1, grid.n_steps):
        block, cross = grid.cov[:k, :k], grid.cov[k, :k]
        try:
            c = np.linalg.solve(block, cross)
        except np.linalg.LinAlgError:
            raise ConditioningError(range(k), "history covariance singular") from None
        coefs.append(c)
        stds.append(math.sqrt(max(grid.cov[k, k] - cross @ c, 0.0)))
    return coefs, np.array(stds)


def sample_covariance_check(paths: PathSet, target: np.ndarray, n_sigma: float = 3.0) -> dict:
    """Compare sample covariances with ``target`` entrywise in standard errors.

    The standard error of each entry is estimated from the per-path products
    ``x_i x_j`` (paths are centered at the known mean zero).
    """
    x = paths.values
    n = x.shape[0]
    prod = x[:, :, None] * x[:, None, :]
    est = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n)
    z = (est - target) / se
    return {"estimate": est, "stderr": se, "z": z,
            "max_abs_z": float(np.max(np.abs(z))), "passing": bool(np.all(np.abs(z) <= n_sigma))}
