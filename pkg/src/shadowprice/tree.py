"""Finite scenario trees: the discrete carrier of prices, filtration and P.

Nodes are stored in topological order (every parent id is smaller than its
children's ids), which lets most computations run as single forward or
backward sweeps over plain arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ._validation import check_scalar
from .exceptions import ParameterError, ResourceError
from .fbm import FbmSpec, conditional_coefficients, covariance

MAX_QUANTIZATION_DEPTH = 14
PROB_TOL = 1e-12


@dataclass(eq=False)
class ScenarioTree:
    """Rooted tree of price nodes.

    Parameters
    ----------
    parent : array of int, shape (n_nodes,)
        Parent id of each node, ``-1`` for the root (node 0).
    t : array of int
        Time index of each node; children sit one step after their parent.
    p : array of float
        Branch probability from the parent (1 at the root).
    S : array of float
        Strictly positive price (ask) at each node.
    dt : float
        Length of one time step, used only by per-unit-time diagnostics.
    """

    parent: np.ndarray
    t: np.ndarray
    p: np.ndarray
    S: np.ndarray
    dt: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=np.int64)
        self.t = np.asarray(self.t, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        self.validate()

    def validate(self):
        n = len(self.parent)
        if n == 0:
            raise ParameterError("tree", "empty tree")
        if not (len(self.t) == len(self.p) == len(self.S) == n):
            raise ParameterError("tree", "field arrays differ in length")
        if self.parent[0] != -1 or np.any(self.parent[1:] < 0):
            raise ParameterError("parent", "node 0 must be the single root")
        if np.any(self.parent[1:] >= np.arange(1, n)):
            raise ParameterError("parent", "nodes must be ordered parent before child")
        if self.t[0] != 0 or np.any(self.t[1:] != self.t[self.parent[1:]] + 1):
            raise ParameterError("t", "children must sit one time step after their parent")
        if not np.all(np.isfinite(self.S)) or np.any(self.S <= 0):
            raise ParameterError("S", "prices must be finite and strictly positive")
        if abs(self.p[0] - 1.0) > PROB_TOL or np.any(self.p[1:] <= 0) or np.any(self.p > 1 + PROB_TOL):
            raise ParameterError("p", "branch probabilities must lie in (0, 1], root weight 1")
        sums = np.zeros(n)
        np.add.at(sums, self.parent[1:], self.p[1:])
        inner = self.is_leaf == 0
        if np.any(np.abs(sums[inner] - 1.0) > PROB_TOL):
            bad = np.nonzero(inner & (np.abs(sums - 1.0) > PROB_TOL))[0]
            raise ParameterError("p", f"children probabilities do not sum to 1 at nodes {bad[:10].tolist()}")
        depths = self.t[self.is_leaf.astype(bool)]
        if depths.min() != depths.max():
            raise ParameterError("tree", "all leaves must sit at the same depth")

    # -- structure -----------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def depth(self) -> int:
        return int(self.t.max())

    @cached_property
    def is_leaf(self) -> np.ndarray:
        has_child = np.zeros(self.n_nodes, dtype=np.int8)
        has_child[self.parent[1:]] = 1
        return (1 - has_child).astype(np.int8)

    @cached_property
    def leaves(self) -> np.ndarray:
        return np.nonzero(self.is_leaf)[0]

    @cached_property
    def inner(self) -> np.ndarray:
        return np.nonzero(self.is_leaf == 0)[0]

    @cached_property
    def children(self) -> list[np.ndarray]:
        kids = [[] for _ in range(self.n_nodes)]
        for c in range(1, self.n_nodes):
            kids[self.parent[c]].append(c)
        return [np.array(k, dtype=np.int64) for k in kids]

    @cached_property
    def node_prob(self) -> np.ndarray:
        """Unconditional probability ``P(node)``."""
        q = self.p.copy()
        for n in range(1, self.n_nodes):
            q[n] = q[self.parent[n]] * self.p[n]
        return q

    @cached_property
    def leaf_prob(self) -> np.ndarray:
        return self.node_prob[self.leaves]

    def path(self, node: int) -> list[int]:
        """Node ids from the root down to ``node`` (inclusive)."""
        out = [int(node)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        return out[::-1]

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Sparse ``(n_leaves, n_nodes)`` 0/1 matrix: node lies on the leaf's path."""
        rows, cols = [], []
        for i, leaf in enumerate(self.leaves):
            pth = self.path(leaf)
            rows.extend([i] * len(pth))
            cols.extend(pth)
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(len(self.leaves), self.n_nodes))

    @cached_property
    def leaf_index(self) -> np.ndarray:
        """Position of each leaf in ``leaves`` (``-1`` for inner nodes)."""
        idx = -np.ones(self.n_nodes, dtype=np.int64)
        idx[self.leaves] = np.arange(len(self.leaves))
        return idx

    def subtree_sum(self, leaf_values: np.ndarray) -> np.ndarray:
        """Sum of leaf values below every node (leaves map to themselves)."""
        return self.incidence.T @ np.asarray(leaf_values, dtype=float)

    def conditional_expectation(self, leaf_values: np.ndarray) -> np.ndarray:
        """``E_P[X_T | node]`` for a terminal variable given on the leaves."""
        mass = self.subtree_sum(self.leaf_prob * np.asarray(leaf_values, dtype=float))
        return mass / self.node_prob

    def cumulative(self, increments: np.ndarray) -> np.ndarray:
        """Running sum of per-node increments along root-to-node paths."""
        out = np.array(increments, dtype=float, copy=True)
        for n in range(1, self.n_nodes):
            out[n] += out[self.parent[n]]
        return out

    def with_prices(self, prices) -> "ScenarioTree":
        return ScenarioTree(self.parent.copy(), self.t.copy(), self.p.copy(),
                            np.asarray(prices, dtype=float), self.dt, dict(self.meta))

    # -- io ------------------------------------------------------------------

    def to_records(self) -> list[dict]:
        return [{"id": int(i), "parent": None if self.parent[i] < 0 else int(self.parent[i]),
                 "p": float(self.p[i]), "t": int(self.t[i]), "S": float(self.S[i])}
                for i in range(self.n_nodes)]

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_records(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_records(cls, records, dt: float = 1.0) -> "ScenarioTree":
        allowed = {"id", "parent", "p", "t", "S"}
        if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
            raise ParameterError("tree", "expected a list of node records")
        recs = sorted(records, key=lambda r: r["id"])
        for r in recs:
            if set(r) != allowed:
                raise ParameterError("tree", f"node record fields must be exactly {sorted(allowed)}")
        ids = [r["id"] for r in recs]
        if ids != list(range(len(ids))):
            raise ParameterError("id", "node ids must be 0..n-1")
        parent = [-1 if r["parent"] is None else r["parent"] for r in recs]
        return cls(parent, [r["t"] for r in recs], [r["p"] for r in recs],
                   [r["S"] for r in recs], dt)

    @classmethod
    def from_json(cls, path_or_text, dt: float = 1.0) -> "ScenarioTree":
        text = str(path_or_text)
        if not text.lstrip().startswith(("[", "{")):
            with open(path_or_text) as fh:
                text = fh.read()
        return cls.from_records(json.loads(text), dt)

    # -- small constructors ----------------------------------------------------

    @classmethod
    def from_nested(cls, spec, dt: float = 1.0) -> "ScenarioTree":
        """Build from ``(S, [(p, child_spec), ...])`` nesting; leaves are ``(S, [])`` or ``S``."""
        parent, t, p, S = [], [], [], []
        frontier = [(-1, 1.0, spec, 0)]
        while frontier:
            nxt = []
            for par, prob, node, depth in frontier:
                price, kids = (node, []) if np.isscalar(node) else node
                nid = len(parent)
                parent.append(par)
                t.append(depth)
                p.append(prob)
                S.append(price)
                nxt.extend((nid, cp, child, depth + 1) for cp, child in kids)
            frontier = nxt
        return cls(parent, t, p, S, dt)

    @classmethod
    def constant(cls, price: float, depth: int, branching: int = 2) -> "ScenarioTree":
        parent, t = [-1], [0]
        level = [0]
        for d in range(1, depth + 1):
            nxt = []
            for node in level:
                for _ in range(branching):
                    parent.append(node)
                    t.append(d)
                    nxt.append(len(parent) - 1)
            level = nxt
        n = len(parent)
        p = np.full(n, 1.0 / branching)
        p[0] = 1.0
        return cls(parent, t, p, np.full(n, float(price)))

    @classmethod
    def chain(cls, prices) -> "ScenarioTree":
        """A deterministic single path, i.e. a time grid."""
        prices = np.asarray(prices, dtype=float)
        n = len(prices)
        return cls(np.arange(n) - 1, np.arange(n), np.ones(n), prices)


def binomial_tree(s0: float, up: float, down: float, depth: int, prob_up: float = 0.5) -> ScenarioTree:
    """Non-recombining multiplicative binomial tree."""
    parent, t, p, S = [-1], [0], [1.0], [float(s0)]
    level = [0]
    for d in range(1, depth + 1):
        nxt = []
        for node in level:
            for factor, q in ((up, prob_up), (down, 1.0 - prob_up)):
                parent.append(node)
                t.append(d)
                p.append(q)
                S.append(S[node] * factor)
                nxt.append(len(parent) - 1)
        level = nxt
    return ScenarioTree(parent, t, p, S)


def fbm_quantization_tree(spec: FbmSpec, depth: int) -> ScenarioTree:
    """Binary non-recombining quantization of geometric fBm.

    Each node's two children carry the conditional mean plus/minus the
    conditional standard deviation of the next fBm increment given the
    node's realized history, with probability 1/2 each. Prices are
    ``exp(sigma B + mu t)``; the root has ``B = 0`` and ``S = 1``.
    """
    check_scalar(depth, "depth", kind=int, low=1)
    if depth > MAX_QUANTIZATION_DEPTH:
        raise ResourceError(f"depth {depth} exceeds the guard {MAX_QUANTIZATION_DEPTH}: "
                            f"the tree would hold {2 ** (depth + 1) - 1} nodes")
    grid_spec = FbmSpec(hurst=spec.hurst, horizon=spec.horizon, n_steps=depth,
                        mu=spec.mu, sigma=spec.sigma)
    grid = covariance(grid_spec)
    coefs, stds = conditional_coefficients(grid)
    dt = spec.horizon / depth

    n_nodes = 2 ** (depth + 1) - 1
    parent = np.empty(n_nodes, dtype=np.int64)
    t = np.empty(n_nodes, dtype=np.int64)
    B = np.zeros(n_nodes)
    hist = np.zeros((n_nodes, depth))  # realized B at t_1..t_k
    parent[0], t[0] = -1, 0
    start = 0
    for k in range(depth):
        level = np.arange(start, start + 2 ** k)
        mean = hist[level, :k] @ coefs[k] if k else np.zeros(1)
        step = mean - B[level]
        first = start + 2 ** k
        for sign, offset in ((1.0, 0), (-1.0, 1)):
            kids = first + 2 * (level - start) + offset
            parent[kids] = level
            t[kids] = k + 1
            B[kids] = B[level] + step + sign * stds[k]
            hist[kids] = hist[level]
            hist[kids, k] = B[kids]
        start = first
    p = np.full(n_nodes, 0.5)
    p[0] = 1.0
    S = np.exp(spec.sigma * B + spec.mu * dt * t)
    meta = {"kind": "fbm", "hurst": spec.hurst, "sigma": spec.sigma, "mu": spec.mu,
            "horizon": spec.horizon, "B": B}
    return ScenarioTree(parent, t, p, S, dt, meta)


def divergence_rise_prob(level: int) -> float:
    """Conditional probability of rising from ``level`` to ``level + 1``.

    Chosen so that, given the head outcome, reaching level ``n`` has
    probability ``exp(4 - n^2)``.
    """
    return math.exp(-(2 * level + 1))


def example_divergence_tree(n_levels: int, tail_prob: float = 0.5) -> ScenarioTree:
    """Finite analogue of the divergent-maximizer example.

    At time 1 a coin decides between a tail branch where the price stays at
    2 and a head branch: a ladder that from level ``l`` (starting at 2)
    either drops to 1 and freezes there or rises to ``l + 1``. The top level
    ``n_levels + 1`` is frozen too. Given head, reaching level ``n`` has
    probability ``exp(4 - n^2)``; frozen branches are padded with single
    children so all leaves sit at depth ``n_levels``.
    """
    check_scalar(n_levels, "n_levels", kind=int, low=2)
    check_scalar(tail_prob, "tail_prob", low=0.0, high=1.0, include_low=False, include_high=False)
    parent, t, p, S = [-1, 0, 0], [0, 1, 1], [1.0, tail_prob, 1.0 - tail_prob], [2.0, 2.0, 2.0]
    head = 2
    frozen = [1]
    ladder = head
    for level in range(2, n_levels + 1):
        q = divergence_rise_prob(level)
        if not 0.0 < q < 1.0:
            raise ParameterError("n_levels", "rise probability normalization failed")
        d = t[ladder] + 1
        # pad frozen branches by one step first so ids stay topological
        new_frozen = []
        for node in frozen:
            parent.append(node)
            t.append(d)
            p.append(1.0)
            S.append(S[node])
            new_frozen.append(len(parent) - 1)
        parent.extend([ladder, ladder])
        t.extend([d, d])
        p.extend([q, 1.0 - q])
        S.extend([float(level + 1), 1.0])
        up, down = len(parent) - 2, len(parent) - 1
        frozen = new_frozen + [down]
        ladder = up
    tree = ScenarioTree(parent, t, p, S)
    c = (1.0 - tail_prob) * math.exp(4.0)
    on_head = np.zeros(tree.n_nodes, dtype=bool)
    for n in range(1, tree.n_nodes):
        on_head[n] = n == head or on_head[tree.parent[n]]
    tree.meta.update({"kind": "divergence", "n_levels": n_levels, "tail_prob": tail_prob,
                      "head": head, "head_nodes": on_head, "tail_constant": c})
    return tree


def enumerate_paths(tree: ScenarioTree) -> list[tuple[int, list[int], float]]:
    """All root-to-leaf paths as ``(leaf id, node ids, path probability)``."""
    return [(int(leaf), tree.path(leaf), float(tree.node_prob[leaf])) for leaf in tree.leaves]
