"""Utility functions on the real line and their convex conjugates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class UtilitySpec:
    """A utility ``u`` together with its conjugate ``v(y) = sup_x u(x) - xy``.

    ``u_second`` and ``v_second`` are the second derivatives used by the
    Newton-type solvers. ``v`` is extended to ``y = 0`` by its limit
    ``u_at_infinity``.
    """

    name: str
    u: Callable
    u_prime: Callable
    u_prime_inv: Callable
    u_second: Callable
    v: Callable
    v_prime: Callable
    v_second: Callable
    u_at_infinity: float

    def check(self, xs=None, ys=None, rtol: float = 1e-9) -> dict:
        """Finite-difference sanity checks on sampled grids."""
        xs = np.linspace(-5.0, 5.0, 201) if xs is None else np.asarray(xs, dtype=float)
        ys = np.geomspace(1e-3, 1e3, 61) if ys is None else np.asarray(ys, dtype=float)
        uval = self.u(xs)
        d1 = np.diff(uval)
        d2 = np.diff(uval, 2)
        gap = self.v(ys)[None, :] + xs[:, None] * ys[None, :] - uval[:, None]
        y_at = self.u_prime(xs)
        tight = self.v(y_at) + xs * y_at - uval
        scale = 1.0 + np.abs(uval)
        return {
            "increasing": bool(np.all(d1 > 0)),
            "concave": bool(np.all(d2 <= rtol * scale[1:-1])),
            "inada_minus": bool(self.u_prime(np.array([-50.0]))[0] > 1e15),
            "inada_plus": bool(self.u_prime(np.array([50.0]))[0] < 1e-15),
            "fenchel": bool(np.all(gap >= -rtol * (1.0 + np.abs(gap)))),
            "fenchel_tight": bool(np.all(np.abs(tight) <= rtol * scale)),
        }


def _v_exp(y):
    y = np.asarray(y, dtype=float)
    safe = np.where(y > 0, y, 1.0)
    return np.where(y > 0, safe * np.log(safe) - safe, 0.0)


def exponential_utility() -> UtilitySpec:
    """``u(x) = -exp(-x)`` with conjugate ``v(y) = y log y - y``."""
    return UtilitySpec(
        name="exponential",
        u=lambda x: -np.exp(-np.asarray(x, dtype=float)),
        u_prime=lambda x: np.exp(-np.asarray(x, dtype=float)),
        u_prime_inv=lambda y: -np.log(np.asarray(y, dtype=float)),
        u_second=lambda x: -np.exp(-np.asarray(x, dtype=float)),
        v=_v_exp,
        v_prime=lambda y: np.log(np.asarray(y, dtype=float)),
        v_second=lambda y: 1.0 / np.asarray(y, dtype=float),
        u_at_infinity=0.0,
    )
