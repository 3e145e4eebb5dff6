"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import math
import numbers

import numpy as np

from .exceptions import ParameterError


def check_scalar(value, name, *, kind=numbers.Real, low=None, high=None,
                 include_low=True, include_high=True):
    """Validate a scalar parameter and return it as a Python number."""
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ParameterError(name, f"expected {kind.__name__}, got {type(value).__name__}")
    if isinstance(value, numbers.Real) and math.isnan(float(value)):
        raise ParameterError(name, "must not be NaN")
    if low is not None:
        bad = value < low if include_low else value <= low
        if bad:
            op = ">=" if include_low else ">"
            raise ParameterError(name, f"must be {op} {low}, got {value}")
    if high is not None:
        bad = value > high if include_high else value >= high
        if bad:
            op = "<=" if include_high else "<"
            raise ParameterError(name, f"must be {op} {high}, got {value}")
    return value


def check_lambda(lam, name="lambda"):
    return float(check_scalar(lam, name, low=0.0, high=1.0, include_high=False))


def check_positive_array(values, name):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(name, "contains non-finite entries")
    if np.any(arr <= 0):
        raise ParameterError(name, "all entries must be strictly positive")
    return arr


def check_nonnegative_array(values, name):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParameterError(name, "contains non-finite entries")
    if np.any(arr < 0):
        raise ParameterError(name, "entries must be non-negative")
    return arr


def check_seed(seed, name="seed"):
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (numbers.Integral, np.integer)):
        raise ParameterError(name, "seed must be an integer")
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ParameterError(name, "seed must fit in an unsigned 64-bit integer")
    return seed
