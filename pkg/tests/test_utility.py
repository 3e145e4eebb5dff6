import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowprice import exponential_utility

U = exponential_utility()


def test_closed_forms():
    assert U.v(1.0) == -1.0
    assert U.u(0.0) == pytest.approx(U.v(1.0) + 0.0 * 1.0)
    assert U.v(0.0) == 0.0 == U.u_at_infinity
    for x in (-2.0, 0.0, 3.0):
        assert U.u_prime_inv(U.u_prime(x)) == pytest.approx(x, abs=1e-14)


def test_sampled_checks():
    assert all(U.check().values())


@given(st.floats(-20, 20), st.floats(1e-6, 1e6))
def test_fenchel(x, y):
    u, v = float(U.u(x)), float(U.v(y))
    assert u <= v + x * y + 1e-12 * (1 + abs(v) + abs(x * y))
    y0 = float(U.u_prime(x))
    assert float(U.v(y0)) + x * y0 == pytest.approx(u, rel=1e-12, abs=1e-300)


@given(st.floats(1e-4, 1e4))
def test_conjugate_derivatives(y):
    h = 1e-6 * y
    fd = (U.v(y + h) - U.v(y - h)) / (2 * h)
    assert fd == pytest.approx(float(U.v_prime(y)), abs=1e-6 * (1 + abs(np.log(y))))
    assert float(U.v_second(y)) == pytest.approx(1.0 / y)
