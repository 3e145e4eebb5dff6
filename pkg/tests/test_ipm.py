import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from shadowprice import SolverError
from shadowprice._ipm import ConvexProgram, interior_point, kkt_residual


def _qp(Q, c, A, b, G, h):
    return ConvexProgram(lambda w: 0.5 * w @ Q @ w + c @ w, lambda w: Q @ w + c, lambda w: Q, A, b, G, h)


def test_box_qp_active_set_to_rounding():
    # min (w0 - 2)^2 + (w1 + 1)^2 on [0, 1]^2 -> (1, 0) with both bounds active
    Q = 2 * np.eye(2)
    c = np.array([-4.0, 2.0])
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.array([1.0, 1.0, 0.0, 0.0])
    res = interior_point(_qp(Q, c, np.zeros((0, 2)), np.zeros(0), G, h), np.full(2, 0.5))
    assert res.polished
    np.testing.assert_allclose(res.w, [1.0, 0.0], rtol=0, atol=1e-15)
    np.testing.assert_allclose(res.ineq_mult, [2.0, 0.0, 0.0, 2.0], atol=1e-12)


def test_equality_and_sparse_constraints():
    # min |w|^2 s.t. sum w = 1, w >= 0 -> uniform
    n = 5
    prog = _qp(2 * np.eye(n), np.zeros(n), sp.csr_matrix(np.ones((1, n))), np.ones(1),
               sp.csr_matrix(-np.eye(n)), np.zeros(n))
    res = interior_point(prog, np.full(n, 0.2))
    np.testing.assert_allclose(res.w, 0.2, rtol=1e-12)
    assert kkt_residual(prog, res.w, res.eq_mult, res.ineq_mult) <= 1e-10


def test_entropy_program():
    # min sum w log w over the simplex with a mean constraint: Gibbs weights
    x = np.array([0.0, 1.0, 2.0])
    A = np.vstack([np.ones(3), x])
    b = np.array([1.0, 1.4])
    prog = ConvexProgram(lambda w: float(np.sum(w * np.log(w))), lambda w: np.log(w) + 1,
                         lambda w: np.diag(1 / w), A, b, -np.eye(3), np.zeros(3))
    res = interior_point(prog, np.array([0.2, 0.2, 0.6]))
    lw = np.log(res.w)
    # Gibbs form: log w affine in x
    assert lw[2] - lw[1] == pytest.approx(lw[1] - lw[0], abs=1e-9)
    np.testing.assert_allclose(A @ res.w, b, atol=1e-12)


def test_infeasible_start_rejected():
    prog = _qp(np.eye(1), np.zeros(1), np.zeros((0, 1)), np.zeros(0), -np.eye(1), np.zeros(1))
    with pytest.raises(SolverError):
        interior_point(prog, np.array([-1.0]))


@given(st.integers(0, 10_000))
def test_random_box_qp_matches_reference(seed):
    rng = np.random.default_rng(seed)
    n = 4
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.1 * np.eye(n)
    c = rng.normal(size=n) * 3
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.ones(2 * n)
    prog = _qp(Q, c, np.zeros((0, n)), np.zeros(0), G, h)
    res = interior_point(prog, np.zeros(n))
    ref = minimize(lambda w: 0.5 * w @ Q @ w + c @ w, np.zeros(n), jac=lambda w: Q @ w + c,
                   bounds=[(-1, 1)] * n, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
    assert prog.value(res.w) <= ref.fun + 1e-9 * (1 + abs(ref.fun))
    assert np.all(G @ res.w <= h + 1e-12)
