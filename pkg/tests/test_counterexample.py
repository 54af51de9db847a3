from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowfast.analysis import sign_change_scan
from slowfast.core import State, eval_slow_time, fd_jacobian
from slowfast.errors import InvalidParameterError
from slowfast.models.counterexample import (
    CounterexampleParams,
    alpha1,
    beta,
    counterexample_jacobian_origin,
    counterexample_system,
    reduced_scalar_equation,
)


def test_defaults():
    cp = CounterexampleParams()
    assert cp.eps == 2.0 and cp.b1 == 3.0
    assert beta(cp.a) == pytest.approx(cp.N_b + 1, abs=1e-12)
    assert cp.a == pytest.approx(2.72189, abs=1e-5)


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        CounterexampleParams(eps=0.0)
    with pytest.raises(InvalidParameterError):
        CounterexampleParams(b1=1.5)  # needs b1 > M1/d1 = 2
    with pytest.raises(InvalidParameterError):
        CounterexampleParams(a=1.0)  # beta(1) < N_b


def test_origin_is_equilibrium_and_manifold_exact():
    sys, _ = counterexample_system(CounterexampleParams())
    np.testing.assert_array_equal(eval_slow_time(sys, State([0.0], [0.0]), 2.0).flat, [0.0, 0.0])
    for x in np.linspace(-2.7, 2.7, 11):
        y = sys.m0(np.array([x]))
        assert y[0] == pytest.approx(-2 * np.tanh(x))
        assert sys.g0(np.array([x]), y, 0.0)[0] == 0.0


@pytest.mark.parametrize("eps", [0.1, 0.5, 2.0])
def test_origin_jacobian_matches_finite_differences(eps):
    sys, _ = counterexample_system(CounterexampleParams(eps=eps))
    J, (tr, det) = counterexample_jacobian_origin(eps)
    np.testing.assert_allclose(J, [[1, 1], [-2 / eps, -1 / eps]])
    J_fd = fd_jacobian(sys.slow_time_field(eps).rhs, np.zeros(2))
    np.testing.assert_allclose(J_fd, J, atol=1e-6)
    assert tr == pytest.approx(1 - 1 / eps) and det == pytest.approx(1 / eps)


def test_trace_signs():
    assert counterexample_jacobian_origin(2.0)[1] == pytest.approx((0.5, 0.5))
    assert counterexample_jacobian_origin(0.1)[1] == pytest.approx((-9.0, 10.0))
    assert counterexample_jacobian_origin(1.0)[1][0] == 0.0
    with pytest.raises(ValueError):
        counterexample_jacobian_origin(0.0)


def test_single_sign_change():
    roots = sign_change_scan(reduced_scalar_equation, -5, 5, 10_000)
    assert len(roots) == 1 and abs(roots[0]) < 1e-3


@given(st.floats(-3.0, 3.0))
def test_box_faces_point_inward(y1):
    cp = CounterexampleParams()
    sys, _ = counterexample_system(cp)
    fx = lambda x: sys.f0(np.array([x]), np.array([y1]), cp.eps)[0]
    assert fx(cp.a) < 0 and fx(-cp.a) > 0


@given(st.floats(-2.72, 2.72))
def test_fast_faces_point_inward(x):
    cp = CounterexampleParams()
    sys, _ = counterexample_system(cp)
    gy = lambda y: sys.g0(np.array([x]), np.array([y]), cp.eps)[0]
    assert gy(cp.b1) < 0 and gy(-cp.b1) > 0
    assert abs(alpha1(x)) < 2
