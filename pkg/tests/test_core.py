from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowfast.core import (
    EpsPolytope,
    ParameterSet,
    SlowFastSystem,
    State,
    domain_contains,
    eval_fast_time,
    eval_slow_time,
    fd_jacobian,
    from_deviation,
    jacobian_fast,
    load_parameter_document,
    to_deviation,
)
from slowfast.errors import (
    DegenerateTimescaleError,
    DomainUndefinedError,
    InvalidParameterError,
    InvalidStateError,
    UnsupportedOperationError,
)
from slowfast.models.futile import futile_cycle_m0, futile_cycle_scaled, hurwitz_blocks


def test_state_rejects_bad_blocks():
    with pytest.raises(InvalidStateError):
        State([], [1.0])
    with pytest.raises(InvalidStateError):
        State([np.nan], [1.0])
    s = State([1, 2], [3])
    assert s.n == 2 and s.m == 1
    np.testing.assert_array_equal(State.from_flat(s.flat, 2).y, [3.0])


def test_parameter_set_validates_eagerly():
    ParameterSet({"k": 1.0}, {"k": (0.0, True)})
    with pytest.raises(InvalidParameterError):
        ParameterSet({"k": 0.0}, {"k": (0.0, True)})
    with pytest.raises(InvalidParameterError):
        ParameterSet({"k": -1.0}, {"k": (0.0, False)})
    ParameterSet({"k": 0.0}, {"k": (0.0, False)})


def test_slow_time_linear(linear_sys):
    np.testing.assert_allclose(eval_slow_time(linear_sys, State([1], [1]), 1.0).flat, [1, -1])
    np.testing.assert_allclose(eval_slow_time(linear_sys, State([1], [1]), 0.5).flat, [1, -2])
    with pytest.raises(DegenerateTimescaleError):
        eval_slow_time(linear_sys, State([1], [1]), 0.0)


def test_fast_time_linear(linear_sys):
    np.testing.assert_allclose(eval_fast_time(linear_sys, State([1], [1]), 1.0).flat, [1, -1])
    np.testing.assert_allclose(eval_fast_time(linear_sys, State([1], [1]), 0.5).flat, [0.5, -1])
    assert np.all(eval_fast_time(linear_sys, State([7], [3]), 0.0).x == 0)


def test_futile_slow_time_example(ones):
    sys, _ = futile_cycle_scaled(ones)
    d = eval_slow_time(sys, State([0, 0], [0, 0, 0, 0]), 0.1)
    np.testing.assert_allclose(d.x, [0, 0], atol=1e-15)
    np.testing.assert_allclose(d.y, [0, 10, 10, 0], rtol=1e-14)


@given(st.floats(1e-6, 10.0), st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_fast_equals_eps_times_slow(eps, z):
    from slowfast.models.futile import FutileCycleParams
    sys, _ = futile_cycle_scaled(FutileCycleParams())
    s = State.from_flat(z, 2)
    slow = eval_slow_time(sys, s, eps)
    fast = eval_fast_time(sys, s, eps)
    np.testing.assert_allclose(fast.x, eps * slow.x, rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(fast.y, eps * slow.y, rtol=1e-13, atol=1e-14)


def test_deviation_round_trip(ones):
    sys, _ = futile_cycle_scaled(ones)
    z = to_deviation(sys, State([0, 0], [0, 0, 0, 0]))
    np.testing.assert_allclose(z.y, [0, -1 / 3, -1 / 3, 0], atol=1e-15)
    x = np.array([0.2, 0.5])
    on = to_deviation(sys, State(x, futile_cycle_m0(ones, x)))
    np.testing.assert_allclose(on.y, 0, atol=1e-15)
    s = State([0.1, 0.3], [0.2, 0.1, 0.4, 0.05])
    np.testing.assert_allclose(from_deviation(sys, to_deviation(sys, s)).flat, s.flat, atol=1e-15)


def test_deviation_needs_m0():
    sys = SlowFastSystem(1, 1, lambda x, y, e: y, lambda x, y, e: -y)
    with pytest.raises(UnsupportedOperationError):
        to_deviation(sys, State([0], [0]))


def test_domain_contains_examples(ones):
    _, dom = futile_cycle_scaled(ones)
    ok, margin = domain_contains(dom, State([0, 0], [0, 0, 0, 0]), 0.01)
    assert ok and margin == 0.0
    assert not domain_contains(dom, State([0.6, 0.6], [0, 0, 0, 0]), 0.01)[0]
    assert not domain_contains(dom, State([0.1, 0.1], [0.5, 0.51, 0, 0]), 0.01)[0]
    with pytest.raises(DomainUndefinedError):
        domain_contains(dom, State([0, 0], [0, 0, 0, 0]), 0.9)


@given(st.floats(0.0, 1.0))
def test_domain_margin_monotone_toward_center(theta):
    from slowfast.models.futile import FutileCycleParams
    _, dom = futile_cycle_scaled(FutileCycleParams())
    poly = dom.at(0.01)
    center, _ = poly.chebyshev_center()
    v = np.array([0.3, 0.6, 0.5, 0.4, 0.2, 0.7])
    assert poly.contains(v)
    w = v + theta * (center - v)
    assert poly.contains(w)
    assert poly.margin(w) >= poly.margin(v) - 1e-15


def test_eps_dependent_rows(ones):
    _, dom = futile_cycle_scaled(ones)
    # x1 + x2 = 1 leaves no room for bound complexes once eps > 0
    v = np.array([0.5, 0.5, 0.0, 0.0, 0.0, 0.0])
    assert dom.at(0.01).contains(v)
    assert not dom.at(0.01).contains(v + np.array([0, 0, 0.1, 0, 0, 0]))
    assert dom.at(0.0).contains(v + np.array([0, 0, 0.1, 0, 0, 0]))


def test_box_domain_bounding_box():
    dom = EpsPolytope(np.array([[1.0, 0], [-1, 0], [0, 1], [0, -1]]), [1, 1, 2, 2], [0, 0, 1, 1], 1.0)
    lo, hi = dom.at(0.5).bounding_box()
    np.testing.assert_allclose(lo, [-1, -2.5])
    np.testing.assert_allclose(hi, [1, 2.5])


def test_jacobian_fast_linear():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    sys = SlowFastSystem(1, 2, lambda x, y, e: np.zeros(1), lambda x, y, e: A @ y)
    np.testing.assert_allclose(jacobian_fast(sys, [0.0], [0.3, -0.2], 0.0), A, atol=1e-6)
    sys2 = SlowFastSystem(1, 2, lambda x, y, e: np.zeros(1), lambda x, y, e: -y)
    np.testing.assert_allclose(jacobian_fast(sys2, [0.0], [1.0, 2.0], 0.0), -np.eye(2), atol=1e-8)


def test_jacobian_fast_futile_block_diagonal(ones):
    sys, _ = futile_cycle_scaled(ones)
    x = np.array([0.2, 0.3])
    J = jacobian_fast(sys, x, futile_cycle_m0(ones, x), 0.0)
    h = hurwitz_blocks(ones, x)
    np.testing.assert_allclose(J[:2, :2], h.B1, atol=1e-12)
    np.testing.assert_allclose(J[2:, 2:], h.B2, atol=1e-12)
    np.testing.assert_allclose(J[:2, 2:], 0, atol=1e-12)
    np.testing.assert_allclose(J[2:, :2], 0, atol=1e-12)


@given(st.lists(st.floats(0.01, 0.45), min_size=6, max_size=6))
def test_fd_matches_analytic_jacobian(z):
    from slowfast.models.futile import BISTABLE
    sys, _ = futile_cycle_scaled(BISTABLE)
    z = np.array(z)
    J = sys.pair_jacobian(z, 0.01)
    J_fd = fd_jacobian(lambda w: sys.pair(w, 0.01), z)
    np.testing.assert_allclose(J_fd, J, rtol=1e-5, atol=1e-5 * np.abs(J).max())


def test_parameter_document(tmp_path):
    allowed = {"m": ("a", "b")}
    doc = load_parameter_document('{"model": "m", "params": {"a": 1}, "eps": 0.1}', allowed)
    assert doc == {"model": "m", "params": {"a": 1.0}, "eps": 0.1}
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"model": "m", "params": {"b": 2}}))
    assert load_parameter_document(p, allowed)["eps"] is None
    for bad in ('{"model": "m", "extra": 1}', '{"model": "zz"}', '{"model": "m", "params": {"c": 1}}',
                '{"model": "m", "params": {"a": "x"}}', "{not json"):
        with pytest.raises(InvalidParameterError):
            load_parameter_document(bad, allowed)
