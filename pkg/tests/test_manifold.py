from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slowfast.core import SlowFastSystem
from slowfast.errors import NoConvergenceError
from slowfast.integrate import IntegratorConfig
from slowfast.manifold import (
    SlowManifoldSolver,
    asymptotic_phase,
    estimate_mu,
    first_order_manifold,
    manifold_error_scaling,
    relax_to_manifold,
    solve_m0,
)
from slowfast.models.futile import derived_constants, futile_cycle_m0, futile_cycle_scaled

TIGHT = IntegratorConfig(rtol=1e-10, atol=1e-13, method="rosenbrock")


def drift_system(rate: float = 1.0) -> SlowFastSystem:
    """x' = 1, eps*y' = -rate*(y - x); exact slow manifold y = x - eps/rate."""
    return SlowFastSystem(
        1, 1,
        f0=lambda x, y, e: np.ones(1),
        g0=lambda x, y, e: -rate * (y - x),
        m0=lambda x: np.asarray(x, dtype=float).copy(),
        jac_pair=lambda x, y, e: np.array([[0.0, 0.0], [rate, -rate]]),
    )


def test_solve_m0_futile_examples(ones):
    sys, _ = futile_cycle_scaled(ones)
    for seeding in ("hook", "relaxation"):
        solver = SlowManifoldSolver(sys, seeding=seeding)
        np.testing.assert_allclose(solve_m0(solver, [0.0, 0.0]), [0, 1 / 3, 1 / 3, 0], atol=1e-10)
        y = solve_m0(solver, [1.0, 0.0])
        assert abs(y[0] - 1 / 3) < 1e-10 and abs(y[1]) < 1e-10


def test_solve_m0_linear():
    A = np.array([[-2.0, 1.0], [0.5, -3.0]])
    c = lambda x: np.array([np.sin(x[0]), x[0] ** 2])
    sys = SlowFastSystem(1, 2, lambda x, y, e: np.zeros(1), lambda x, y, e: A @ (y - c(x)))
    for x in (-1.0, 0.3, 2.0):
        y = solve_m0(SlowManifoldSolver(sys, seeding="relaxation"), [x])
        np.testing.assert_allclose(y, c([x]), atol=1e-10)


def test_solve_m0_reports_failure():
    # g0 = y^2 + 1 has no real root
    sys = SlowFastSystem(1, 1, lambda x, y, e: np.zeros(1), lambda x, y, e: y ** 2 + 1,
                         m0=lambda x: np.array([0.5]))
    with pytest.raises(NoConvergenceError) as info:
        solve_m0(SlowManifoldSolver(sys, max_iter=20), [0.0])
    assert info.value.last is not None


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_solve_m0_matches_closed_form(a, b):
    from slowfast.models.futile import BISTABLE
    x = np.array([a, b * (1 - a)])
    sys, _ = futile_cycle_scaled(BISTABLE)
    y = solve_m0(SlowManifoldSolver(sys, seeding="relaxation"), x)
    np.testing.assert_allclose(y, futile_cycle_m0(BISTABLE, x), atol=1e-10)
    assert np.max(np.abs(sys.g0(x, y, 0.0))) <= 1e-10


def test_first_order_limits(ones):
    sys, _ = futile_cycle_scaled(ones)
    x = np.array([0.3, 0.3])
    np.testing.assert_array_equal(first_order_manifold(sys, x, 0.0), futile_cycle_m0(ones, x))
    frozen = SlowFastSystem(1, 1, lambda x, y, e: np.zeros(1), lambda x, y, e: -(y - x),
                            m0=lambda x: np.asarray(x, dtype=float))
    np.testing.assert_allclose(first_order_manifold(frozen, [0.7], 0.1), [0.7], atol=1e-12)


def test_first_order_exact_for_drift_system():
    np.testing.assert_allclose(first_order_manifold(drift_system(2.0), [0.4], 0.01), [0.4 - 0.005], atol=1e-9)


def test_relaxation_linear_decay():
    sys = drift_system()
    r = relax_to_manifold(sys, [0.0], 1e-6, TIGHT, mu=1.0)
    assert r.tau == pytest.approx(20.0)
    # from y = m0(x) the offset to the slow manifold is eps; after tau_bl it is eps*(1 + O(e^-20))
    assert abs(r.y[0] - (r.x[0] - 1e-6)) < 1e-12
    assert np.linalg.norm(r.y - r.x) < 1e-5


def test_relaxation_small_eps_lands_on_m0(ones):
    sys, _ = futile_cycle_scaled(ones)
    r = relax_to_manifold(sys, [0.3, 0.3], 1e-9, TIGHT)
    np.testing.assert_allclose(r.y, futile_cycle_m0(ones, r.x), atol=1e-8)


def test_first_order_richardson(ones):
    sys, _ = futile_cycle_scaled(ones)
    x = np.array([0.3, 0.3])
    diffs = []
    for eps in (1e-2, 5e-3):
        r = relax_to_manifold(sys, x, eps, TIGHT)
        diffs.append(np.linalg.norm(r.y - first_order_manifold(sys, r.x, eps)))
    # the residual is o(eps): halving eps cuts it by at least 2 (close to 4 for an eps^2 law)
    assert diffs[0] / diffs[1] >= 2.0
    C = diffs[1] / 5e-3 ** 2
    assert diffs[0] <= 1.5 * C * 1e-2 ** 2


def test_error_scaling_linear_slope():
    rep = manifold_error_scaling(drift_system(), [1e-1, 1e-2, 1e-3], [[0.0], [0.5]], TIGHT)
    assert rep.status == "ok"
    assert abs(rep.slope - 1.0) < 0.05
    assert all(e >= 0 for e in rep.sup_error)


def test_error_scaling_guards():
    rep = manifold_error_scaling(drift_system(), [1e-2], [[0.0]], TIGHT)
    assert rep.status == "insufficient-points" and rep.slope is None
    with pytest.raises(ValueError):
        manifold_error_scaling(drift_system(), [1e-3, 1e-2], [[0.0]])


def test_estimate_mu(ones):
    assert estimate_mu(drift_system(3.0), [[0.0], [1.0]]) == pytest.approx(3.0)
    sys, _ = futile_cycle_scaled(ones)
    assert estimate_mu(sys, [[0.3, 0.3]]) >= derived_constants(ones).mu - 1e-12


def test_phase_on_manifold_stays_put():
    sys = drift_system()
    eps = 1e-3
    rep = asymptotic_phase(sys, [0.2, 0.2 - eps], eps, TIGHT, mu=1.0, manifold="first-order")
    assert max(rep.distances) <= 1e-9


def test_phase_linear_rate():
    mu = 2.5
    sys = drift_system(mu)
    rep = asymptotic_phase(sys, [0.0, 0.5], 1e-3, TIGHT, mu=mu, manifold="first-order", horizon_factor=10)
    assert rep.rate >= 0.9 * mu


def test_phase_futile(ones):
    sys, _ = futile_cycle_scaled(ones)
    mu = derived_constants(ones).mu
    x = np.array([0.3, 0.3])
    s0 = np.concatenate([x, futile_cycle_m0(ones, x) + 0.1 / 2])
    rep = asymptotic_phase(sys, s0, 1e-3, TIGHT, mu=mu)
    d = np.array(rep.distances)
    assert rep.rate > 0
    # monotone after the first step, until the tolerance floor is reached
    above = d[1:][d[1:] > 100 * TIGHT.atol]
    assert above.size > 10 and np.all(np.diff(above) < 0)
    assert rep.final_distance < 1e-6
