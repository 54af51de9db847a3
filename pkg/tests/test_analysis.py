from __future__ import annotations

import json

import numpy as np
import pytest

from slowfast.analysis import (
    Equilibrium,
    classify,
    convergence_census,
    detect_limit_cycle,
    find_equilibria,
    newton_root,
    nullcline_scan,
    system_equilibria,
    to_jsonable,
)
from slowfast.core import VectorField
from slowfast.errors import NoConvergenceError
from slowfast.integrate import EventSpec, IntegratorConfig
from slowfast.models import build_model
from slowfast.models.futile import K0_polytope, futile_cycle_scaled, reduced_futile_cycle

ROTATION = VectorField(lambda z: np.array([z[1], -z[0]]), lambda z: np.array([[0.0, 1.0], [-1.0, 0.0]]), 2)
UP_THROUGH_X0 = EventSpec(lambda z: z[0], "up")


def reduced_roots(params, resolution=200):
    F = reduced_futile_cycle(params)
    return find_equilibria(F, nullcline_scan(F, [0, 0], [1, 1], resolution), domain=K0_polytope())


def test_newton_root_and_failure():
    f = VectorField(lambda z: np.array([z[0] ** 2 - 2.0]))
    assert newton_root(f, [1.0])[0] == pytest.approx(np.sqrt(2), abs=1e-14)
    with pytest.raises(NoConvergenceError):
        newton_root(VectorField(lambda z: np.array([z[0] ** 2 + 1.0])), [0.5], max_iter=30)


def test_counterexample_equilibria():
    m = build_model("counterexample", eps=2.0)
    reduced, full = system_equilibria(m.system, 2.0, *m.box)
    assert len(reduced) == 1 and len(full) == 1
    np.testing.assert_allclose(full[0].location, [0, 0], atol=1e-12)
    assert full[0].classification == "unstable-focus"


def test_symmetric_root_on_diagonal(ones):
    roots = reduced_roots(ones)
    assert len(roots) == 1
    x = roots[0].location
    assert abs(x[0] - x[1]) <= 1e-8
    assert roots[0].classification in ("stable-node", "stable-focus")


def test_bistable_three_roots(bistable):
    roots = reduced_roots(bistable)
    assert [r.classification for r in roots].count("saddle") == 1
    assert sum(r.stable for r in roots) == 2
    # the count from a much finer grid agrees
    assert len(reduced_roots(bistable, 500)) == 3


@pytest.mark.parametrize("name", ["ones", "bistable"])
def test_roots_survive_grid_refinement(name, request):
    p = request.getfixturevalue(name)
    coarse = reduced_roots(p, 100)
    fine = reduced_roots(p, 200)
    assert len(coarse) == len(fine)
    for a, b in zip(coarse, fine):
        assert a.residual <= 1e-10
        assert np.linalg.norm(a.location - b.location) <= 1e-8


def test_nullcline_scan_linear():
    cand = nullcline_scan(lambda z: z, [-1, -1], [1, 1], 21)
    assert len(cand) == 1 and np.linalg.norm(cand[0]) < 0.1


def test_nullcline_count_matches_roots(ones):
    F = reduced_futile_cycle(ones)
    seeds = nullcline_scan(F, [0, 0], [1, 1], 200)
    assert len(find_equilibria(F, seeds, domain=K0_polytope())) == 1


def test_classify_saddle_and_marginal():
    saddle = classify(lambda z: np.array([z[0], -z[1]]), Equilibrium(np.zeros(2), 0.0))
    assert saddle.classification == "saddle" and not saddle.stable
    center = classify(ROTATION, Equilibrium(np.zeros(2), 0.0))
    assert center.classification == "center-marginal"


@pytest.mark.parametrize("eps", [0.5, 0.9, 1.1, 2.0])
def test_stability_flip_follows_trace(eps):
    m = build_model("counterexample", eps=eps)
    eq = classify(m.field, Equilibrium(np.zeros(2), 0.0))
    assert eq.stable == (1 - 1 / eps < 0)
    assert np.all(np.sign(eq.eigenvalues.real) == np.sign(1 - 1 / eps))


def test_equilibrium_serialization():
    eq = classify(ROTATION, Equilibrium(np.zeros(2), 0.0))
    doc = json.loads(json.dumps(to_jsonable(eq.to_dict())))
    assert doc["classification"] == "center-marginal"
    assert sorted(tuple(v) for v in doc["eigenvalues"]) == [(0.0, -1.0), (0.0, 1.0)]


def test_census_counterexample_dichotomy():
    stable = build_model("counterexample", eps=0.1)
    rep = convergence_census(stable.system, stable.domain, 0.1, 100, 50.0, seed=0)
    assert rep.converged_fraction == 1.0 and rep.tallies == [100]
    cyc = build_model("counterexample", eps=2.0)
    rep2 = convergence_census(cyc.system, cyc.domain, 2.0, 100, 20.0, seed=0)
    assert rep2.converged_fraction <= 0.02
    assert sum(rep2.tallies) + len(rep2.non_converged) == rep2.n_samples


def test_census_is_deterministic_across_workers():
    m = build_model("counterexample", eps=0.1)
    a = convergence_census(m.system, m.domain, 0.1, 12, 20.0, seed=3, workers=1)
    b = convergence_census(m.system, m.domain, 0.1, 12, 20.0, seed=3, workers=2)
    assert json.dumps(to_jsonable(a.to_dict())) == json.dumps(to_jsonable(b.to_dict()))
    np.testing.assert_array_equal(a.terminal, b.terminal)
    assert list(a.csv_rows()) == list(b.csv_rows())


def test_census_fraction_grows_with_horizon(bistable):
    p = bistable.with_eps(1e-3)
    sys, dom = futile_cycle_scaled(p)
    _, eqs = system_equilibria(sys, 1e-3, [0, 0], [1, 1], domain=dom.at(1e-3))
    fractions = [convergence_census(sys, dom, 1e-3, 24, h, seed=5, equilibria=eqs).converged_fraction
                 for h in (25.0, 50.0, 100.0, 200.0)]
    assert all(a <= b for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == 1.0


def test_limit_cycle_counterexample():
    m = build_model("counterexample", eps=2.0)
    eq = [np.zeros(2)]
    rep = detect_limit_cycle(m.field, [0.5, 0.5], UP_THROUGH_X0, equilibria=eq)
    assert rep.verdict == "cycle-found"
    assert rep.amplitude > 1e-2 and np.isfinite(rep.period) and rep.tail_spread < 1e-6
    tight = detect_limit_cycle(m.field, [0.5, 0.5], UP_THROUGH_X0, IntegratorConfig(rtol=1e-11, atol=1e-13),
                               equilibria=eq)
    assert abs(tight.period - rep.period) / rep.period < 1e-3
    stable = build_model("counterexample", eps=0.1)
    assert detect_limit_cycle(stable.field, [0.5, 0.5], UP_THROUGH_X0, equilibria=eq).verdict \
        == "converged-to-equilibrium"


def test_limit_cycle_rotation_and_inconclusive():
    rep = detect_limit_cycle(ROTATION, [1.0, 0.0], EventSpec(lambda z: z[1], "up"))
    assert rep.verdict == "cycle-found"
    assert abs(rep.period - 2 * np.pi) < 1e-4
    few = detect_limit_cycle(lambda z: np.ones(2), [0.0, -1.0], EventSpec(lambda z: z[1], "up"), t_max=5)
    assert few.verdict == "inconclusive"
