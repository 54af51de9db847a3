"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (or ``python3 tests/test_acceptance.py``).
The lines are also printed without ``-s`` because output capture is suspended
while they are written.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from slowfast.analysis import (
    Equilibrium,
    classify,
    convergence_census,
    detect_limit_cycle,
)
from slowfast.cli import main as cli_main
from slowfast.core import fd_jacobian, sample_domain
from slowfast.integrate import EventSpec, IntegratorConfig, integrate
from slowfast.manifold import SlowManifoldSolver, asymptotic_phase, manifold_error_scaling, solve_m0_path
from slowfast.models import build_model
from slowfast.models.counterexample import counterexample_jacobian_origin
from slowfast.models.futile import (
    BISTABLE,
    FutileCycleParams,
    K_polytope,
    derived_constants,
    futile_cycle_m0,
    futile_cycle_mass_action,
    futile_cycle_scaled,
    grid_in,
    hurwitz_blocks,
    reduced_futile_cycle,
)
from slowfast.monotone import (
    OrthantCone,
    eventually_positive_derivatives,
    kamke_check,
    monotone_order_preservation_test,
)

ONES = FutileCycleParams()
PARAM_SETS = {"all-ones": ONES, "bistable": BISTABLE}
FUTILE_CONE = OrthantCone((-1, 1))
INTERIOR_MARGIN = 1e-3


@pytest.fixture
def report(capsys):
    """Print one verdict line, then fail the test if the verdict is FAIL."""

    def emit(number: int, title: str, ok: bool, detail: str, started: float, budget: float | None = None):
        elapsed = time.perf_counter() - started
        within = budget is None or elapsed < budget
        verdict = "PASS" if ok and within else "FAIL"
        limit = f" / limit {budget:.0f}s" if budget is not None else ""
        with capsys.disabled():
            print(f"\n[{verdict}] criterion {number:2d} {title}: {detail} ({elapsed:.1f}s{limit})")
        assert ok, detail
        assert within, f"runtime {elapsed:.1f}s exceeds {budget:.0f}s"

    return emit


def k0_interior(n: int, rng: np.random.Generator) -> np.ndarray:
    pts = []
    while len(pts) < n:
        x = rng.uniform(INTERIOR_MARGIN, 1 - INTERIOR_MARGIN, 2)
        if x.sum() <= 1 - INTERIOR_MARGIN:
            pts.append(x)
    return np.array(pts)


def ordered_pairs(n: int, rng: np.random.Generator):
    pairs = []
    while len(pairs) < n:
        u = k0_interior(1, rng)[0]
        v = u + FUTILE_CONE.s * rng.uniform(1e-3, 0.1, 2)
        if v.min() >= INTERIOR_MARGIN and v.sum() <= 1 - INTERIOR_MARGIN:
            pairs.append((u, v))
    return pairs


def test_criterion_01_conservation(report):
    t0 = time.perf_counter()
    ma = futile_cycle_mass_action(ONES)
    sys_, dom = futile_cycle_scaled(ONES)
    starts, _ = sample_domain(dom, ONES.eps, 10, np.random.default_rng(11))
    ref = np.array([ONES.S_tot, ONES.E_tot, ONES.F_tot])
    worst = 0.0
    for v in starts:
        z9 = ma.species_from6(ma.from_scaled(v))
        tr = integrate(ma.field9(), z9, (0.0, 100.0), IntegratorConfig())
        totals = np.array([ma.totals(z) for z in tr.states])
        worst = max(worst, float(np.max(np.abs(totals - ref) / ref)))
    report(1, "conservation", worst <= 1e-8, f"max relative drift {worst:.2e} <= 1e-8 over 10 runs", t0, 10)


def test_criterion_02_positive_invariance(report):
    t0 = time.perf_counter()
    cfg = IntegratorConfig(rtol=1e-5, atol=1e-10, method="rosenbrock")
    worst, exits, n = np.inf, 0, 0
    for k, eps in enumerate((1e-1, 1e-2, 1e-3)):
        p = ONES.with_eps(eps)
        sys_, dom = futile_cycle_scaled(p)
        poly = dom.at(eps)
        field = sys_.slow_time_field(eps)
        starts, _ = sample_domain(dom, eps, 1000, np.random.default_rng(100 + k))
        for z in starts:
            tr = integrate(field, z, (0.0, 100.0), cfg, domain=poly)
            exits += tr.status == "left-domain"
            worst = min(worst, float(np.min(poly.b[None, :] - tr.states @ poly.A.T)))
            n += 1
    ok = exits == 0 and worst >= -1e-8
    report(2, "positive invariance", ok, f"{n} runs, {exits} exits, min margin {worst:.2e} >= -1e-8", t0, 120)


def test_criterion_03_slow_manifold(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    xs = np.column_stack([rng.uniform(0, 1, 1000), rng.uniform(0, 1, 1000)])
    xs[:, 1] *= 1 - xs[:, 0]
    xs = xs[np.lexsort((xs[:, 1], np.round(xs[:, 0], 1)))]
    res = newton = 0.0
    for p in PARAM_SETS.values():
        sys_, _ = futile_cycle_scaled(p)
        # Newton continuation along the sampled path; the first point is seeded by fast relaxation
        solver = SlowManifoldSolver(sys_, seeding="continuation")
        ys = solve_m0_path(solver, xs)
        for x, y_newton in zip(xs, ys):
            y = futile_cycle_m0(p, x)
            res = max(res, float(np.max(np.abs(sys_.g0(x, y, 0.0)))))
            newton = max(newton, float(np.max(np.abs(y_newton - y))))
    ok = res <= 1e-12 and newton <= 1e-10
    report(3, "slow-manifold exactness", ok,
           f"closed-form residual {res:.1e} <= 1e-12, Newton vs closed form {newton:.1e} <= 1e-10", t0)


def test_criterion_04_hurwitz(report):
    t0 = time.perf_counter()
    n_pts, bad, disagree, margin = 0, 0, 0, np.inf
    for p in PARAM_SETS.values():
        for x in grid_in(K_polytope(p), 50):
            h = hurwitz_blocks(p, x)
            n_pts += 1
            bad += not h.hurwitz
            disagree += h.hurwitz != h.eig_hurwitz
            margin = min(margin, *[m for pair in h.margins for m in pair])
    ok = bad == 0 and disagree == 0
    report(4, "Hurwitz audit", ok,
           f"{n_pts} grid points, {bad} failures, {disagree} trace/det vs eigenvalue mismatches, "
           f"min margin {margin:.3g}", t0)


def test_criterion_05_monotonicity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    details, ok = [], True
    for name, p in PARAM_SETS.items():
        field = reduced_futile_cycle(p)
        km = kamke_check(field, k0_interior(1000, rng), FUTILE_CONE, strict=True)
        epd = eventually_positive_derivatives(field, FUTILE_CONE, k0_interior(20, rng), cfg=cfg)
        order = monotone_order_preservation_test(field, FUTILE_CONE, ordered_pairs(100, rng), 5.0, cfg=cfg)
        ok &= km.passed and epd.achieved and not epd.excluded and bool(order.all())
        details.append(f"{name}: min off-diag {km.min_off_diagonal:.3g}, t0={epd.t0}, "
                       f"{int(order.sum())}/100 pairs strong")
    report(5, "monotonicity", ok, "; ".join(details), t0)


def test_criterion_06_manifold_error_law(report):
    t0 = time.perf_counter()
    sys_, _ = futile_cycle_scaled(ONES)
    xs = k0_interior(8, np.random.default_rng(6))
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-13, method="rosenbrock")
    rep = manifold_error_scaling(sys_, [1e-1, 1e-2, 1e-3, 1e-4], xs, cfg)
    ok = rep.slope is not None and 0.8 <= rep.slope <= 1.2
    errs = ", ".join(f"{e:.2e}" for e in rep.sup_error)
    report(6, "manifold O(eps) law", ok, f"slope {rep.slope:.3f} in [0.8, 1.2] (errors {errs})", t0, 120)


def test_criterion_07_asymptotic_phase(report):
    t0 = time.perf_counter()
    p = ONES.with_eps(1e-3)
    sys_, _ = futile_cycle_scaled(p)
    mu = derived_constants(p).mu
    x = np.array([0.3, 0.3])
    s0 = np.concatenate([x, futile_cycle_m0(p, x) + 0.1])
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-13, method="rosenbrock")
    rep = asymptotic_phase(sys_, s0, 1e-3, cfg, mu=mu)
    ok = rep.final_distance < 1e-6 and rep.rate is not None and rep.rate > 0
    report(7, "asymptotic phase", ok,
           f"distance {rep.initial_distance:.2e} -> {rep.final_distance:.2e} by tau=40/mu={rep.horizon:.1f}, "
           f"rate {rep.rate:.3f} > 0", t0)


def test_criterion_08_census(report):
    t0 = time.perf_counter()
    eps = 1e-3
    details, ok = [], True
    for name, p in PARAM_SETS.items():
        q = p.with_eps(eps)
        sys_, dom = futile_cycle_scaled(q)
        rep = convergence_census(sys_, dom, eps, 1000, 200.0, seed=8, x_box=(np.zeros(2), np.ones(2)))
        stable = [k for k, e in enumerate(rep.equilibria) if e.stable]
        shares = [rep.tallies[k] / rep.n_samples for k in stable]
        ok &= rep.converged_fraction >= 0.99
        if name == "bistable":
            ok &= len(stable) == 2 and all(s >= 0.05 for s in shares)
        details.append(f"{name}: converged {rep.converged_fraction:.3f}, stable shares "
                       + "/".join(f"{s:.2f}" for s in shares))
    report(8, "convergence census", ok, "; ".join(details), t0, 600)


def test_criterion_09_counterexample_dichotomy(report):
    t0 = time.perf_counter()
    stable = build_model("counterexample", eps=0.1)
    cen = convergence_census(stable.system, stable.domain, 0.1, 100, 50.0, seed=9)
    at_origin = len(cen.equilibria) == 1 and np.allclose(cen.equilibria[0].location, 0.0, atol=1e-10)
    ok = at_origin and cen.tallies == [100]

    osc = build_model("counterexample", eps=2.0)
    cyc = detect_limit_cycle(osc.field, [0.5, 0.5], EventSpec(lambda z: z[0], "up"), equilibria=[np.zeros(2)])
    ok &= cyc.verdict == "cycle-found" and cyc.tail_spread < 1e-6 and cyc.amplitude > 1e-2

    jac_err = 0.0
    for eps in (0.1, 2.0):
        m = build_model("counterexample", eps=eps)
        J, (tr, det) = counterexample_jacobian_origin(eps)
        J_fd = fd_jacobian(m.field.rhs, np.zeros(2))
        jac_err = max(jac_err, float(np.max(np.abs(J_fd - J))), abs(np.trace(J_fd) - (1 - 1 / eps)),
                      abs(np.linalg.det(J_fd) - 1 / eps))
        ok &= np.allclose(J, [[1, 1], [-2 / eps, -1 / eps]]) and tr == 1 - 1 / eps and det == 1 / eps
    ok &= jac_err <= 1e-6
    report(9, "counterexample dichotomy", ok,
           f"eps=0.1 census {cen.tallies[0] if cen.tallies else 0}/100 to origin; eps=2 {cyc.verdict} "
           f"(spread {cyc.tail_spread:.1e}, amplitude {cyc.amplitude:.3f}, period {cyc.period:.4f}); "
           f"Jacobian FD error {jac_err:.1e}", t0, 60)


def test_criterion_10_stability_flip(report):
    t0 = time.perf_counter()
    labels = {}
    ok = True
    for eps in (0.99, 1.01):
        eq = classify(build_model("counterexample", eps=eps).field, Equilibrium(np.zeros(2), 0.0))
        labels[eps] = eq.classification
        ok &= eq.stable == (1 - 1 / eps < 0)
    ok &= labels[0.99].startswith("stable") and labels[1.01].startswith("unstable")
    report(10, "stability flip", ok, f"eps=0.99 {labels[0.99]}, eps=1.01 {labels[1.01]}", t0)


def test_criterion_11_determinism(report, tmp_path):
    t0 = time.perf_counter()
    args = ["census", "--model", "futile-cycle", "--eps", "1e-3", "--samples", "1000", "--seed", "7",
            "--no-timestamp"]
    codes = [cli_main([*args, "--workers", str(w), "--out", str(tmp_path / f"w{w}")]) for w in (1, 2)]
    same = all((tmp_path / "w1" / f).read_bytes() == (tmp_path / "w2" / f).read_bytes()
               for f in ("census.json", "census.csv"))
    report(11, "determinism", codes == [0, 0] and same,
           f"seed 7, 1000 samples, workers 1 vs 2: exit codes {codes}, byte-identical={same}", t0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
