"""Computational audit of the seven standing hypotheses A1..A7.

A1 smoothness on U x V, A2 a critical manifold y = m0(x), A3 global
attraction of the frozen-x fast system, A4 a uniform Hurwitz bound for
D_y g0 along m0, A5 positive invariance of D_eps, A6 monotonicity of the
reduced flow, A7 isolated equilibria of the reduced flow.

Each entry carries one of four statuses: ``verified-numerically``,
``verified-analytically``, ``cited`` (argued elsewhere, numerical evidence
attached) or ``failed`` (with a witness).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ..analysis import find_equilibria, nullcline_scan, reduced_field, sign_change_scan
from ..core import EpsPolytope, SlowFastSystem, jacobian_fast
from ..integrate import IntegratorConfig, integrate
from ..monotone import OrthantCone, eventually_positive_derivatives, kamke_check
from .counterexample import CounterexampleParams, counterexample_system
from .futile import (
    FutileCycleParams,
    K0_polytope,
    K_polytope,
    futile_cycle_scaled,
    grid_in,
    hurwitz_blocks,
    reduced_futile_cycle,
    slow_domain,
)

__all__ = ["AssumptionResult", "AssumptionReport", "assumption_audit", "boundary_samples"]

Status = Literal["verified-numerically", "verified-analytically", "cited", "failed"]
ASSUMPTIONS = ("A1", "A2", "A3", "A4", "A5", "A6", "A7")

# outward normal . field may exceed zero by this much before A5 fails
INWARD_TOL = 1e-10
# signature of the order in which the reduced futile cycle is cooperative
FUTILE_CONE = OrthantCone((-1, 1))


@dataclass
class AssumptionResult:
    status: Status
    summary: str
    evidence: dict = field(default_factory=dict)
    witness: list | None = None

    @property
    def passed(self) -> bool:
        return self.status != "failed"


@dataclass
class AssumptionReport:
    model: str
    eps: float
    results: dict[str, AssumptionResult]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if tuple(sorted(self.results)) != ASSUMPTIONS:
            raise ValueError(f"report must cover exactly {ASSUMPTIONS}, got {sorted(self.results)}")

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "eps": self.eps,
            "passed": self.passed,
            "assumptions": {
                k: {"status": r.status, "summary": r.summary, "evidence": r.evidence, "witness": r.witness}
                for k, r in sorted(self.results.items())
            },
            "warnings": list(self.warnings),
        }


def boundary_samples(domain: EpsPolytope, eps: float, n: int, rng: np.random.Generator,
                     active_tol: float = 1e-12) -> tuple[np.ndarray, list[list[int]]]:
    """Points on the boundary of ``D_eps`` with the faces active at each.

    Interior samples are projected orthogonally onto a randomly chosen face;
    projections that violate another face are redrawn.
    """
    poly = domain.at(eps)
    lo, hi = poly.bounding_box()
    norms2 = np.einsum("ij,ij->i", poly.A, poly.A)
    pts, active = [], []
    for _ in range(1000 * n):
        if len(pts) >= n:
            break
        v = rng.uniform(lo, hi)
        if poly.margin(v) < 0:
            continue
        i = int(rng.integers(len(poly.b)))
        p = v + (poly.b[i] - poly.A[i] @ v) / norms2[i] * poly.A[i]
        sl = poly.slacks(p)
        if sl.min() < -active_tol:
            continue
        pts.append(p)
        active.append([int(j) for j in np.nonzero(np.abs(sl) <= active_tol * 10)[0]])
    return np.asarray(pts), active


def _inward_check(sys: SlowFastSystem, domain: EpsPolytope, eps: float, n: int, seed: int) -> AssumptionResult:
    rng = np.random.default_rng(seed)
    pts, active = boundary_samples(domain, eps, n, rng)
    poly = domain.at(eps)
    F = sys.slow_time_field(eps)
    worst, witness = -np.inf, None
    for p, faces in zip(pts, active):
        v = F(p)
        for j in faces:
            val = float(poly.A[j] @ v) / np.linalg.norm(poly.A[j])
            if val > worst:
                worst, witness = val, {"point": p.tolist(), "face": poly.labels[j] if poly.labels else j,
                                       "normal_component": val}
    ok = worst <= INWARD_TOL
    return AssumptionResult(
        "verified-numerically" if ok else "failed",
        f"outward normal component of the field <= {INWARD_TOL:g} at {len(pts)} boundary samples",
        {"n_boundary": len(pts), "max_normal_component": worst, "eps": eps},
        None if ok else [witness],
    )


def _manifold_residual(sys: SlowFastSystem, xs, tol: float = 1e-12) -> AssumptionResult:
    res = np.array([np.max(np.abs(sys.g0(x, sys.m0(x), 0.0))) for x in xs])
    k = int(np.argmax(res))
    ok = res[k] <= tol
    return AssumptionResult(
        "verified-numerically" if ok else "failed",
        f"|g0(x, m0(x), 0)| <= {tol:g} on the slow grid",
        {"n_points": len(xs), "max_residual": float(res[k])},
        None if ok else [np.asarray(xs[k]).tolist()],
    )


def _relaxation_check(sys: SlowFastSystem, xs, rng, n_y: int = 3, tau: float = 40.0,
                      tol: float = 1e-6, y_scale: float = 1.0) -> AssumptionResult:
    """Frozen-``x`` fast flow from random ``y`` must reach ``m0(x)``."""
    worst, witness = 0.0, None
    cfg = IntegratorConfig(rtol=1e-9, atol=1e-12, method="rosenbrock")
    for x in xs:
        target = sys.m0(x)
        fast = lambda y, x=x: sys.g0(x, y, 0.0)
        for _ in range(n_y):
            y0 = target + y_scale * rng.uniform(-1, 1, size=sys.m)
            yf = integrate(fast, y0, (0.0, tau), cfg).final
            d = float(np.linalg.norm(yf - target))
            if d > worst:
                worst, witness = d, {"x": np.asarray(x).tolist(), "y0": y0.tolist(), "distance": d}
    ok = worst <= tol
    return AssumptionResult(
        "verified-numerically" if ok else "failed",
        f"frozen-x fast runs reach m0(x) within {tol:g} by tau={tau:g}",
        {"n_x": len(xs), "runs_per_x": n_y, "max_distance": worst},
        None if ok else [witness],
    )


def _audit_futile(p: FutileCycleParams, eps: float, grid_n: int, x_grid, n_boundary: int, epd_samples: int,
                  kamke_n: int, seed: int) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    sys, dom = futile_cycle_scaled(p)
    U = slow_domain(p)
    K = K_polytope(p)
    notes: list[str] = []
    results: dict[str, AssumptionResult] = {}

    results["A1"] = AssumptionResult(
        "cited", "mass-action fields are polynomial; m0 is rational with positive denominators on U",
        {"sigma": U.sigma, "U": "x1 > -sigma, x2 > -sigma, x1 + x2 < 1 + sigma",
         "V_low": U.v_low.tolist(), "V_high": U.v_high.tolist()})

    xs = grid_in(K, grid_n)
    if x_grid is not None:
        extra = np.atleast_2d(np.asarray(x_grid, dtype=float))
        inside = np.array([U.contains_x(x) for x in extra], dtype=bool)
        if not inside.all():
            msg = f"{int((~inside).sum())} requested x points lie outside U and were excluded"
            warnings.warn(msg, stacklevel=3)
            notes.append(msg)
        xs = np.vstack([xs, extra[inside]])
    excluded = [] if x_grid is None else np.atleast_2d(x_grid)[~inside].tolist()

    a2 = _manifold_residual(sys, xs)
    in_V = all(U.contains_y(sys.m0(x)) for x in xs)
    a2.evidence["m0_in_V"] = in_V
    if not in_V:
        a2.status = "failed"
    results["A2"] = a2

    hw = [hurwitz_blocks(p, x) for x in xs]
    bad = [x.tolist() for x, h in zip(xs, hw) if not (h.hurwitz and h.eig_hurwitz)]
    agree = all(h.hurwitz == h.eig_hurwitz for h in hw)
    margins = np.array([[h.margins[0][0], h.margins[0][1], h.margins[1][0], h.margins[1][1]] for h in hw])
    mu = float(min(-np.max(h.eigenvalues.real) for h in hw))
    results["A4"] = AssumptionResult(
        "failed" if bad or not agree else "verified-numerically",
        "B1 and B2 have negative trace and positive determinant at every grid point",
        {"grid": f"{grid_n}x{grid_n} over K (U shrunk by sigma/2)", "n_points": len(xs),
         "min_neg_trace_B1": float(margins[:, 0].min()), "min_det_B1": float(margins[:, 1].min()),
         "min_neg_trace_B2": float(margins[:, 2].min()), "min_det_B2": float(margins[:, 3].min()),
         "trace_det_agrees_with_eigenvalues": agree, "mu_estimate": mu, "excluded": excluded},
        bad[:5] or None)

    # fast system at frozen x is affine in y: dz/dtau = B(x0) z, so Hurwitz B gives global attraction
    lin_err = 0.0
    for x in xs[:: max(1, len(xs) // 50)]:
        y0, y1 = rng.uniform(0, 1, 4), rng.uniform(0, 1, 4)
        mid = sys.g0(x, 0.5 * (y0 + y1), 0.0)
        lin_err = max(lin_err, float(np.max(np.abs(mid - 0.5 * (sys.g0(x, y0, 0.0) + sys.g0(x, y1, 0.0))))))
    affine = lin_err <= 1e-12
    results["A3"] = AssumptionResult(
        "verified-analytically" if affine and results["A4"].passed else "failed",
        "g0(x, ., 0) is affine in y, so the frozen fast system is linear in z = y - m0(x) and Hurwitz",
        {"affine_defect": lin_err, "relies_on": "A4"})

    results["A5"] = _inward_check(sys, dom, eps, n_boundary, seed)

    red = reduced_futile_cycle(p)
    interior = grid_in(K0_polytope(), int(np.ceil(np.sqrt(2 * kamke_n))) + 2)
    interior = interior[(interior.min(axis=1) > 1e-3) & (interior.sum(axis=1) < 1 - 1e-3)][:kamke_n]
    km = kamke_check(red, interior, FUTILE_CONE, strict=True)
    epd_pts = interior[rng.choice(len(interior), size=min(epd_samples, len(interior)), replace=False)]
    epd = eventually_positive_derivatives(red, FUTILE_CONE, epd_pts, domain=K0_polytope(),
                                          cfg=IntegratorConfig(rtol=1e-9, atol=1e-12))
    ok6 = km.passed and epd.achieved and not epd.excluded
    results["A6"] = AssumptionResult(
        "verified-numerically" if ok6 else "failed",
        "reduced flow is cooperative for the order with cone signature (-, +) and has eventually positive derivatives",
        {"kamke_points": len(interior), "min_conjugated_off_diagonal": km.min_off_diagonal,
         "epd_samples": epd.n_samples, "epd_t0": epd.t0, "epd_margin": epd.margin, "epd_excluded": epd.excluded,
         "signature": list(FUTILE_CONE.signature)},
        None if ok6 else (km.violations[:3] or [f"epd not achieved (excluded {epd.excluded})"]))

    seeds = nullcline_scan(red, [0.0, 0.0], [1.0, 1.0], 200)
    eqs = find_equilibria(red, seeds, domain=K0_polytope())
    ok7 = bool(eqs) and not any(e.degenerate for e in eqs)
    results["A7"] = AssumptionResult(
        "cited" if ok7 else "failed",
        "finitely many isolated equilibria of the reduced flow (general finiteness argument cited; count from a "
        "nullcline scan)",
        {"n_equilibria": len(eqs), "equilibria": [e.to_dict() for e in eqs], "scan_resolution": 200},
        None if ok7 else [e.location.tolist() for e in eqs if e.degenerate] or ["no equilibrium found"])
    return AssumptionReport("futile-cycle", eps, results, notes)


def _audit_counterexample(cp: CounterexampleParams, grid_n: int, n_boundary: int, seed: int) -> AssumptionReport:
    rng = np.random.default_rng(seed)
    sys, dom = counterexample_system(cp)
    xs = np.linspace(-cp.a, cp.a, grid_n)[:, None]
    results: dict[str, AssumptionResult] = {}
    results["A1"] = AssumptionResult("cited", "polynomial and tanh terms are smooth on every bounded set",
                                     {"box": {"a": cp.a, "b1": cp.b1}})
    results["A2"] = _manifold_residual(sys, xs)
    results["A3"] = _relaxation_check(sys, xs[:: max(1, grid_n // 10)], rng, y_scale=cp.b1)
    dy = np.array([jacobian_fast(sys, x, sys.m0(x), 0.0)[0, 0] for x in xs])
    results["A4"] = AssumptionResult(
        "verified-numerically" if dy.max() < 0 else "failed", "D_y g0 = -d1 < 0 along m0",
        {"n_points": len(xs), "max_eigenvalue": float(dy.max()), "mu_estimate": float(-dy.max())})
    results["A5"] = _inward_check(sys, dom, cp.eps, n_boundary, seed)
    results["A6"] = AssumptionResult("verified-analytically", "every scalar flow is monotone", {"n": 1})
    red = reduced_field(sys)
    roots = sign_change_scan(red.rhs, -cp.a, cp.a, 10_000)
    eqs = find_equilibria(red, roots[:, None])
    ok7 = bool(eqs) and not any(e.degenerate for e in eqs)
    results["A7"] = AssumptionResult(
        "cited" if ok7 else "failed", "the scalar equilibrium equation has isolated roots",
        {"n_equilibria": len(eqs), "equilibria": [e.to_dict() for e in eqs]})
    return AssumptionReport("counterexample", cp.eps, results)


def assumption_audit(params, eps: float | None = None, grid_n: int = 50, x_grid=None, n_boundary: int = 1000,
                     epd_samples: int = 20, kamke_n: int = 1000, seed: int = 0) -> AssumptionReport:
    """Check A1..A7 for a futile-cycle or counterexample parameter object.

    Parameters
    ----------
    params : FutileCycleParams or CounterexampleParams
    eps : float, optional
        Futile cycle only; defaults to ``E_tot / S_tot`` of ``params``.
    grid_n : int
        Slow grid resolution (``grid_n x grid_n`` over ``K`` for the futile cycle).
    x_grid : array_like, optional
        Extra slow points for A2/A4.  Points outside ``U`` are dropped with a warning.
    n_boundary : int
        Boundary samples for the inward-pointing test (A5).
    """
    if isinstance(params, CounterexampleParams):
        return _audit_counterexample(params, grid_n, n_boundary, seed)
    if not isinstance(params, FutileCycleParams):
        raise TypeError(f"no audit recipe for {type(params).__name__}")
    if eps is not None:
        params = params.with_eps(eps)
    return _audit_futile(params, params.eps, grid_n, x_grid, n_boundary, epd_samples, kamke_n, seed)
