"""Equilibria, their classification, convergence censuses and limit-cycle detection."""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .core import Polytope, SlowFastSystem, VectorField, as_field, sample_domain
from .errors import NoConvergenceError, SlowFastError
from .integrate import EventSpec, IntegratorConfig, integrate, integrate_with_events

__all__ = [
    "Equilibrium",
    "CensusReport",
    "LimitCycleReport",
    "find_equilibria",
    "classify",
    "newton_root",
    "nullcline_scan",
    "sign_change_scan",
    "reduced_field",
    "system_equilibria",
    "convergence_census",
    "detect_limit_cycle",
    "to_jsonable",
]

Classification = Literal["stable-node", "stable-focus", "saddle", "unstable-node", "unstable-focus",
                         "center-marginal"]

DEDUPE_RADIUS = 1e-6
RESIDUAL_TOL = 1e-10
MARGINAL_TOL = 1e-8
SINGULAR_COND = 1e12


@dataclass
class Equilibrium:
    location: np.ndarray
    residual: float
    eigenvalues: np.ndarray | None = None
    classification: Classification | None = None
    degenerate: bool = False

    @property
    def stable(self) -> bool:
        return self.classification in ("stable-node", "stable-focus")

    def to_dict(self) -> dict:
        eig = None
        if self.eigenvalues is not None:
            eig = [[float(v.real), float(v.imag)] for v in self.eigenvalues]
        return {
            "location": [float(v) for v in self.location],
            "residual": float(self.residual),
            "eigenvalues": eig,
            "classification": self.classification,
            "degenerate": bool(self.degenerate),
        }


def _safe_eval(func, z):
    try:
        v = np.asarray(func(z), dtype=float)
    except (SlowFastError, FloatingPointError, ZeroDivisionError):
        return None
    return v if np.all(np.isfinite(v)) else None


def newton_root(field, z0, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Damped Newton iteration on ``field(z) = 0``.

    Steps are halved until the residual norm decreases; a singular Jacobian
    falls back to a least-squares step.  Raises :class:`NoConvergenceError`
    with the last iterate when the residual stalls.
    """
    field = as_field(field)
    z = np.array(z0, dtype=float)
    F = _safe_eval(field.rhs, z)
    if F is None:
        raise NoConvergenceError("field undefined at the seed", z, np.inf)
    r = np.linalg.norm(F)
    for _ in range(max_iter):
        if r <= tol:
            return z
        J = field.jacobian(z)
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = 1.0
        while lam > 1e-10:
            zt = z + lam * dz
            Ft = _safe_eval(field.rhs, zt)
            if Ft is not None and np.linalg.norm(Ft) < r:
                break
            lam *= 0.5
        else:
            # no decrease along the Newton direction; we are at roundoff level or stuck
            if r <= RESIDUAL_TOL:
                return z
            raise NoConvergenceError("Newton line search failed", z, r)
        z, F, r = zt, Ft, float(np.linalg.norm(Ft))
    if r <= RESIDUAL_TOL:
        return z
    raise NoConvergenceError(f"Newton did not converge in {max_iter} iterations", z, r)


def find_equilibria(field, seeds, domain: Polytope | None = None, dedupe: float = DEDUPE_RADIUS,
                    residual_tol: float = RESIDUAL_TOL, classify_roots: bool = True) -> list[Equilibrium]:
    """Run damped Newton from every seed and keep distinct verified roots.

    Roots outside ``domain`` (margin below ``-1e-9``) are dropped.  A root whose
    Jacobian has condition number above ``1e12`` is kept and flagged
    ``degenerate``.  The result is sorted lexicographically so it does not
    depend on seed order.
    """
    field = as_field(field)
    roots: list[np.ndarray] = []
    for s in np.atleast_2d(np.asarray(seeds, dtype=float)):
        try:
            z = newton_root(field, s)
        except NoConvergenceError:
            continue
        if domain is not None and domain.margin(z) < -1e-9:
            continue
        if any(np.linalg.norm(z - r) <= dedupe for r in roots):
            continue
        roots.append(z)
    out = []
    for z in sorted(roots, key=lambda v: tuple(np.round(v, 9))):
        res = float(np.max(np.abs(field.rhs(z))))
        if res > residual_tol:
            continue
        J = field.jacobian(z)
        eq = Equilibrium(z, res, degenerate=bool(np.linalg.cond(J) > SINGULAR_COND))
        out.append(classify(field, eq) if classify_roots else eq)
    return out


def classify(field, eq: Equilibrium) -> Equilibrium:
    """Fill eigenvalues and the stability label from the Jacobian at ``eq``."""
    field = as_field(field)
    J = field.jacobian(eq.location)
    lam = np.linalg.eigvals(J)
    re = lam.real
    oscill = bool(np.any(np.abs(lam.imag) > MARGINAL_TOL))
    if np.any(np.abs(re) < MARGINAL_TOL):
        label = "center-marginal"
    elif np.all(re < 0):
        label = "stable-focus" if oscill else "stable-node"
    elif np.all(re > 0):
        label = "unstable-focus" if oscill else "unstable-node"
    else:
        label = "saddle"
    return replace(eq, eigenvalues=lam[np.lexsort((lam.imag, lam.real))], classification=label)


def nullcline_scan(field, lo, hi, resolution: int = 200) -> np.ndarray:
    """Centers of grid cells on ``[lo, hi]`` where both components change sign.

    The field is sampled at the ``(resolution+1)^2`` cell corners; corners
    where it is undefined make the cell ineligible.
    """
    field = as_field(field)
    g1 = np.linspace(lo[0], hi[0], resolution + 1)
    g2 = np.linspace(lo[1], hi[1], resolution + 1)
    vals = np.full((resolution + 1, resolution + 1, 2), np.nan)
    for i, a in enumerate(g1):
        for j, b in enumerate(g2):
            v = _safe_eval(field.rhs, np.array([a, b]))
            if v is not None:
                vals[i, j] = v
    S = np.sign(vals)
    corners = np.stack([S[:-1, :-1], S[1:, :-1], S[:-1, 1:], S[1:, 1:]])
    defined = np.all(np.isfinite(corners), axis=(0, 3))
    corners = np.nan_to_num(corners, nan=0.0)  # undefined cells are masked out by `defined`
    change = (corners.max(axis=0) >= 0) & (corners.min(axis=0) <= 0)
    hit = defined & change[..., 0] & change[..., 1]
    ii, jj = np.nonzero(hit)
    return np.column_stack([(g1[ii] + g1[ii + 1]) / 2, (g2[jj] + g2[jj + 1]) / 2])


def sign_change_scan(func: Callable, lo: float, hi: float, n: int = 10_000) -> np.ndarray:
    """Midpoints of grid intervals of ``[lo, hi]`` where the scalar ``func`` changes sign."""
    x = np.linspace(lo, hi, n)
    v = np.array([float(np.ravel(func(np.array([t])))[0]) for t in x])
    s = np.sign(v)
    idx = np.nonzero((s[:-1] * s[1:] < 0) | (s[:-1] == 0))[0]
    return (x[idx] + x[idx + 1]) / 2


def reduced_field(sys: SlowFastSystem) -> VectorField:
    """``x -> f0(x, m0(x), 0)``, the slow flow on the critical manifold."""
    if sys.m0 is None:
        raise ValueError("reduced_field needs a system with a critical manifold")

    def rhs(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(sys.f0(x, sys.m0(x), 0.0), dtype=float)

    return VectorField(rhs, None, sys.n, f"{sys.name} (reduced)")


def system_equilibria(sys: SlowFastSystem, eps: float, x_lo, x_hi, resolution: int = 200,
                      domain: Polytope | None = None) -> tuple[list[Equilibrium], list[Equilibrium]]:
    """Equilibria of the reduced flow and of the full system at ``eps``.

    Reduced roots are seeded by a sign scan (``n = 1``) or a nullcline scan
    (``n = 2``), lifted with ``m0`` and Newton-refined on ``(f0, g0)``.
    Returns ``(reduced, full)``.
    """
    red = reduced_field(sys)
    if sys.n == 1:
        seeds = sign_change_scan(red.rhs, float(x_lo[0]), float(x_hi[0]), resolution)[:, None]
    elif sys.n == 2:
        seeds = nullcline_scan(red, x_lo, x_hi, resolution)
    else:
        raise ValueError("automatic equilibrium seeding supports one or two slow variables")
    reduced = find_equilibria(red, seeds)
    pair = VectorField(lambda z: sys.pair(z, eps), lambda z: sys.pair_jacobian(z, eps), sys.n + sys.m)
    lifted = [np.concatenate([e.location, sys.m0(e.location)]) for e in reduced]
    full = find_equilibria(pair, lifted, domain=domain, classify_roots=False)
    slow = sys.slow_time_field(eps)
    return reduced, [classify(slow, e) for e in full]


# ---------------------------------------------------------------- census


@dataclass
class CensusReport:
    eps: float
    n_samples: int
    n_converged: int
    equilibria: list[Equilibrium]
    tallies: list[int]
    non_converged: list[int]
    failed: list[int]
    horizon: float
    tol: float
    seed: int
    acceptance_rate: float
    rtol: float
    atol: float
    initial: np.ndarray = field(repr=False)
    terminal: np.ndarray = field(repr=False)
    outcome: list[str] = field(repr=False)
    times: np.ndarray = field(repr=False)

    @property
    def converged_fraction(self) -> float:
        return self.n_converged / self.n_samples if self.n_samples else 0.0

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "n_samples": self.n_samples,
            "n_converged": self.n_converged,
            "converged_fraction": self.converged_fraction,
            "equilibria": [e.to_dict() for e in self.equilibria],
            "basin_tallies": list(self.tallies),
            "non_converged": list(self.non_converged),
            "failed": list(self.failed),
            "horizon": self.horizon,
            "tol": self.tol,
            "proximity": 1e3 * self.tol,
            "seed": self.seed,
            "acceptance_rate": self.acceptance_rate,
            "rtol": self.rtol,
            "atol": self.atol,
        }

    def csv_rows(self):
        N = self.initial.shape[1]
        yield ["index"] + [f"z0_{i}" for i in range(N)] + ["outcome", "t_end"] + [f"z_{i}" for i in range(N)]
        for k in range(self.n_samples):
            yield ([k] + [repr(float(v)) for v in self.initial[k]] + [self.outcome[k], repr(float(self.times[k]))]
                   + [repr(float(v)) for v in self.terminal[k]])


# state shared with forked census workers (set just before the pool starts)
_CENSUS_JOB: dict = {}


def _census_one(k: int):
    job = _CENSUS_JOB
    sys, eps, eq_locs = job["sys"], job["eps"], job["eq"]
    field_ = job["field"]
    cfg, horizon, tol, chunk, poly = job["cfg"], job["horizon"], job["tol"], job["chunk"], job["poly"]
    z = job["samples"][k].copy()
    t = 0.0
    h = None
    while True:
        pr = sys.pair(z, eps)
        if np.max(np.abs(pr)) < tol and len(eq_locs):
            d = np.linalg.norm(eq_locs - z[None, :], axis=1)
            j = int(np.argmin(d))
            if d[j] < 1e3 * tol:
                return k, f"eq{j}", t, z
        if t >= horizon:
            return k, "horizon", t, z
        t_next = min(horizon, t + chunk)
        run_cfg = replace(cfg, h_init=h) if h is not None else cfg
        try:
            traj = integrate(field_, z, (t, t_next), run_cfg, domain=poly)
        except SlowFastError:
            return k, "failed", t, z
        z = traj.final
        if traj.status != "completed":
            return k, "failed" if traj.status != "left-domain" else "left-domain", traj.t_final, z
        t = t_next
        h = min(traj.h_last, chunk) if traj.h_last else None


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("SLOWFAST_WORKERS", "1") or 1)
    return max(1, int(workers))


def convergence_census(sys: SlowFastSystem, domain, eps: float, n_samples: int, horizon: float,
                       tol: float = 1e-6, seed: int = 0, equilibria: Sequence[Equilibrium] | None = None,
                       cfg: IntegratorConfig | None = None, workers: int | None = None,
                       checks: int = 100, x_box=None) -> CensusReport:
    """Integrate seeded uniform samples of ``D_eps`` and tally where they end up.

    A sample counts as converged once ``max(|f0|, |g0|) < tol`` and it lies
    within ``1e3 * tol`` of a known equilibrium; the test runs every
    ``horizon / checks`` time units.  When ``equilibria`` is omitted they are
    located from the reduced flow on ``x_box`` (default: the slow projection of
    ``D_eps``'s bounding box).  ``workers`` defaults to ``$SLOWFAST_WORKERS``;
    samples are drawn up front and results merged by index, so the report does
    not depend on the worker count.
    """
    cfg = cfg or IntegratorConfig(rtol=1e-6, atol=1e-9, method="rosenbrock")
    poly = domain.at(eps)
    rng = np.random.default_rng(seed)
    samples, acc = sample_domain(domain, eps, n_samples, rng)
    if equilibria is None:
        if x_box is None:
            lo, hi = poly.bounding_box()
            x_box = (lo[: sys.n], hi[: sys.n])
        _, equilibria = system_equilibria(sys, eps, x_box[0], x_box[1], domain=poly)
    equilibria = list(equilibria)
    eq_locs = np.array([e.location for e in equilibria]).reshape(len(equilibria), sys.n + sys.m)

    _CENSUS_JOB.clear()
    _CENSUS_JOB.update(sys=sys, eps=eps, eq=eq_locs, field=sys.slow_time_field(eps), cfg=cfg, horizon=horizon,
                       tol=tol, chunk=horizon / checks, poly=poly, samples=samples)
    n_workers = _worker_count(workers)
    idx = range(len(samples))
    try:
        if n_workers > 1 and "fork" in multiprocessing.get_all_start_methods():
            with multiprocessing.get_context("fork").Pool(n_workers) as pool:
                results = pool.map(_census_one, idx, chunksize=max(1, len(samples) // (4 * n_workers)))
        else:
            results = [_census_one(k) for k in idx]
    finally:
        _CENSUS_JOB.clear()
    results.sort(key=lambda r: r[0])

    tallies = [0] * len(equilibria)
    outcome, non_conv, failed = [], [], []
    terminal = np.empty_like(samples)
    times = np.empty(len(samples))
    for k, label, t, z in results:
        outcome.append(label)
        terminal[k] = z
        times[k] = t
        if label.startswith("eq"):
            tallies[int(label[2:])] += 1
        else:
            non_conv.append(k)
            if label != "horizon":
                failed.append(k)
    return CensusReport(float(eps), len(samples), sum(tallies), equilibria, tallies, non_conv, failed,
                        float(horizon), float(tol), int(seed), float(acc), cfg.rtol, cfg.atol,
                        samples, terminal, outcome, times)


# ---------------------------------------------------------------- limit cycles


@dataclass
class LimitCycleReport:
    section: str
    direction: str
    crossing_times: np.ndarray
    crossing_states: np.ndarray
    fixed_point: np.ndarray | None
    period: float | None
    amplitude: float | None
    verdict: Literal["cycle-found", "converged-to-equilibrium", "inconclusive"]
    tail_spread: float | None
    tol: float
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "section": self.section,
            "direction": self.direction,
            "crossing_times": [float(t) for t in self.crossing_times],
            "crossing_states": [[float(v) for v in z] for z in self.crossing_states],
            "fixed_point": None if self.fixed_point is None else [float(v) for v in self.fixed_point],
            "period": self.period,
            "amplitude": self.amplitude,
            "verdict": self.verdict,
            "tail_spread": self.tail_spread,
            "tol": self.tol,
            "message": self.message,
        }


def detect_limit_cycle(field, s0, section: EventSpec, cfg: IntegratorConfig | None = None,
                       equilibria: Sequence = (), n_crossings: int = 20, tol: float = 1e-6,
                       window: int = 5, far: float = 1e-3, t_max: float = 1e3,
                       section_label: str = "") -> LimitCycleReport:
    """Collect section crossings and decide whether they settle on a periodic orbit.

    The verdict is ``cycle-found`` when the last ``window`` crossing states are
    pairwise within ``tol`` and farther than ``far`` from every equilibrium.
    It is ``converged-to-equilibrium`` when the trajectory ends within ``far``
    of an equilibrium, and ``inconclusive`` otherwise.
    The period is the mean crossing interval over the tail.  The amplitude is
    the largest distance from the nearest equilibrium (or from the orbit mean
    when none is known) along one further period.
    """
    field = as_field(field)
    cfg = cfg or IntegratorConfig(rtol=1e-10, atol=1e-12)
    eqs = np.array([np.asarray(getattr(e, "location", e), dtype=float) for e in equilibria])
    cr = integrate_with_events(field, s0, section, cfg, max_crossings=n_crossings, t_max=t_max)
    times, states = cr.times, cr.states
    common = dict(section=section_label, direction=section.direction, crossing_times=times,
                  crossing_states=states, tol=tol)

    def dist_to_eq(z):
        return float(np.min(np.linalg.norm(eqs - z[None, :], axis=1))) if len(eqs) else math.inf

    if cr.trajectory_end is not None and dist_to_eq(cr.trajectory_end) < far:
        return LimitCycleReport(fixed_point=None, period=None, amplitude=None, verdict="converged-to-equilibrium",
                                tail_spread=None, message=f"trajectory ends at distance "
                                f"{dist_to_eq(cr.trajectory_end):.3g} from an equilibrium", **common)
    if len(times) < max(3, window):
        return LimitCycleReport(fixed_point=None, period=None, amplitude=None, verdict="inconclusive",
                                tail_spread=None, message=f"only {len(times)} crossings before t={cr.t_end:g}",
                                **common)
    tail = states[-window:]
    spread = float(max(np.linalg.norm(a - b) for a in tail for b in tail))
    fixed = tail[-1]
    if spread >= tol or dist_to_eq(fixed) <= far:
        return LimitCycleReport(fixed_point=None, period=None, amplitude=None, verdict="inconclusive",
                                tail_spread=spread, message="crossings have not settled away from equilibria",
                                **common)
    period = float(np.mean(np.diff(times[-window:])))
    orbit = integrate(field, fixed, (0.0, period), cfg, t_eval=np.linspace(0.0, period, 401)).states
    center = eqs[np.argmin(np.linalg.norm(eqs - fixed[None, :], axis=1))] if len(eqs) else orbit.mean(axis=0)
    amplitude = float(np.max(np.linalg.norm(orbit - center[None, :], axis=1)))
    verdict = "cycle-found" if amplitude > 10 * tol else "inconclusive"
    return LimitCycleReport(fixed_point=fixed, period=period, amplitude=amplitude, verdict=verdict,
                            tail_spread=spread, **common)


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and dataclass reports to JSON-ready values."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj
