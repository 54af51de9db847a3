"""Critical manifold, its first-order correction, and two numerical experiments.

The invariant slow manifold ``y = m(x, eps)`` is never built globally.  Three
computable stand-ins are provided:

* :func:`first_order_manifold`, the explicit expansion ``m0 + eps * m1``;
* :func:`corrected_manifold`, repeated solves of the invariance equation
  ``g0(x, y, eps) = eps * Dm(x) f0(x, y, eps)``, one order of ``eps`` per level;
* :func:`relax_to_manifold`, a fast-time run of the full system that lets
  the transverse component decay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import SlowFastSystem, fd_jacobian, jacobian_fast
from .errors import LeftDomainError, NoConvergenceError, SingularJacobianError, UnsupportedOperationError
from .integrate import IntegratorConfig, integrate

__all__ = [
    "SlowManifoldSolver",
    "ManifoldErrorReport",
    "PhaseTrackingReport",
    "RelaxResult",
    "solve_m0",
    "solve_m0_path",
    "dm0_dx",
    "first_order_manifold",
    "corrected_manifold",
    "relax_to_manifold",
    "estimate_mu",
    "manifold_error_scaling",
    "asymptotic_phase",
]

Seeding = Literal["hook", "continuation", "relaxation"]


@dataclass(frozen=True)
class SlowManifoldSolver:
    """Newton solver for ``g0(x, y, 0) = 0`` in ``y``."""

    system: SlowFastSystem
    tol: float = 1e-12
    max_iter: int = 50
    seeding: Seeding = "hook"
    relax_time: float = 50.0

    def __post_init__(self):
        if self.seeding not in ("hook", "continuation", "relaxation"):
            raise ValueError(f"unknown seeding strategy {self.seeding!r}")


def _newton(g, jac, y0, tol, max_iter):
    y = np.array(y0, dtype=float)
    r = g(y)
    res = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if res <= tol * (1.0 + np.max(np.abs(y))):
            return y, res
        J = jac(y)
        try:
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError("singular Jacobian in Newton iteration", y, res) from exc
        lam = 1.0
        while True:
            y_try = y - lam * step
            r_try = g(y_try)
            res_try = float(np.max(np.abs(r_try)))
            if np.isfinite(res_try) and (res_try < res or lam < 1e-4):
                break
            lam *= 0.5
        y, r, res = y_try, r_try, res_try
    if res <= tol * (1.0 + np.max(np.abs(y))):
        return y, res
    raise NoConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})", y, res)


def _relaxation_seed(solver: SlowManifoldSolver, x, y0):
    sys = solver.system
    x = np.asarray(x, dtype=float)
    rhs = lambda y: np.asarray(sys.g0(x, y, 0.0), dtype=float)
    traj = integrate(rhs, y0, (0.0, solver.relax_time), IntegratorConfig(rtol=1e-6, atol=1e-9))
    return traj.final


def solve_m0(solver: SlowManifoldSolver, x, seed=None) -> np.ndarray:
    """Point ``y`` on the critical manifold above ``x``.

    The seed comes from the ``m0`` hook, the supplied ``seed`` (continuation),
    or a frozen-``x`` fast relaxation, per ``solver.seeding``.  Raises
    :class:`NoConvergenceError` carrying the last iterate on failure.
    """
    sys = solver.system
    x = np.asarray(x, dtype=float)
    if solver.seeding == "hook" and sys.m0 is not None:
        y0 = np.asarray(sys.m0(x), dtype=float)
    elif solver.seeding == "continuation" and seed is not None:
        y0 = np.asarray(seed, dtype=float)
    else:
        start = np.zeros(sys.m) if seed is None else np.asarray(seed, dtype=float)
        y0 = _relaxation_seed(solver, x, start)
    g = lambda y: np.asarray(sys.g0(x, y, 0.0), dtype=float)
    jac = lambda y: jacobian_fast(sys, x, y, 0.0)
    y, _ = _newton(g, jac, y0, solver.tol, solver.max_iter)
    return y


def solve_m0_path(solver: SlowManifoldSolver, xs) -> np.ndarray:
    """Solve along a sequence of slow points, seeding each from its predecessor."""
    out = []
    prev = None
    for x in np.atleast_2d(xs):
        y = solve_m0(solver, x, seed=prev)
        out.append(y)
        prev = y
    return np.asarray(out)


def _m0_func(sys: SlowFastSystem):
    if sys.m0 is not None:
        return lambda x: np.asarray(sys.m0(x), dtype=float)
    solver = SlowManifoldSolver(sys, seeding="relaxation")
    return lambda x: solve_m0(solver, x)


def dm0_dx(sys: SlowFastSystem, x) -> np.ndarray:
    """``D_x m0`` by central differences, shape ``(m, n)``."""
    return fd_jacobian(_m0_func(sys), np.asarray(x, dtype=float))


def _dg0_deps(sys: SlowFastSystem, x, y, h: float = 1e-6) -> np.ndarray:
    # one-sided second-order difference, g0 need only exist for eps >= 0
    g = lambda e: np.asarray(sys.g0(x, y, e), dtype=float)
    return (-3.0 * g(0.0) + 4.0 * g(h) - g(2.0 * h)) / (2.0 * h)


def first_order_manifold(sys: SlowFastSystem, x, eps: float) -> np.ndarray:
    """``m0(x) + eps * m1(x)`` from the order-``eps`` balance of the invariance equation.

    ``m1`` solves ``D_y g0 m1 = D_x m0 f0(x, m0, 0) - dg0/deps`` at
    ``(x, m0(x), 0)``.
    """
    x = np.asarray(x, dtype=float)
    m0 = _m0_func(sys)(x)
    if eps == 0:
        return m0
    B = jacobian_fast(sys, x, m0, 0.0)
    if np.linalg.cond(B) > 1e12:
        raise SingularJacobianError(f"D_y g0 is singular at x={x.tolist()}")
    rhs = dm0_dx(sys, x) @ np.asarray(sys.f0(x, m0, 0.0), dtype=float) - _dg0_deps(sys, x, m0)
    m1 = np.linalg.solve(B, rhs)
    return m0 + eps * m1


def corrected_manifold(sys: SlowFastSystem, x, eps: float, order: int = 2, h: float = 1e-4) -> np.ndarray:
    """Iterated invariance-equation solve with error ``O(eps**(order+1))``.

    Level ``k`` solves ``g0(x, y, eps) = eps * D m_{k-1}(x) f0(x, y, eps)``
    for ``y`` by Newton, with ``D m_{k-1}`` from central differences of level
    ``k-1`` (step ``h``).  Level 0 is ``m0``.
    """
    x = np.asarray(x, dtype=float)
    m0 = _m0_func(sys)

    def level(xx, k):
        if k == 0 or eps == 0:
            return m0(xx)
        D = np.empty((sys.m, sys.n))
        for i in range(sys.n):
            dx = np.zeros(sys.n)
            dx[i] = h
            D[:, i] = (level(xx + dx, k - 1) - level(xx - dx, k - 1)) / (2 * h)
        resid = lambda y: np.asarray(sys.g0(xx, y, eps), dtype=float) - eps * D @ np.asarray(sys.f0(xx, y, eps), dtype=float)
        jac = lambda y: fd_jacobian(resid, y)
        y, _ = _newton(resid, jac, m0(xx), 1e-14, 30)
        return y

    return level(x, order)


def estimate_mu(sys: SlowFastSystem, x_samples) -> float:
    """``min_x |max Re eig D_y g0(x, m0(x), 0)|`` over the samples."""
    m0 = _m0_func(sys)
    mu = np.inf
    for x in np.atleast_2d(x_samples):
        eig = np.linalg.eigvals(jacobian_fast(sys, x, m0(x), 0.0))
        top = float(np.max(eig.real))
        if top >= 0:
            raise SingularJacobianError(f"D_y g0 is not Hurwitz at x={np.asarray(x).tolist()}")
        mu = min(mu, -top)
    return float(mu)


@dataclass(frozen=True)
class RelaxResult:
    x_start: np.ndarray
    x: np.ndarray
    y: np.ndarray
    tau: float
    drift: float


def relax_to_manifold(sys: SlowFastSystem, x, eps: float, cfg: IntegratorConfig | None = None,
                      mu: float | None = None, domain=None) -> RelaxResult:
    """Run the full system in fast time from ``(x, m0(x))`` for ``tau_bl = 20/mu``.

    The returned fast point sits on the slow manifold up to ``exp(-20)``
    times the initial offset; the slow point has drifted by
    ``O(eps * tau_bl)``, reported as ``drift``.
    """
    if not eps > 0:
        raise ValueError("relaxation needs eps > 0")
    cfg = cfg or IntegratorConfig()
    x = np.asarray(x, dtype=float)
    if mu is None:
        mu = estimate_mu(sys, [x])
    tau_bl = 20.0 / mu
    z0 = np.concatenate([x, _m0_func(sys)(x)])
    poly = domain.at(eps) if domain is not None else None
    traj = integrate(sys.fast_time_field(eps), z0, (0.0, tau_bl), cfg, domain=poly)
    if traj.status == "left-domain":
        raise LeftDomainError(f"relaxation from x={x.tolist()} left the domain", traj)
    if traj.status != "completed":
        raise NoConvergenceError(f"relaxation failed: {traj.message}", traj.final)
    xf, yf = traj.final[: sys.n], traj.final[sys.n :]
    return RelaxResult(x, xf, yf, tau_bl, float(np.linalg.norm(xf - x)))


@dataclass
class ManifoldErrorReport:
    eps: list[float]
    sup_error: list[float]
    slope: float | None
    intercept: float | None
    n_samples: int
    mu: float
    status: str = "ok"
    tau_bl: float = 0.0

    def to_csv_rows(self):
        return [("eps", "sup_error")] + list(zip(self.eps, self.sup_error))


def manifold_error_scaling(sys: SlowFastSystem, eps_list, x_samples, cfg: IntegratorConfig | None = None,
                           mu: float | None = None, domain=None) -> ManifoldErrorReport:
    """Sup over samples of ``|relaxed y - m0(x)|`` per ``eps`` and its log–log slope.

    The slope is an ordinary least-squares fit of ``log(error)`` against
    ``log(eps)``; with fewer than two ``eps`` values the report carries
    ``status="insufficient-points"`` and no slope.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    xs = np.atleast_2d(np.asarray(x_samples, dtype=float))
    if mu is None:
        mu = estimate_mu(sys, xs)
    m0 = _m0_func(sys)
    errors = []
    for eps in eps_list:
        worst = 0.0
        for x in xs:
            r = relax_to_manifold(sys, x, eps, cfg, mu=mu, domain=domain)
            worst = max(worst, float(np.linalg.norm(r.y - m0(r.x))))
        errors.append(worst)
    slope = intercept = None
    status = "ok"
    if len(eps_list) < 2:
        status = "insufficient-points"
    elif min(errors) <= 0:
        status = "zero-error"
    else:
        slope, intercept = np.polyfit(np.log(eps_list), np.log(errors), 1)
        slope, intercept = float(slope), float(intercept)
    return ManifoldErrorReport(eps_list, errors, slope, intercept, len(xs), float(mu), status, 20.0 / mu)


@dataclass
class PhaseTrackingReport:
    times: list[float]
    distances: list[float]
    rate: float | None
    initial_distance: float
    mu: float
    eps: float
    horizon: float
    fit_window: tuple[float, float] | None = None
    manifold: str = "corrected"
    final_distance: float = field(default=0.0)


def asymptotic_phase(sys: SlowFastSystem, s0, eps: float, cfg: IntegratorConfig | None = None,
                     mu: float | None = None, horizon_factor: float = 40.0, n_out: int = 200,
                     manifold: Literal["m0", "first-order", "corrected"] = "corrected",
                     order: int = 2) -> PhaseTrackingReport:
    """Distance of a fast-time trajectory to the slow-manifold proxy, and its decay rate.

    Integrates from ``s0`` over ``tau`` in ``[0, horizon_factor/mu]`` and
    records ``|y(tau) - m(x(tau))|`` at ``n_out`` evenly spaced times.  The
    rate is minus the least-squares slope of ``log(dist)`` over the samples
    with ``dist > 100 * atol``.
    """
    cfg = cfg or IntegratorConfig()
    z0 = np.asarray(s0.flat if hasattr(s0, "flat") else s0, dtype=float)
    x0 = z0[: sys.n]
    if mu is None:
        mu = estimate_mu(sys, [x0])
    horizon = horizon_factor / mu
    times = np.linspace(0.0, horizon, n_out + 1)
    traj = integrate(sys.fast_time_field(eps), z0, (0.0, horizon), cfg, t_eval=times)
    if traj.status != "completed":
        raise NoConvergenceError(f"phase-tracking run failed: {traj.status}", traj.final)
    if manifold == "m0":
        proxy = _m0_func(sys)
    elif manifold == "first-order":
        proxy = lambda x: first_order_manifold(sys, x, eps)
    elif manifold == "corrected":
        proxy = lambda x: corrected_manifold(sys, x, eps, order=order)
    else:
        raise UnsupportedOperationError(f"unknown manifold proxy {manifold!r}")
    dist = np.array([np.linalg.norm(z[sys.n :] - proxy(z[: sys.n])) for z in traj.states])
    keep = dist > 100 * cfg.atol
    rate = None
    window = None
    if np.count_nonzero(keep) >= 2:
        t_fit = traj.times[keep]
        slope, _ = np.polyfit(t_fit, np.log(dist[keep]), 1)
        rate = float(-slope)
        window = (float(t_fit[0]), float(t_fit[-1]))
    return PhaseTrackingReport(traj.times.tolist(), dist.tolist(), rate, float(dist[0]), float(mu), float(eps),
                               float(horizon), window, manifold, float(dist[-1]))
