"""Adaptive integration of autonomous vector fields.

Two single-step methods are available:

* ``"rk45"``: the Dormand–Prince 5(4) explicit pair, for non-stiff work.
* ``"rosenbrock"``: a four-stage, stiffly accurate, L-stable Rosenbrock
  method of order 3 with an embedded order-2 error estimate (the RODAS3
  coefficient set).  The Jacobian is evaluated once per step point and reused
  across rejected attempts; only the linear system is refactored.

The stiff method is chosen explicitly through :class:`IntegratorConfig`;
there is no automatic switching.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .core import VectorField, as_field, fd_jacobian

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "EventSpec",
    "Crossings",
    "integrate",
    "integrate_variational",
    "integrate_with_events",
    "write_trajectory_csv",
]

Method = Literal["rk45", "rosenbrock"]
Status = Literal["completed", "left-domain", "step-failure", "max-steps"]


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float | None = None
    h_max: float = np.inf
    max_steps: int = 200_000
    method: Method = "rk45"
    # slack below zero tolerated before a domain exit is declared
    domain_tol: float = 1e-8

    def __post_init__(self):
        if not (0 < self.rtol <= 1e-2):
            raise ValueError(f"rtol must lie in (0, 1e-2], got {self.rtol}")
        if not self.atol > 0:
            raise ValueError(f"atol must be positive, got {self.atol}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.method not in ("rk45", "rosenbrock"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.h_init is not None and not self.h_init > 0:
            raise ValueError("h_init must be positive")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")

    def tightened(self, factor: float) -> "IntegratorConfig":
        return replace(self, rtol=self.rtol / factor, atol=self.atol / factor)


@dataclass
class Trajectory:
    """Recorded solution of one integration run."""

    times: np.ndarray
    states: np.ndarray
    status: Status
    n_steps: int = 0
    n_rejected: int = 0
    n_fev: int = 0
    n_jev: int = 0
    h_last: float | None = None
    message: str = ""

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def success(self) -> bool:
        return self.status == "completed"


@dataclass(frozen=True)
class EventSpec:
    """Scalar section function with a crossing direction.

    ``direction="up"`` keeps crossings where the function goes from negative to
    positive.
    """

    function: Callable[[np.ndarray], float]
    direction: Literal["up", "down", "both"] = "both"
    tol: float = 1e-12

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("event refinement tolerance must be positive")
        if self.direction not in ("up", "down", "both"):
            raise ValueError(f"unknown crossing direction {self.direction!r}")

    def brackets(self, g_old: float, g_new: float) -> bool:
        if self.direction in ("up", "both") and g_old < 0 <= g_new:
            return True
        if self.direction in ("down", "both") and g_old > 0 >= g_new:
            return True
        return False


@dataclass
class Crossings:
    times: np.ndarray
    states: np.ndarray
    status: str
    trajectory_end: np.ndarray | None = None
    t_end: float = 0.0

    def __len__(self) -> int:
        return len(self.times)


# Dormand–Prince 5(4)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

# RODAS3: (I/(h*gamma) - J) K_i = f(z + sum a_ij K_j) + sum (c_ij/h) K_j
_ROS_GAMMA = 0.5
_ROS_A31, _ROS_A41, _ROS_A43 = 2.0, 2.0, 1.0
_ROS_C21, _ROS_C31, _ROS_C32 = 4.0, 1.0, -1.0
_ROS_C41, _ROS_C42, _ROS_C43 = 1.0, -1.0, -8.0 / 3.0


class _RK45:
    error_order = 4

    def __init__(self, field: VectorField):
        self.f = field.rhs
        self.nfev = 0
        self.njev = 0
        self._k0: np.ndarray | None = None
        self._k0_at: np.ndarray | None = None

    def begin(self, z: np.ndarray, fz: np.ndarray | None = None):
        self._k0_at = z
        if fz is None:
            fz = self.f(z)
            self.nfev += 1
        self._k0 = fz

    def step(self, z: np.ndarray, h: float):
        ks = np.empty((7, z.size))
        ks[0] = self._k0
        for i in range(1, 7):
            zi = z + h * (_DP_A[i] @ ks[:i])
            ks[i] = self.f(zi)
        self.nfev += 6
        z_new = z + h * (_DP_B @ ks)
        err = h * (_DP_E @ ks)
        return z_new, err, ks[6]

    def accept(self, z_new: np.ndarray, f_new: np.ndarray):
        self._k0_at = z_new
        self._k0 = f_new


class _Rosenbrock:
    error_order = 2

    def __init__(self, field: VectorField):
        self.field = field
        self.f = field.rhs
        self.nfev = 0
        self.njev = 0
        self._fz: np.ndarray | None = None
        self._J: np.ndarray | None = None
        self._eye: np.ndarray | None = None

    def begin(self, z: np.ndarray, fz: np.ndarray | None = None):
        if fz is None:
            fz = self.f(z)
            self.nfev += 1
        self._fz = fz
        self._J = self.field.jacobian(z)
        self.njev += 1
        if self._eye is None or self._eye.shape[0] != z.size:
            self._eye = np.eye(z.size)

    def step(self, z: np.ndarray, h: float):
        fz = self._fz
        lu = lu_factor(self._eye / (h * _ROS_GAMMA) - self._J, check_finite=False)
        k1 = lu_solve(lu, fz, check_finite=False)
        k2 = lu_solve(lu, fz + (_ROS_C21 / h) * k1, check_finite=False)
        f3 = self.f(z + _ROS_A31 * k1)
        k3 = lu_solve(lu, f3 + (_ROS_C31 * k1 + _ROS_C32 * k2) / h, check_finite=False)
        f4 = self.f(z + _ROS_A41 * k1 + _ROS_A43 * k3)
        k4 = lu_solve(lu, f4 + (_ROS_C41 * k1 + _ROS_C42 * k2 + _ROS_C43 * k3) / h, check_finite=False)
        self.nfev += 2
        z_new = z + 2.0 * k1 + k3 + k4
        return z_new, k4, None

    def accept(self, z_new: np.ndarray, f_new: np.ndarray | None):
        self.begin(z_new, f_new)


def _make_stepper(field: VectorField, method: Method):
    return _RK45(field) if method == "rk45" else _Rosenbrock(field)


def _initial_step(f, z, fz, t_len, cfg: IntegratorConfig, order: int) -> float:
    scale = cfg.atol + cfg.rtol * np.abs(z)
    d0 = np.max(np.abs(z) / scale)
    d1 = np.max(np.abs(fz) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_len)
    z1 = z + h0 * fz
    d2 = np.max(np.abs(f(z1) - fz) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1, t_len, cfg.h_max)


class _Driver:
    """Shared accept/reject loop; ``on_step`` sees every accepted step."""

    def __init__(self, field: VectorField, cfg: IntegratorConfig):
        self.field = field
        self.cfg = cfg
        self.stepper = _make_stepper(field, cfg.method)

    def run(self, z0, t0, t1, stops: Sequence[float], on_step, h_init=None):
        cfg = self.cfg
        f = self.field.rhs
        z = np.array(z0, dtype=float)
        t = float(t0)
        fz = np.asarray(f(z), dtype=float)
        self.stepper.nfev += 1
        if not np.all(np.isfinite(fz)):
            return "step-failure", t, z, 0, 0, None, "non-finite field at initial state"
        self.stepper.begin(z, fz)
        order = self.stepper.error_order
        h = h_init or cfg.h_init or _initial_step(f, z, fz, t1 - t0, cfg, order)
        h = min(h, cfg.h_max)
        stops = [s for s in stops if s > t0]
        si = 0
        n_acc = n_rej = 0
        exponent = -1.0 / (order + 1)
        while t < t1:
            if n_acc >= cfg.max_steps:
                return "max-steps", t, z, n_acc, n_rej, h, f"reached max_steps={cfg.max_steps}"
            h_min = 16 * np.spacing(max(abs(t), 1.0))
            target = stops[si] if si < len(stops) else t1
            h_try = min(h, cfg.h_max)
            hit = False
            if t + h_try >= target - h_min:
                h_try = target - t
                hit = True
            if h_try < h_min:
                return "step-failure", t, z, n_acc, n_rej, h, f"step size underflow at t={t:.6g}"
            z_new, err, f_new = self.stepper.step(z, h_try)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(z), np.abs(z_new))
            if not np.all(np.isfinite(z_new)):
                err_norm = np.inf
            else:
                err_norm = float(np.max(np.abs(err) / scale))
            if err_norm <= 1.0:
                t_new = target if hit else t + h_try
                if f_new is None:
                    f_new = np.asarray(f(z_new), dtype=float)
                    self.stepper.nfev += 1
                if not np.all(np.isfinite(f_new)):
                    return "step-failure", t, z, n_acc, n_rej, h, "non-finite field after step"
                n_acc += 1
                stop = on_step(t, z, t_new, z_new, h_try, hit)
                self.stepper.accept(z_new, f_new)
                t, z = t_new, z_new
                if hit and si < len(stops) and target == stops[si]:
                    si += 1
                fac = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** exponent))
                if not hit or fac < 1:
                    h = h_try * fac
                if stop:
                    return "stopped", t, z, n_acc, n_rej, h, ""
            else:
                n_rej += 1
                fac = 0.2 if not np.isfinite(err_norm) else max(0.2, 0.9 * err_norm ** exponent)
                h = h_try * fac
        return "completed", t, z, n_acc, n_rej, h, ""


def integrate(field, s0, t_span, cfg: IntegratorConfig | None = None, domain=None,
              t_eval: Sequence[float] | None = None) -> Trajectory:
    """Integrate ``dz/dt = field(z)`` over ``t_span``.

    Parameters
    ----------
    field : VectorField or callable
        Autonomous right-hand side on flat state vectors.
    s0 : array_like
        Initial state.
    t_span : (float, float)
        Start and end time, ``start < end``.
    cfg : IntegratorConfig, optional
    domain : object with ``margin(z)``, optional
        Typically a :class:`~slowfast.core.Polytope`.  When the margin drops
        below ``-cfg.domain_tol`` the run stops with status ``"left-domain"``
        and the last recorded state is the linearly interpolated boundary
        point.
    t_eval : sequence of float, optional
        Output times.  Steps are shortened to land on them exactly.  Without
        it every accepted step is recorded.
    """
    cfg = cfg or IntegratorConfig()
    field = as_field(field)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t0 < t1:
        raise ValueError(f"t_span must be increasing, got {t_span}")
    z0 = np.array(s0, dtype=float).ravel()
    if not np.all(np.isfinite(z0)):
        raise ValueError("initial state must be finite")

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t1:
            raise ValueError("t_eval must be strictly increasing inside t_span")
    times = [t0] if t_eval is None or t_eval[0] == t0 else []
    states = [z0.copy()] if times else []
    out_times = set(t_eval.tolist()) if t_eval is not None else None
    exit_info: dict = {}

    def on_step(t_old, z_old, t_new, z_new, h, hit):
        if domain is not None:
            m_new = domain.margin(z_new)
            if m_new < -cfg.domain_tol:
                m_old = domain.margin(z_old)
                theta = m_old / (m_old - m_new) if m_old > m_new else 1.0
                theta = min(max(theta, 0.0), 1.0)
                exit_info["t"] = t_old + theta * (t_new - t_old)
                exit_info["z"] = z_old + theta * (z_new - z_old)
                return True
        if out_times is None or (hit and t_new in out_times):
            times.append(t_new)
            states.append(z_new.copy())
        return False

    driver = _Driver(field, cfg)
    stops = list(t_eval) if t_eval is not None else []
    status, t, z, n_acc, n_rej, h, msg = driver.run(z0, t0, t1, stops, on_step)
    if status == "stopped":
        status = "left-domain"
        msg = f"left domain at t={exit_info['t']:.6g}"
        if not times or exit_info["t"] > times[-1]:
            times.append(exit_info["t"])
            states.append(exit_info["z"])
    elif status != "completed" and (not times or t > times[-1]):
        times.append(t)
        states.append(z.copy())
    st = driver.stepper
    return Trajectory(np.asarray(times), np.asarray(states).reshape(len(times), z0.size), status,
                      n_acc, n_rej, st.nfev, st.njev, h, msg)


def integrate_variational(field, s0, t_span, cfg: IntegratorConfig | None = None,
                          t_eval: Sequence[float] | None = None, domain=None):
    """Integrate the flow together with its derivative ``M = D phi_t``.

    Solves ``M' = J(z(t)) M`` with ``M(0) = I`` alongside the state and returns
    ``(trajectory, matrices)`` where ``matrices[k]`` is ``D phi`` at
    ``trajectory.times[k]``.
    """
    field = as_field(field)
    z0 = np.array(s0, dtype=float).ravel()
    N = z0.size

    def rhs(w):
        z = w[:N]
        M = w[N:].reshape(N, N)
        return np.concatenate([field.rhs(z), (field.jacobian(z) @ M).ravel()])

    aug = VectorField(rhs, None, N + N * N, f"variational({field.name})")
    w0 = np.concatenate([z0, np.eye(N).ravel()])
    dom = None
    if domain is not None:
        dom = _Projected(domain, N)
    traj = integrate(aug, w0, t_span, cfg, domain=dom, t_eval=t_eval)
    mats = traj.states[:, N:].reshape(-1, N, N)
    state_traj = Trajectory(traj.times, traj.states[:, :N], traj.status, traj.n_steps, traj.n_rejected,
                            traj.n_fev, traj.n_jev, traj.h_last, traj.message)
    return state_traj, mats


@dataclass(frozen=True)
class _Projected:
    domain: object
    n: int

    def margin(self, w):
        return self.domain.margin(w[: self.n])


def integrate_with_events(field, s0, event: EventSpec, cfg: IntegratorConfig | None = None,
                          max_crossings: int = 20, t_max: float = 1e4, t0: float = 0.0) -> Crossings:
    """Record up to ``max_crossings`` section crossings in the requested direction.

    Each crossing is refined by bisection on the length of a single step taken
    from the start of the bracketing step, until ``|event| <= event.tol``.
    Status is ``"max-crossings"`` when enough crossings were found, otherwise
    the integrator's termination status (``"completed"`` means the horizon
    ``t_max`` was reached).
    """
    cfg = cfg or IntegratorConfig()
    field = as_field(field)
    z0 = np.array(s0, dtype=float).ravel()
    ev = event.function
    found_t: list[float] = []
    found_z: list[np.ndarray] = []
    driver = _Driver(field, cfg)
    stepper = driver.stepper
    g_prev = [float(ev(z0))]

    def refine(t_old, z_old, h, g_old):
        # stepper state still refers to z_old when on_step runs
        lo, hi = 0.0, h
        z_lo, g_lo = z_old, g_old
        z_hi, _, _ = stepper.step(z_old, hi)
        g_hi = float(ev(z_hi))
        z_best, g_best, h_best = z_hi, g_hi, hi
        for _ in range(200):
            if abs(g_best) <= event.tol:
                break
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            z_mid, _, _ = stepper.step(z_old, mid)
            g_mid = float(ev(z_mid))
            if np.sign(g_mid) == np.sign(g_lo) and g_mid != 0:
                lo, z_lo, g_lo = mid, z_mid, g_mid
            else:
                hi, z_hi, g_hi = mid, z_mid, g_mid
            z_best, g_best, h_best = (z_lo, g_lo, lo) if abs(g_lo) < abs(g_hi) else (z_hi, g_hi, hi)
        return t_old + h_best, z_best

    def on_step(t_old, z_old, t_new, z_new, h, hit):
        g_new = float(ev(z_new))
        g_old = g_prev[0]
        g_prev[0] = g_new
        if event.brackets(g_old, g_new):
            tc, zc = refine(t_old, z_old, h, g_old)
            found_t.append(tc)
            found_z.append(np.array(zc))
            if len(found_t) >= max_crossings:
                return True
        return False

    status, t, z, *_ = driver.run(z0, t0, t0 + t_max, [], on_step)
    if status == "stopped":
        status = "max-crossings"
    states = np.asarray(found_z).reshape(len(found_z), z0.size)
    return Crossings(np.asarray(found_t), states, status, z, t)


def write_trajectory_csv(traj: Trajectory, path, n: int) -> Path:
    """Write ``t,x1..xn,y1..ym`` rows at full precision."""
    path = Path(path)
    m = traj.states.shape[1] - n
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{j + 1}" for j in range(m)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, z in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in z])
    return path
