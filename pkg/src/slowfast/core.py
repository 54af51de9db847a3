"""Slow–fast systems, their two time scales, deviation coordinates and domains.

A system is a pair ``(f0, g0)`` of evaluators with signature
``(x, y, eps) -> array`` describing

    dx/dt = f0(x, y, eps),    eps * dy/dt = g0(x, y, eps)

Integrators work on flat state vectors ``z = concat(x, y)``; :class:`State`
is the structured view used at the API boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DegenerateTimescaleError,
    DomainUndefinedError,
    EvaluationError,
    InvalidParameterError,
    InvalidStateError,
    UnsupportedOperationError,
)

__all__ = [
    "State",
    "ParameterSet",
    "VectorField",
    "SlowFastSystem",
    "EpsPolytope",
    "Polytope",
    "SlowDomain",
    "eval_slow_time",
    "eval_fast_time",
    "to_deviation",
    "from_deviation",
    "domain_contains",
    "jacobian_fast",
    "fd_jacobian",
    "load_parameter_document",
    "sample_domain",
]

Evaluator = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

FD_REL_STEP = 1e-6
FD_ABS_STEP = 1e-6


def _finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite values in {what}: {arr!r}")
    return arr


@dataclass(frozen=True)
class State:
    """A point ``(x, y)`` split into its slow and fast blocks."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.ndim != 1 or y.ndim != 1 or x.size < 1 or y.size < 1:
            raise InvalidStateError("State needs non-empty 1-D slow and fast blocks")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidStateError("State entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.y.size

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_flat(cls, z: Sequence[float], n: int) -> "State":
        z = np.asarray(z, dtype=float)
        return cls(z[:n], z[n:])


@dataclass(frozen=True)
class ParameterSet:
    """Named real parameters, each with a lower bound checked on construction.

    ``bounds`` maps a name to ``(lower, strict)``; a missing entry means the
    parameter is unconstrained.
    """

    values: Mapping[str, float]
    bounds: Mapping[str, tuple[float, bool]] = field(default_factory=dict)

    def __post_init__(self):
        vals = {str(k): float(v) for k, v in dict(self.values).items()}
        bnds = {str(k): (float(lo), bool(strict)) for k, (lo, strict) in dict(self.bounds).items()}
        for name, (lo, strict) in bnds.items():
            if name not in vals:
                raise InvalidParameterError(f"missing parameter {name!r}")
        for name, v in vals.items():
            if not np.isfinite(v):
                raise InvalidParameterError(f"parameter {name!r} is not finite")
            if name in bnds:
                lo, strict = bnds[name]
                if (strict and not v > lo) or (not strict and not v >= lo):
                    op = ">" if strict else ">="
                    raise InvalidParameterError(f"parameter {name!r}={v} violates {name} {op} {lo}")
        object.__setattr__(self, "values", MappingProxyType(vals))
        object.__setattr__(self, "bounds", MappingProxyType(bnds))

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def as_dict(self) -> dict[str, float]:
        return dict(self.values)


@dataclass(frozen=True)
class VectorField:
    """Autonomous vector field ``z -> F(z)`` with an optional Jacobian hook."""

    rhs: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray] | None = None
    dim: int | None = None
    name: str = ""

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return self.rhs(z)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.jac is not None:
            return _finite(np.asarray(self.jac(z), dtype=float), "Jacobian")
        return fd_jacobian(self.rhs, z)


def as_field(field_like) -> VectorField:
    """Wrap a plain callable ``z -> dz`` as a :class:`VectorField`."""
    if isinstance(field_like, VectorField):
        return field_like
    if callable(field_like):
        return VectorField(field_like)
    raise TypeError(f"expected a callable vector field, got {type(field_like).__name__}")


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], z: np.ndarray) -> np.ndarray:
    """Central finite-difference Jacobian, step ``max(1e-6, 1e-6*|z_i|)`` per column."""
    z = np.asarray(z, dtype=float)
    f0 = _finite(np.asarray(func(z), dtype=float), "vector field")
    jac = np.empty((f0.size, z.size))
    for i in range(z.size):
        h = max(FD_ABS_STEP, FD_REL_STEP * abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (np.asarray(func(zp), dtype=float) - np.asarray(func(zm), dtype=float)) / (2 * h)
    return _finite(jac, "finite-difference Jacobian")


@dataclass(frozen=True)
class SlowFastSystem:
    """The pair ``(f0, g0)`` with optional analytic hooks.

    ``m0`` is the critical manifold ``x -> y`` with ``g0(x, m0(x), 0) = 0``.
    ``jac_y_g0`` is ``(x, y, eps) -> D_y g0``.  ``jac_pair`` is
    ``(x, y, eps) -> D_z (f0, g0)`` as an ``(n+m) x (n+m)`` matrix; integrators
    use it to build the Jacobian of either time scale without finite
    differences.
    """

    n: int
    m: int
    f0: Evaluator
    g0: Evaluator
    m0: Callable[[np.ndarray], np.ndarray] | None = None
    jac_y_g0: Evaluator | None = None
    params: ParameterSet | None = None
    jac_pair: Evaluator | None = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidStateError("slow and fast dimensions must be at least 1")

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        return z[: self.n], z[self.n :]

    def pair(self, z: np.ndarray, eps: float) -> np.ndarray:
        """``concat(f0, g0)`` at the flat point ``z``."""
        x, y = self.split(z)
        return np.concatenate([self.f0(x, y, eps), self.g0(x, y, eps)])

    def pair_jacobian(self, z: np.ndarray, eps: float) -> np.ndarray:
        x, y = self.split(z)
        if self.jac_pair is not None:
            return np.asarray(self.jac_pair(x, y, eps), dtype=float)
        return fd_jacobian(lambda w: self.pair(w, eps), np.asarray(z, dtype=float))

    def slow_time_field(self, eps: float) -> VectorField:
        """``(f0, g0/eps)`` as a flat vector field in slow time ``t``."""
        if not eps > 0:
            raise DegenerateTimescaleError(f"slow time needs eps > 0, got {eps}")
        n = self.n
        scale = np.concatenate([np.ones(n), np.full(self.m, 1.0 / eps)])

        def rhs(z):
            x, y = z[:n], z[n:]
            return np.concatenate([self.f0(x, y, eps), self.g0(x, y, eps) / eps])

        jac = None
        if self.jac_pair is not None:
            def jac(z):
                return scale[:, None] * self.jac_pair(z[:n], z[n:], eps)

        return VectorField(rhs, jac, self.n + self.m, f"{self.name} (slow time, eps={eps:g})")

    def fast_time_field(self, eps: float) -> VectorField:
        """``(eps*f0, g0)`` as a flat vector field in fast time ``tau = t/eps``."""
        if eps < 0:
            raise DegenerateTimescaleError(f"fast time needs eps >= 0, got {eps}")
        n = self.n
        scale = np.concatenate([np.full(n, float(eps)), np.ones(self.m)])

        def rhs(z):
            x, y = z[:n], z[n:]
            return np.concatenate([eps * self.f0(x, y, eps), self.g0(x, y, eps)])

        jac = None
        if self.jac_pair is not None:
            def jac(z):
                return scale[:, None] * self.jac_pair(z[:n], z[n:], eps)

        return VectorField(rhs, jac, self.n + self.m, f"{self.name} (fast time, eps={eps:g})")


def _as_state(s, n: int) -> State:
    if isinstance(s, State):
        return s
    return State.from_flat(s, n)


def eval_slow_time(sys: SlowFastSystem, s: State, eps: float) -> State:
    """Derivative ``(f0, g0/eps)`` with respect to slow time."""
    if not eps > 0:
        raise DegenerateTimescaleError(f"slow time needs eps > 0, got {eps}")
    s = _as_state(s, sys.n)
    dx = _finite(np.asarray(sys.f0(s.x, s.y, eps), dtype=float), "f0")
    dy = _finite(np.asarray(sys.g0(s.x, s.y, eps), dtype=float), "g0") / eps
    return State(dx, dy)


def eval_fast_time(sys: SlowFastSystem, s: State, eps: float) -> State:
    """Derivative ``(eps*f0, g0)`` with respect to fast time; slow block is 0 at eps=0."""
    if eps < 0:
        raise DegenerateTimescaleError(f"fast time needs eps >= 0, got {eps}")
    s = _as_state(s, sys.n)
    dy = _finite(np.asarray(sys.g0(s.x, s.y, eps), dtype=float), "g0")
    if eps == 0:
        return State(np.zeros(sys.n), dy)
    dx = _finite(np.asarray(sys.f0(s.x, s.y, eps), dtype=float), "f0")
    return State(eps * dx, dy)


def to_deviation(sys: SlowFastSystem, s: State) -> State:
    """Map ``(x, y)`` to ``(x, z)`` with ``z = y - m0(x)``."""
    if sys.m0 is None:
        raise UnsupportedOperationError("deviation coordinates need the m0 hook")
    s = _as_state(s, sys.n)
    return State(s.x, s.y - np.asarray(sys.m0(s.x), dtype=float))


def from_deviation(sys: SlowFastSystem, s: State) -> State:
    """Inverse of :func:`to_deviation`."""
    if sys.m0 is None:
        raise UnsupportedOperationError("deviation coordinates need the m0 hook")
    s = _as_state(s, sys.n)
    return State(s.x, s.y + np.asarray(sys.m0(s.x), dtype=float))


def jacobian_fast(sys: SlowFastSystem, x, y, eps: float) -> np.ndarray:
    """``D_y g0(x, y, eps)``: analytic hook if present, else central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if sys.jac_y_g0 is not None:
        return _finite(np.asarray(sys.jac_y_g0(x, y, eps), dtype=float), "D_y g0")
    return fd_jacobian(lambda w: sys.g0(x, w, eps), y)


@dataclass(frozen=True)
class Polytope:
    """Fixed polytope ``{v : A v <= b}``."""

    A: np.ndarray
    b: np.ndarray
    labels: tuple[str, ...] = ()

    def slacks(self, v) -> np.ndarray:
        return self.b - self.A @ np.asarray(v, dtype=float)

    def margin(self, v) -> float:
        return float(np.min(self.slacks(v)))

    def contains(self, v, tol: float = 0.0) -> bool:
        return self.margin(v) >= -tol

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box by one LP per coordinate and direction."""
        dim = self.A.shape[1]
        lo = np.empty(dim)
        hi = np.empty(dim)
        bounds = [(None, None)] * dim
        for i in range(dim):
            c = np.zeros(dim)
            c[i] = 1.0
            for sign, out in ((1.0, lo), (-1.0, hi)):
                res = linprog(sign * c, A_ub=self.A, b_ub=self.b, bounds=bounds, method="highs")
                if res.status != 0:
                    raise DomainUndefinedError(f"polytope is empty or unbounded ({res.message})")
                out[i] = res.x[i]
        return lo, hi

    def chebyshev_center(self) -> tuple[np.ndarray, float]:
        """Center and radius of the largest inscribed ball."""
        dim = self.A.shape[1]
        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(dim + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        res = linprog(c, A_ub=A_ub, b_ub=self.b, bounds=[(None, None)] * dim + [(0, None)], method="highs")
        if res.status != 0:
            raise DomainUndefinedError(f"cannot center polytope ({res.message})")
        return res.x[:dim], float(res.x[-1])


@dataclass(frozen=True)
class EpsPolytope:
    """Family ``D_eps = {v : a_i(eps) . v <= b_i(eps)}``, affine in ``eps``.

    ``a(eps) = A + eps * A1`` and ``b(eps) = b0 + eps * b1``.  Valid for ``eps``
    in ``(0, eps_max]``; ``eps = 0`` is also accepted since everything is
    continuous there.
    """

    A: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    eps_max: float
    labels: tuple[str, ...] = ()
    A1: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b0 = np.asarray(self.b0, dtype=float).ravel()
        b1 = np.asarray(self.b1, dtype=float).ravel()
        if b0.shape != (A.shape[0],) or b1.shape != (A.shape[0],):
            raise ValueError("offset vectors must have one entry per inequality")
        A1 = np.zeros_like(A) if self.A1 is None else np.asarray(self.A1, dtype=float).reshape(A.shape)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def offsets(self, eps: float) -> np.ndarray:
        self._check(eps)
        return self.b0 + eps * self.b1

    def rows(self, eps: float) -> np.ndarray:
        self._check(eps)
        return self.A + eps * self.A1

    def _check(self, eps: float) -> None:
        if not (0 <= eps <= self.eps_max):
            raise DomainUndefinedError(f"eps={eps} outside the validity interval (0, {self.eps_max}]")

    def at(self, eps: float) -> Polytope:
        return Polytope(self.rows(eps), self.offsets(eps), self.labels)


def domain_contains(dom: EpsPolytope, s, eps: float) -> tuple[bool, float]:
    """Membership of ``s`` in ``D_eps`` and the worst margin ``min_i b_i(eps) - a_i.v``."""
    if isinstance(s, State):
        v = s.flat
    else:
        v = np.asarray(s, dtype=float)
    margin = dom.at(eps).margin(v)
    return margin >= 0.0, margin


def sample_domain(domain: EpsPolytope, eps: float, n: int, rng: np.random.Generator,
                  max_batches: int = 10_000) -> tuple[np.ndarray, float]:
    """Uniform samples of ``D_eps`` by rejection from its bounding box; returns acceptance rate."""
    poly = domain.at(eps)
    lo, hi = poly.bounding_box()
    out = []
    drawn = 0
    for _ in range(max_batches):
        batch = rng.uniform(lo, hi, size=(max(4 * n, 64), lo.size))
        drawn += batch.shape[0]
        ok = np.min(poly.b[None, :] - batch @ poly.A.T, axis=1) >= 0
        out.extend(batch[ok])
        if len(out) >= n:
            break
    pts = np.asarray(out[:n])
    return pts, len(out) / drawn


@dataclass(frozen=True)
class SlowDomain:
    """Open slow set ``U = {x : A x < b}`` with margin ``sigma`` and a fast box ``V``."""

    A: np.ndarray
    b: np.ndarray
    sigma: float
    v_low: np.ndarray
    v_high: np.ndarray

    def contains_x(self, x) -> bool:
        return bool(np.all(self.A @ np.asarray(x, dtype=float) < self.b))

    def contains_y(self, y) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y > self.v_low) and np.all(y < self.v_high))

    def shrunk(self, fraction: float) -> Polytope:
        """Closed subset obtained by pulling every face inward by ``fraction * sigma``."""
        norms = np.linalg.norm(self.A, axis=1)
        return Polytope(self.A, self.b - fraction * self.sigma * norms)

    @staticmethod
    def padded_box(lo, hi, pad: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
        """Tightest box around ``[lo, hi]`` widened by ``pad`` of its extent."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        width = np.where(hi > lo, hi - lo, 1.0)
        return lo - pad * width, hi + pad * width


def load_parameter_document(source, allowed: Mapping[str, Sequence[str]]) -> dict[str, Any]:
    """Parse ``{"model": str, "params": {name: number}, "eps": number}``.

    ``allowed`` maps each model key to its parameter names.  Unknown top-level
    keys, unknown models and unknown parameter names raise
    :class:`InvalidParameterError`.
    """
    if isinstance(source, Mapping):
        doc = dict(source)
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"malformed parameter document: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidParameterError("parameter document must be a JSON object")
    extra = set(doc) - {"model", "params", "eps"}
    if extra:
        raise InvalidParameterError(f"unknown keys in parameter document: {sorted(extra)}")
    model = doc.get("model")
    if model not in allowed:
        raise InvalidParameterError(f"unknown model {model!r}; expected one of {sorted(allowed)}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise InvalidParameterError("'params' must be an object")
    unknown = set(params) - set(allowed[model])
    if unknown:
        raise InvalidParameterError(f"unknown parameters for {model}: {sorted(unknown)}")
    for k, v in params.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InvalidParameterError(f"parameter {k!r} must be a number")
    eps = doc.get("eps")
    if eps is not None and (isinstance(eps, bool) or not isinstance(eps, (int, float))):
        raise InvalidParameterError("'eps' must be a number")
    return {"model": model, "params": {k: float(v) for k, v in params.items()},
            "eps": None if eps is None else float(eps)}
