"""Orthant orders and numerical monotonicity certificates.

An orthant cone is ``C = {v : s_i v_i >= 0}`` for a sign vector ``s``.  Its
dual cone is generated by the functionals ``v -> s_i v_i`` and the cone itself
by the signed unit vectors ``s_j e_j``, so positivity of ``D phi_t`` in the
cone order reduces to positivity of ``diag(s) D phi_t diag(s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .core import VectorField, as_field
from .errors import EvaluationError
from .integrate import IntegratorConfig, integrate, integrate_variational

__all__ = [
    "OrthantCone",
    "KamkeReport",
    "EpdReport",
    "cone_leq",
    "dual_generators",
    "kamke_check",
    "eventually_positive_derivatives",
    "monotone_order_preservation_test",
    "perturbed_field",
]

# strict positivity threshold for interior tests
INTERIOR_TOL = 1e-12

Relation = Literal["unrelated", "leq", "strict", "strong"]


@dataclass(frozen=True)
class OrthantCone:
    signature: tuple[int, ...]

    def __post_init__(self):
        sig = tuple(int(s) for s in self.signature)
        if not sig or any(s not in (1, -1) for s in sig):
            raise ValueError(f"signature must be a non-empty vector of +1/-1, got {self.signature}")
        object.__setattr__(self, "signature", sig)

    @property
    def dim(self) -> int:
        return len(self.signature)

    @property
    def s(self) -> np.ndarray:
        return np.array(self.signature, dtype=float)

    def contains(self, v) -> bool:
        return bool(np.all(self.s * np.asarray(v, dtype=float) >= 0))

    def interior(self, v, tol: float = INTERIOR_TOL) -> bool:
        return bool(np.all(self.s * np.asarray(v, dtype=float) > tol))

    def generators(self) -> np.ndarray:
        """Extreme rays ``s_j e_j`` as rows."""
        return np.diag(self.s)

    def check_axioms(self) -> bool:
        """``C + C ⊂ C``, ``R+ C ⊂ C`` and ``C ∩ -C = {0}``, checked on the generators."""
        G = self.generators()
        closed_sum = all(self.contains(G[i] + G[j]) for i in range(self.dim) for j in range(self.dim))
        closed_scale = all(self.contains(a * g) for g in G for a in (0.0, 0.5, 3.0))
        pointed = not any(self.contains(-g) for g in G)
        return closed_sum and closed_scale and pointed


def cone_leq(cone: OrthantCone, u, v) -> Relation:
    """Relation of ``u`` to ``v``: ``strong`` if ``v - u`` is interior, ``strict`` if in ``C`` and nonzero."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (cone.dim,) or v.shape != (cone.dim,):
        raise ValueError("points must match the cone dimension")
    d = v - u
    if not cone.contains(d):
        return "unrelated"
    if cone.interior(d):
        return "strong"
    if np.any(d != 0):
        return "strict"
    return "leq"


def dual_generators(cone: OrthantCone) -> np.ndarray:
    """Rows ``s_i e_i``; row ``i`` applied to ``v`` gives ``s_i v_i``."""
    return np.diag(cone.s)


@dataclass
class KamkeReport:
    points: np.ndarray
    off_diagonal: np.ndarray
    violations: list[dict] = field(default_factory=list)
    strict: bool = False
    signature: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def min_off_diagonal(self) -> float:
        if self.off_diagonal.size == 0:
            return np.inf
        mask = ~np.eye(self.off_diagonal.shape[1], dtype=bool)
        return float(np.min(self.off_diagonal[:, mask])) if mask.any() else np.inf


def kamke_check(field, samples, cone: OrthantCone, strict: bool = False) -> KamkeReport:
    """Sign test on off-diagonal entries of ``diag(s) J diag(s)`` at each sample.

    Every off-diagonal entry must be ``>= 0`` (``> 0`` when ``strict``).
    """
    field = as_field(field)
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    S = np.diag(cone.s)
    conj = np.empty((len(pts), cone.dim, cone.dim))
    violations = []
    for k, p in enumerate(pts):
        J = field.jacobian(p)
        if not np.all(np.isfinite(J)):
            raise EvaluationError(f"non-finite Jacobian at {p.tolist()}")
        Jt = S @ J @ S
        conj[k] = Jt
        for i in range(cone.dim):
            for j in range(cone.dim):
                if i == j:
                    continue
                val = float(Jt[i, j])
                if val < 0 or (strict and val <= 0):
                    violations.append({"index": k, "point": p.tolist(), "entry": [i, j], "value": val})
    return KamkeReport(pts, conj, violations, strict, cone.signature)


@dataclass
class EpdReport:
    t_grid: list[float]
    # min over samples of s_i s_j (D phi_t)_ij, shape (len(t_grid), N, N)
    min_values: np.ndarray
    # per-sample minimum over (i, j), shape (n_samples, len(t_grid))
    sample_min: np.ndarray
    t0: float | None
    achieved: bool
    margin: float | None
    excluded: list[int] = field(default_factory=list)
    n_samples: int = 0


def eventually_positive_derivatives(field, cone: OrthantCone, samples, t_grid: Sequence[float] = (0.5, 1, 2, 5, 10),
                                    cfg: IntegratorConfig | None = None, domain=None) -> EpdReport:
    """Evaluate ``lambda_i(D phi_t(z) g_j)`` on a time grid for every sample ``z``.

    ``t0`` is the earliest grid time from which every value at every later grid
    time is positive (``> 1e-12``).  Samples whose trajectory leaves
    ``domain`` or fails to integrate are excluded and listed.
    """
    field = as_field(field)
    cfg = cfg or IntegratorConfig()
    t_grid = [float(t) for t in t_grid]
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    S = np.diag(cone.s)
    vals = []
    kept = []
    excluded = []
    for k, z in enumerate(pts):
        traj, mats = integrate_variational(field, z, (0.0, t_grid[-1]), cfg, t_eval=t_grid, domain=domain)
        if traj.status != "completed" or len(traj.times) != len(t_grid):
            excluded.append(k)
            continue
        vals.append(np.einsum("ab,tbc,cd->tad", S, mats, S))
        kept.append(k)
    N = cone.dim
    if not vals:
        return EpdReport(t_grid, np.full((len(t_grid), N, N), np.nan), np.empty((0, len(t_grid))), None, False,
                         None, excluded, len(pts))
    vals = np.asarray(vals)
    min_values = vals.min(axis=0)
    sample_min = vals.reshape(len(vals), len(t_grid), -1).min(axis=2)
    positive = np.all(sample_min > INTERIOR_TOL, axis=0)
    t0 = None
    for i in range(len(t_grid)):
        if np.all(positive[i:]):
            t0 = t_grid[i]
            break
    margin = float(sample_min[:, t_grid.index(t0):].min()) if t0 is not None else None
    return EpdReport(t_grid, min_values, sample_min, t0, t0 is not None, margin, excluded, len(pts))


def monotone_order_preservation_test(field, cone: OrthantCone, pairs, t: float, strong: bool = True,
                                     cfg: IntegratorConfig | None = None) -> np.ndarray:
    """For each ordered pair ``u <= v``, check ``phi_t(u) <= phi_t(v)`` (``<<`` when ``strong``).

    At ``t = 0`` the flow is the identity and only the weak order is checked.
    """
    field = as_field(field)
    cfg = cfg or IntegratorConfig()
    out = []
    for u, v in pairs:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if cone_leq(cone, u, v) == "unrelated":
            raise ValueError(f"pair is not ordered: {u.tolist()} vs {v.tolist()}")
        if t == 0:
            out.append(True)
            continue
        pu = integrate(field, u, (0.0, t), cfg).final
        pv = integrate(field, v, (0.0, t), cfg).final
        rel = cone_leq(cone, pu, pv)
        out.append(rel == "strong" if strong else rel != "unrelated")
    return np.asarray(out, dtype=bool)


def perturbed_field(field, delta: float, seed: int = 0, dim: int | None = None) -> VectorField:
    """``F(z) + delta * sin(W z + b)`` with fixed random ``W, b``; a small smooth perturbation."""
    field = as_field(field)
    N = dim or field.dim
    if N is None:
        raise ValueError("perturbed_field needs the field dimension")
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(N, N))
    b = rng.uniform(0, 2 * np.pi, N)

    def rhs(z):
        return field.rhs(z) + delta * np.sin(W @ z + b)

    return VectorField(rhs, None, N, f"{field.name} + perturbation")
