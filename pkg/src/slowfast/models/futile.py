"""Dual futile cycle: mass-action form, slow–fast scaling and its reduction.

Species order for the six-state mass-action form is
``([S0], [S2], [C1], [C2], [C4], [C3])``.  The nine-species form keeps every
species, ordered ``(S0, S1, S2, E, F, C1, C2, C3, C4)``.

The scaled slow–fast state is ``(x1, x2, y1, y2, y3, y4)`` with
``x = ([S0], [S2]) / L``, ``y = ([C1], [C2]) / E_tot`` and
``(y3, y4) = ([C4], [C3]) / F_tot``.  ``L`` is the substrate scale: ``S_tot``
for the standard scaling and ``S_tot + K_m1 + K_m2 + K_m3 + K_m4`` for the
alternative one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from importlib import resources

import numpy as np

from ..core import EpsPolytope, ParameterSet, Polytope, SlowDomain, SlowFastSystem, VectorField, sample_domain
from ..errors import DomainError, InvalidStateError

RATE_NAMES = ("k1", "k_m1", "k2", "k3", "k_m3", "k4", "h1", "h_m1", "h2", "h3", "h_m3", "h4")
TOTAL_NAMES = ("S_tot", "E_tot", "F_tot")
PARAM_NAMES = RATE_NAMES + TOTAL_NAMES


@dataclass(frozen=True)
class FutileCycleParams:
    """Twelve rate constants and three totals, all strictly positive."""

    k1: float = 1.0
    k_m1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    k_m3: float = 1.0
    k4: float = 1.0
    h1: float = 1.0
    h_m1: float = 1.0
    h2: float = 1.0
    h3: float = 1.0
    h_m3: float = 1.0
    h4: float = 1.0
    S_tot: float = 1.0
    E_tot: float = 0.01
    F_tot: float = 0.01

    def __post_init__(self):
        # raises InvalidParameterError on any non-positive entry
        ParameterSet(self.as_dict(), {k: (0.0, True) for k in PARAM_NAMES})

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def parameter_set(self) -> ParameterSet:
        return ParameterSet(self.as_dict(), {k: (0.0, True) for k in PARAM_NAMES})

    @property
    def eps(self) -> float:
        return self.E_tot / self.S_tot

    @property
    def c(self) -> float:
        return self.F_tot / self.E_tot

    @property
    def eps0(self) -> float:
        return 1.0 / (1.0 + self.c)

    @property
    def Km(self) -> tuple[float, float, float, float]:
        return (
            (self.k_m1 + self.k2) / self.k1,
            (self.k_m3 + self.k4) / self.k3,
            (self.h_m1 + self.h2) / self.h1,
            (self.h_m3 + self.h4) / self.h3,
        )

    def with_eps(self, eps: float) -> "FutileCycleParams":
        """Same rates, ``S_tot`` and ``c`` with ``E_tot = eps * S_tot``."""
        c = self.c
        return replace(self, E_tot=eps * self.S_tot, F_tot=c * eps * self.S_tot)

    @classmethod
    def from_mapping(cls, values, eps: float | None = None) -> "FutileCycleParams":
        p = cls(**{k: float(v) for k, v in dict(values).items()})
        return p.with_eps(eps) if eps is not None else p


def _load_bistable() -> FutileCycleParams:
    doc = json.loads(resources.files("slowfast.data").joinpath("bistable.json").read_text())
    return FutileCycleParams.from_mapping(doc["params"], doc.get("eps"))


# Three equilibria of the reduced planar system (two stable, one saddle); found
# by a randomized nullcline search, see demos/locate_bistable.py.
BISTABLE = _load_bistable()


@dataclass(frozen=True)
class DerivedConstants:
    K_m1: float
    K_m2: float
    K_m3: float
    K_m4: float
    sigma0: float
    sigma: float
    mu: float
    eps0: float
    mu_grid: int = 50


def _scaled_fields(p: FutileCycleParams, L: float):
    """``f0, g0, jac_pair`` for substrate scale ``L``."""
    k1, km1, k2, k3, km3, k4 = p.k1, p.k_m1, p.k2, p.k3, p.k_m3, p.k4
    h1, hm1, h2, h3, hm3, h4 = p.h1, p.h_m1, p.h2, p.h3, p.h_m3, p.h4
    c = p.c
    s = p.S_tot / L

    def free(x, y, eps):
        w = s - x[0] - x[1] - eps * (y[0] + y[1] + c * y[2] + c * y[3])
        return w, 1.0 - y[0] - y[1], 1.0 - y[2] - y[3]

    def f0(x, y, eps):
        _, e, f = free(x, y, eps)
        return np.array([
            -k1 * L * x[0] * e + km1 * y[0] + h4 * c * y[2],
            -h1 * L * c * x[1] * f + hm1 * c * y[3] + k4 * y[1],
        ])

    def g0(x, y, eps):
        w, e, f = free(x, y, eps)
        return np.array([
            k1 * L * x[0] * e - (km1 + k2) * y[0],
            k3 * L * w * e - (km3 + k4) * y[1],
            h3 * L * w * f - (hm3 + h4) * y[2],
            h1 * L * x[1] * f - (hm1 + h2) * y[3],
        ])

    def jac_pair(x, y, eps):
        w, e, f = free(x, y, eps)
        J = np.zeros((6, 6))
        # f0_1
        J[0, 0] = -k1 * L * e
        J[0, 2] = k1 * L * x[0] + km1
        J[0, 3] = k1 * L * x[0]
        J[0, 4] = h4 * c
        # f0_2
        J[1, 1] = -h1 * L * c * f
        J[1, 3] = k4
        J[1, 4] = h1 * L * c * x[1]
        J[1, 5] = h1 * L * c * x[1] + hm1 * c
        # g0_1
        J[2, 0] = k1 * L * e
        J[2, 2] = -k1 * L * x[0] - (km1 + k2)
        J[2, 3] = -k1 * L * x[0]
        # g0_2
        J[3, 0] = J[3, 1] = -k3 * L * e
        J[3, 2] = -k3 * L * (eps * e + w)
        J[3, 3] = J[3, 2] - (km3 + k4)
        J[3, 4] = J[3, 5] = -k3 * L * eps * c * e
        # g0_3
        J[4, 0] = J[4, 1] = -h3 * L * f
        J[4, 2] = J[4, 3] = -h3 * L * eps * f
        J[4, 5] = -h3 * L * (eps * c * f + w)
        J[4, 4] = J[4, 5] - (hm3 + h4)
        # g0_4
        J[5, 1] = h1 * L * f
        J[5, 4] = -h1 * L * x[1]
        J[5, 5] = -h1 * L * x[1] - (hm1 + h2)
        return J

    def jac_y_g0(x, y, eps):
        return jac_pair(x, y, eps)[2:, 2:]

    return f0, g0, jac_pair, jac_y_g0


def _m0_closed_form(p: FutileCycleParams, L: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    K1, K2, K3, K4 = p.Km
    w = p.S_tot / L - x[0] - x[1]
    d1 = K1 / L + K1 * w / K2 + x[0]
    d2 = K3 / L + K3 * w / K4 + x[1]
    if not (d1 > 0 and d2 > 0):
        raise DomainError(f"x={x.tolist()} lies outside the region where m0 is defined")
    return np.array([x[0] / d1, K1 * w / K2 / d1, K3 * w / K4 / d2, x[1] / d2])


def futile_cycle_m0(params: FutileCycleParams, x) -> np.ndarray:
    """Closed-form critical manifold ``(y1, y2, y3, y4)`` at slow point ``x``."""
    return _m0_closed_form(params, params.S_tot, x)


def _domain(p: FutileCycleParams, L: float) -> EpsPolytope:
    c = p.c
    s = p.S_tot / L
    rows, b0, labels = [], [], []
    eps_rows = []

    def add(a, b, label, a_eps=None):
        rows.append(a)
        b0.append(b)
        labels.append(label)
        eps_rows.append(a_eps if a_eps is not None else [0.0] * 6)

    for i, name in enumerate(("x1", "x2", "y1", "y2", "y3", "y4")):
        a = [0.0] * 6
        a[i] = -1.0
        add(a, 0.0, f"{name} >= 0")
    add([0, 0, 1, 1, 0, 0], 1.0, "y1 + y2 <= 1")
    add([0, 0, -1, -1, 0, 0], 0.0, "y1 + y2 >= 0")
    add([0, 0, 0, 0, 1, 1], 1.0, "y3 + y4 <= 1")
    add([0, 0, 0, 0, -1, -1], 0.0, "y3 + y4 >= 0")
    add([1, 1, 0, 0, 0, 0], s, "x1 + x2 + eps*(y1 + y2 + c*y3 + c*y4) <= S_tot/L", [0, 0, 1, 1, c, c])
    add([-1, -1, 0, 0, 0, 0], 0.0, "x1 + x2 + eps*(...) >= 0", [0, 0, -1, -1, -c, -c])
    return EpsPolytope(np.array(rows, dtype=float), np.array(b0), np.zeros(len(b0)), p.eps0,
                       tuple(labels), A1=np.array(eps_rows, dtype=float))


def _build_system(p: FutileCycleParams, L: float, name: str):
    f0, g0, jac_pair, jac_y_g0 = _scaled_fields(p, L)
    sys = SlowFastSystem(
        n=2, m=4, f0=f0, g0=g0,
        m0=lambda x: _m0_closed_form(p, L, x),
        jac_y_g0=jac_y_g0, params=p.parameter_set(), jac_pair=jac_pair, name=name,
    )
    return sys, _domain(p, L)


def futile_cycle_scaled(params: FutileCycleParams) -> tuple[SlowFastSystem, EpsPolytope]:
    """Slow–fast form with ``x = [S]/S_tot`` and ``t = eps * tau``, plus ``D_eps``.

    ``D_eps`` carries the conservation constraints and, in addition, the
    nonnegativity of every scaled concentration.
    """
    return _build_system(params, params.S_tot, "futile-cycle")


def alternative_scaling(params: FutileCycleParams):
    """Rescale with ``A = S_tot + K_m1 + K_m2 + K_m3 + K_m4``.

    Returns ``(eps_prime, system, domain)`` where ``eps_prime = E_tot / A`` and
    the system uses ``x = [S]/A``, ``t = eps_prime * tau``.
    """
    A = params.S_tot + sum(params.Km)
    sys, dom = _build_system(params, A, "futile-cycle-alt")
    return params.E_tot / A, sys, dom


def substrate_scale(params: FutileCycleParams, alternative: bool = False) -> float:
    return params.S_tot + sum(params.Km) if alternative else params.S_tot


def reduced_futile_cycle(params: FutileCycleParams) -> VectorField:
    """Planar limit ``x' = (F1, F2)`` obtained by substituting the critical manifold."""
    p = params
    k2, k4, h2, h4, c = p.k2, p.k4, p.h2, p.h4, p.c

    def rhs(x):
        y = _m0_closed_form(p, p.S_tot, x)
        return np.array([-k2 * y[0] + h4 * c * y[2], -h2 * c * y[3] + k4 * y[1]])

    return VectorField(rhs, None, 2, "futile-cycle-reduced")


def K0_polytope(params: FutileCycleParams | None = None) -> Polytope:
    """``K0 = {x1 >= 0, x2 >= 0, x1 + x2 <= 1}``."""
    return Polytope(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]), np.array([0.0, 0.0, 1.0]),
                    ("x1 >= 0", "x2 >= 0", "x1 + x2 <= 1"))


def sigma_bounds(params: FutileCycleParams) -> dict[str, float]:
    """The five terms whose minimum is the margin ``sigma``."""
    p = params
    K1, K2, K3, K4 = p.Km
    S = p.S_tot
    a1, a2 = p.k_m1 + p.k2, p.k_m3 + p.k4
    b1, b2 = p.h_m1 + p.h2, p.h_m3 + p.h4
    sigma0 = min(K1 * K2 / (S * (K1 + K2)), K3 * K4 / (S * (K3 + K4)))
    return {
        "sigma0": sigma0,
        "trace_B1": (a1 + a2) / (S * (p.k1 + p.k3)),
        "det_B1": a1 * a2 / (S * (p.k1 * a2 + p.k3 * a1)),
        "trace_B2": (b1 + b2) / (S * (p.h1 + p.h3)),
        "det_B2": b1 * b2 / (S * (p.h1 * b2 + p.h3 * b1)),
    }


def slow_domain(params: FutileCycleParams) -> SlowDomain:
    """``U = {x1 > -sigma, x2 > -sigma, x1 + x2 < 1 + sigma}`` and a fast box ``V``.

    ``V`` is the range of ``m0`` over a 50 x 50 grid of ``K`` joined with the
    physical box ``[0, 1]^4``, widened by 10%.
    """
    sigma = min(sigma_bounds(params).values())
    A = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    b = np.array([sigma, sigma, 1.0 + sigma])
    K = Polytope(A, np.array([sigma / 2, sigma / 2, 1.0 + sigma / 2]))
    ys = np.array([futile_cycle_m0(params, x) for x in grid_in(K, 50)])
    lo, hi = SlowDomain.padded_box(np.minimum(ys.min(axis=0), 0.0), np.maximum(ys.max(axis=0), 1.0))
    return SlowDomain(A, b, sigma, lo, hi)


def K_polytope(params: FutileCycleParams) -> Polytope:
    """Compact ``K`` with ``K0 ⊂ K ⊂ U``: ``U`` closed and pulled in by ``sigma/2``."""
    sigma = min(sigma_bounds(params).values())
    return Polytope(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
                    np.array([sigma / 2, sigma / 2, 1.0 + sigma / 2]))


def grid_in(poly: Polytope, n: int) -> np.ndarray:
    """``n x n`` tensor grid over the polytope's bounding box, filtered to the polytope."""
    lo, hi = poly.bounding_box()
    g1 = np.linspace(lo[0], hi[0], n)
    g2 = np.linspace(lo[1], hi[1], n)
    pts = np.array([(a, b) for a in g1 for b in g2])
    keep = np.min(poly.b[None, :] - pts @ poly.A.T, axis=1) >= -1e-12
    return pts[keep]


@dataclass(frozen=True)
class HurwitzResult:
    B1: np.ndarray
    B2: np.ndarray
    hurwitz: bool
    margins: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: np.ndarray

    @property
    def eig_hurwitz(self) -> bool:
        return bool(np.all(self.eigenvalues.real < 0))


def hurwitz_blocks(params: FutileCycleParams, x) -> HurwitzResult:
    """Diagonal blocks of ``B(x) = D_y g0(x, m0(x), 0)`` and the trace/determinant verdict."""
    p = params
    S = p.S_tot
    x1, x2 = float(x[0]), float(x[1])
    w = 1.0 - x1 - x2
    B1 = np.array([
        [-p.k1 * S * x1 - (p.k_m1 + p.k2), -p.k1 * S * x1],
        [-p.k3 * S * w, -p.k3 * S * w - (p.k_m3 + p.k4)],
    ])
    B2 = np.array([
        [-p.h3 * S * w - (p.h_m3 + p.h4), -p.h3 * S * w],
        [-p.h1 * S * x2, -p.h1 * S * x2 - (p.h_m1 + p.h2)],
    ])
    m1 = (-np.trace(B1), np.linalg.det(B1))
    m2 = (-np.trace(B2), np.linalg.det(B2))
    ok = m1[0] > 0 and m1[1] > 0 and m2[0] > 0 and m2[1] > 0
    eig = np.concatenate([np.linalg.eigvals(B1), np.linalg.eigvals(B2)])
    return HurwitzResult(B1, B2, bool(ok), (m1, m2), eig)


def derived_constants(params: FutileCycleParams, mu_grid: int = 50) -> DerivedConstants:
    """Michaelis constants, the margins ``sigma <= sigma0``, ``eps0`` and a grid estimate of ``mu``."""
    K1, K2, K3, K4 = params.Km
    bounds = sigma_bounds(params)
    sigma = min(bounds.values())
    mu = np.inf
    for x in grid_in(K_polytope(params), mu_grid):
        eig = hurwitz_blocks(params, x).eigenvalues
        mu = min(mu, abs(float(np.max(eig.real))))
    return DerivedConstants(K1, K2, K3, K4, bounds["sigma0"], sigma, float(mu), params.eps0, mu_grid)


@dataclass(frozen=True)
class MassActionFutileCycle:
    """Mass-action kinetics in ``tau`` on the six- and nine-species forms."""

    params: FutileCycleParams

    def species_from6(self, z6) -> np.ndarray:
        """``(S0, S1, S2, E, F, C1, C2, C3, C4)`` from the six-state vector."""
        p = self.params
        S0, S2, C1, C2, C4, C3 = np.asarray(z6, dtype=float)
        S1 = p.S_tot - S0 - S2 - C1 - C2 - C4 - C3
        E = p.E_tot - C1 - C2
        F = p.F_tot - C4 - C3
        return np.array([S0, S1, S2, E, F, C1, C2, C3, C4])

    @staticmethod
    def six_from_species(z9) -> np.ndarray:
        S0, S1, S2, E, F, C1, C2, C3, C4 = np.asarray(z9, dtype=float)
        return np.array([S0, S2, C1, C2, C4, C3])

    def check_state(self, z6, tol: float = 1e-12) -> None:
        sp = self.species_from6(z6)
        if np.any(sp < -tol * max(self.params.S_tot, 1.0)):
            raise InvalidStateError(f"state violates the conservation totals: species {sp.tolist()}")

    def rhs9(self, z9) -> np.ndarray:
        p = self.params
        S0, S1, S2, E, F, C1, C2, C3, C4 = z9
        r1 = p.k1 * S0 * E - p.k_m1 * C1
        r2 = p.k2 * C1
        r3 = p.k3 * S1 * E - p.k_m3 * C2
        r4 = p.k4 * C2
        q1 = p.h1 * S2 * F - p.h_m1 * C3
        q2 = p.h2 * C3
        q3 = p.h3 * S1 * F - p.h_m3 * C4
        q4 = p.h4 * C4
        return np.array([
            -r1 + q4,                 # S0
            r2 - r3 + q2 - q3,        # S1
            r4 - q1,                  # S2
            -r1 + r2 - r3 + r4,       # E
            -q1 + q2 - q3 + q4,       # F
            r1 - r2,                  # C1
            r3 - r4,                  # C2
            q1 - q2,                  # C3
            q3 - q4,                  # C4
        ])

    def rhs6(self, z6) -> np.ndarray:
        p = self.params
        S0, S1, S2, E, F, C1, C2, C3, C4 = self.species_from6(z6)
        return np.array([
            p.h4 * C4 - p.k1 * S0 * E + p.k_m1 * C1,
            p.k4 * C2 - p.h1 * S2 * F + p.h_m1 * C3,
            p.k1 * S0 * E - (p.k_m1 + p.k2) * C1,
            p.k3 * S1 * E - (p.k_m3 + p.k4) * C2,
            p.h3 * S1 * F - (p.h_m3 + p.h4) * C4,
            p.h1 * S2 * F - (p.h_m1 + p.h2) * C3,
        ])

    @staticmethod
    def totals(z9) -> np.ndarray:
        """``(S_tot, E_tot, F_tot)`` evaluated on a nine-species state."""
        S0, S1, S2, E, F, C1, C2, C3, C4 = np.asarray(z9, dtype=float)
        return np.array([S0 + S1 + S2 + C1 + C2 + C3 + C4, E + C1 + C2, F + C3 + C4])

    def field6(self) -> VectorField:
        return VectorField(self.rhs6, None, 6, "futile-cycle-mass-action")

    def field9(self) -> VectorField:
        return VectorField(self.rhs9, None, 9, "futile-cycle-mass-action-9")

    def to_scaled(self, z6, L: float | None = None) -> np.ndarray:
        """Six-state concentrations to ``(x1, x2, y1..y4)`` with substrate scale ``L``."""
        p = self.params
        L = p.S_tot if L is None else L
        S0, S2, C1, C2, C4, C3 = np.asarray(z6, dtype=float)
        return np.array([S0 / L, S2 / L, C1 / p.E_tot, C2 / p.E_tot, C4 / p.F_tot, C3 / p.F_tot])

    def from_scaled(self, v, L: float | None = None) -> np.ndarray:
        p = self.params
        L = p.S_tot if L is None else L
        x1, x2, y1, y2, y3, y4 = np.asarray(v, dtype=float)
        return np.array([x1 * L, x2 * L, y1 * p.E_tot, y2 * p.E_tot, y3 * p.F_tot, y4 * p.F_tot])


def futile_cycle_mass_action(params: FutileCycleParams) -> MassActionFutileCycle:
    return MassActionFutileCycle(params)


__all__ = [
    "FutileCycleParams", "DerivedConstants", "HurwitzResult", "MassActionFutileCycle", "BISTABLE",
    "futile_cycle_mass_action", "futile_cycle_scaled", "futile_cycle_m0", "reduced_futile_cycle",
    "derived_constants", "hurwitz_blocks", "alternative_scaling", "sigma_bounds", "slow_domain",
    "K0_polytope", "K_polytope", "grid_in", "sample_domain", "substrate_scale", "PARAM_NAMES",
]
