"""Planar slow–fast family whose origin loses stability once ``eps > 1``.

    dx/dt = gamma(y1) - beta(x),    eps dy1/dt = -d1 y1 - alpha1(x)

with ``beta(x) = x**3/3 - x``, ``alpha1(x) = 2 tanh(x)``, ``gamma(y1) = y1`` and
``d1 = 1``.  The box ``{|x| <= a, |y1| <= b1}`` is forward invariant once
``b1 > sup|alpha1| / d1`` and ``beta(a) > max_{|y1| <= b1} gamma(y1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..core import EpsPolytope, ParameterSet, SlowFastSystem
from ..errors import InvalidParameterError

__all__ = ["CounterexampleParams", "counterexample_system", "counterexample_jacobian_origin",
           "beta", "alpha1", "gamma", "reduced_scalar_equation"]

D1 = 1.0
M1 = 2.0  # sup |alpha1|


def beta(x):
    return x ** 3 / 3.0 - x


def alpha1(x):
    return 2.0 * np.tanh(x)


def gamma(y1):
    return y1


def reduced_scalar_equation(x):
    """``gamma(-alpha1(x)/d1) - beta(x)``, whose roots are the equilibrium ``x`` values.

    Substituting the fast root ``y1 = -alpha1(x)/d1`` carries the minus sign;
    dropping it (``2 tanh x = x**3/3 - x``) would add two spurious roots near
    ``x = +-2.35``.
    """
    return gamma(-alpha1(x) / D1) - beta(x)


def _default_b1() -> float:
    return M1 / D1 + 1.0


def _default_a(b1: float) -> float:
    N_b = b1  # max of gamma(y1) = y1 over |y1| <= b1
    return float(brentq(lambda a: beta(a) - (N_b + 1.0), np.sqrt(3.0), 100.0, xtol=1e-14))


@dataclass(frozen=True)
class CounterexampleParams:
    eps: float = 2.0
    b1: float = field(default_factory=_default_b1)
    a: float | None = None

    def __post_init__(self):
        if self.a is None:
            object.__setattr__(self, "a", _default_a(self.b1))
        ParameterSet({"eps": self.eps, "b1": self.b1, "a": self.a},
                     {"eps": (0.0, True), "b1": (M1 / D1, True), "a": (0.0, True)})
        if not beta(self.a) > self.N_b:
            raise InvalidParameterError(f"need beta(a) > N_b = {self.N_b}, got beta({self.a}) = {beta(self.a)}")

    @property
    def N_b(self) -> float:
        return float(self.b1)

    def as_dict(self) -> dict[str, float]:
        return {"eps": float(self.eps), "b1": float(self.b1), "a": float(self.a)}


def counterexample_system(cp: CounterexampleParams) -> tuple[SlowFastSystem, EpsPolytope]:
    """The system with ``n = m = 1`` and its box domain (constant in ``eps``)."""

    def f0(x, y, eps):
        return np.array([gamma(y[0]) - beta(x[0])])

    def g0(x, y, eps):
        return np.array([-D1 * y[0] - alpha1(x[0])])

    def jac_pair(x, y, eps):
        return np.array([[-(x[0] ** 2 - 1.0), 1.0],
                         [-2.0 / np.cosh(x[0]) ** 2, -D1]])

    sys = SlowFastSystem(
        n=1, m=1, f0=f0, g0=g0,
        m0=lambda x: np.array([-alpha1(np.asarray(x, dtype=float)[0]) / D1]),
        jac_y_g0=lambda x, y, eps: np.array([[-D1]]),
        params=ParameterSet(cp.as_dict()),
        jac_pair=jac_pair, name="counterexample",
    )
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.array([cp.a, cp.a, cp.b1, cp.b1])
    dom = EpsPolytope(A, b, np.zeros(4), np.inf, ("x <= a", "-x <= a", "y1 <= b1", "-y1 <= b1"))
    return sys, dom


def counterexample_jacobian_origin(eps: float) -> tuple[np.ndarray, tuple[float, float]]:
    """Slow-time Jacobian ``[[1, 1], [-2/eps, -1/eps]]`` at the origin with its trace and determinant."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    J = np.array([[1.0, 1.0], [-2.0 / eps, -1.0 / eps]])
    return J, (1.0 - 1.0 / eps, 1.0 / eps)
