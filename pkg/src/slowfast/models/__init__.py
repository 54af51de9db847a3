"""Built-in models and a small registry keyed by the names used on the command line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import EpsPolytope, Polytope, SlowFastSystem, VectorField, load_parameter_document
from ..errors import InvalidParameterError
from .counterexample import CounterexampleParams, counterexample_system
from .futile import (
    BISTABLE,
    PARAM_NAMES,
    FutileCycleParams,
    K0_polytope,
    futile_cycle_mass_action,
    futile_cycle_scaled,
    reduced_futile_cycle,
)

__all__ = ["MODEL_KEYS", "PARAMETER_NAMES", "ModelInstance", "build_model", "default_parameters",
           "load_model_document", "BISTABLE", "FutileCycleParams", "CounterexampleParams"]

MODEL_KEYS = ("futile-cycle", "futile-cycle-reduced", "futile-cycle-mass-action", "counterexample")

PARAMETER_NAMES: dict[str, tuple[str, ...]] = {
    "futile-cycle": PARAM_NAMES,
    "futile-cycle-reduced": PARAM_NAMES,
    "futile-cycle-mass-action": PARAM_NAMES,
    "counterexample": ("b1", "a"),
}


@dataclass(frozen=True)
class ModelInstance:
    """A model ready to integrate.

    ``field`` is the flat vector field used for plain simulation (slow time
    for slow–fast systems).  ``system`` and ``domain`` are set only for
    slow–fast models; ``box`` bounds the slow variables for equilibrium scans.
    """

    key: str
    params: object
    eps: float | None
    field: VectorField
    system: SlowFastSystem | None
    domain: EpsPolytope | None
    region: Polytope | None
    box: tuple[np.ndarray, np.ndarray]

    @property
    def n_slow(self) -> int:
        return self.system.n if self.system is not None else int(self.field.dim)


def default_parameters(key: str) -> dict[str, float]:
    """Default parameter values for ``key``; the futile cycle defaults to all rates 1."""
    if key not in MODEL_KEYS:
        raise InvalidParameterError(f"unknown model {key!r}; expected one of {list(MODEL_KEYS)}")
    if key == "counterexample":
        d = CounterexampleParams().as_dict()
        d.pop("eps")
        return d
    return FutileCycleParams().as_dict()


def build_model(key: str, params: dict | None = None, eps: float | None = None) -> ModelInstance:
    """Construct a registered model.

    For the futile-cycle family ``eps`` overrides ``E_tot/S_tot`` (keeping
    ``c``) and must lie in ``(0, eps0]``.  The counterexample defaults to
    ``eps = 2``.
    """
    if key not in MODEL_KEYS:
        raise InvalidParameterError(f"unknown model {key!r}; expected one of {list(MODEL_KEYS)}")
    params = dict(params or {})
    unknown = set(params) - set(PARAMETER_NAMES[key])
    if unknown:
        raise InvalidParameterError(f"unknown parameters for {key}: {sorted(unknown)}")
    if eps is not None and not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")

    if key == "counterexample":
        cp = CounterexampleParams(eps=2.0 if eps is None else float(eps), **params)
        sys, dom = counterexample_system(cp)
        return ModelInstance(key, cp, cp.eps, sys.slow_time_field(cp.eps), sys, dom, dom.at(cp.eps),
                             (np.array([-cp.a]), np.array([cp.a])))

    p = FutileCycleParams.from_mapping(params)
    if eps is not None:
        if eps > p.eps0:
            raise InvalidParameterError(f"eps={eps} exceeds eps0 = 1/(1+c) = {p.eps0:.6g}")
        p = p.with_eps(float(eps))
    elif p.eps > p.eps0:
        raise InvalidParameterError(f"E_tot/S_tot = {p.eps:.6g} exceeds eps0 = {p.eps0:.6g}")
    box = (np.zeros(2), np.ones(2))
    if key == "futile-cycle":
        sys, dom = futile_cycle_scaled(p)
        return ModelInstance(key, p, p.eps, sys.slow_time_field(p.eps), sys, dom, dom.at(p.eps), box)
    if key == "futile-cycle-reduced":
        return ModelInstance(key, p, None, reduced_futile_cycle(p), None, None, K0_polytope(), box)
    ma = futile_cycle_mass_action(p)
    return ModelInstance(key, p, p.eps, ma.field6(), None, None, None, box)


def load_model_document(source) -> tuple[str, dict, float | None]:
    """Read a ``{"model", "params", "eps"}`` document; returns ``(key, params, eps)``."""
    doc = load_parameter_document(source, PARAMETER_NAMES)
    return doc["model"], doc["params"], doc["eps"]
