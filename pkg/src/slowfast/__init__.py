"""Numerical toolkit for singularly perturbed slow–fast ODEs with monotone reduced dynamics."""

from .core import (
    EpsPolytope,
    ParameterSet,
    Polytope,
    SlowFastSystem,
    State,
    VectorField,
    domain_contains,
    eval_fast_time,
    eval_slow_time,
    from_deviation,
    to_deviation,
)
from .integrate import EventSpec, IntegratorConfig, Trajectory, integrate, integrate_with_events

__all__ = [
    "EpsPolytope",
    "EventSpec",
    "IntegratorConfig",
    "ParameterSet",
    "Polytope",
    "SlowFastSystem",
    "State",
    "Trajectory",
    "VectorField",
    "domain_contains",
    "eval_fast_time",
    "eval_slow_time",
    "from_deviation",
    "integrate",
    "integrate_with_events",
    "to_deviation",
]
