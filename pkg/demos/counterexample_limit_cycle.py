"""Why the perturbation parameter has to be small.

The planar family with slow x and fast y1 has a single equilibrium at the
origin.  Its Jacobian there has trace 1 - 1/eps, so the origin repels once
eps > 1 and, since the box is forward invariant, trajectories settle on a
periodic orbit.  For small eps the same system converges to the origin from
everywhere in the box.
"""

from __future__ import annotations

import numpy as np

from slowfast.analysis import Equilibrium, classify, detect_limit_cycle
from slowfast.integrate import EventSpec
from slowfast.models.counterexample import (
    CounterexampleParams,
    counterexample_jacobian_origin,
    counterexample_system,
)

print("eps     trace     det    label at the origin")
for eps in (0.1, 0.5, 0.9, 0.99, 1.01, 1.1, 2.0):
    sys, _ = counterexample_system(CounterexampleParams(eps=eps))
    eq = classify(sys.slow_time_field(eps), Equilibrium(np.zeros(2), 0.0))
    _, (tr, det) = counterexample_jacobian_origin(eps)
    print(f"{eps:<6}  {tr:+.4f}  {det:.4f}  {eq.classification}")

# Poincare section {x = 0}, crossed upward
section = EventSpec(lambda z: z[0], "up")
origin = [np.zeros(2)]
for eps in (0.1, 2.0):
    sys, box = counterexample_system(CounterexampleParams(eps=eps))
    rep = detect_limit_cycle(sys.slow_time_field(eps), [0.5, 0.5], section, equilibria=origin)
    print(f"\neps = {eps}: {rep.verdict}")
    if rep.verdict == "cycle-found":
        print(f"  period    {rep.period:.6f}")
        print(f"  amplitude {rep.amplitude:.6f}")
        print(f"  crossing  y1 = {rep.fixed_point[1]:.8f}  (spread of last five: {rep.tail_spread:.1e})")
    else:
        print(f"  {rep.message}")
