"""Where do trajectories of the dual futile cycle end up?

Draw initial states uniformly from the invariant polytope D_eps, integrate
each one, and record which equilibrium it reaches.  For the symmetric
all-ones rates there is one equilibrium; the bistable set splits the samples
between two stable states, with the saddle's stable manifold as the divide.
"""

from __future__ import annotations

import json
from importlib import resources

from slowfast.analysis import convergence_census
from slowfast.models.futile import BISTABLE, FutileCycleParams, futile_cycle_scaled

EPS = 1e-3
N = 200

for name, p in (("all-ones", FutileCycleParams()), ("bistable", BISTABLE)):
    sys, dom = futile_cycle_scaled(p.with_eps(EPS))
    rep = convergence_census(sys, dom, EPS, N, horizon=200.0, seed=7, x_box=([0, 0], [1, 1]))
    print(f"\n{name}: {rep.n_converged}/{rep.n_samples} converged "
          f"(acceptance rate of the rejection sampler {rep.acceptance_rate:.3f})")
    for eq, count in zip(rep.equilibria, rep.tallies):
        x = eq.location[:2]
        print(f"   x = ({x[0]:.4f}, {x[1]:.4f})  {eq.classification:<12} {count:4d} samples")

doc = json.loads(resources.files("slowfast.data").joinpath("bistable.json").read_text())
print("\nbistable parameters:", json.dumps(doc["params"]))
