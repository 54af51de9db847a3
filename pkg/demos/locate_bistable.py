"""Search random rate constants for a bistable reduced futile cycle.

The reduced planar flow on K0 = {x1, x2 >= 0, x1 + x2 <= 1} has one or three
equilibria depending on the rates.  This script draws log-uniform rate
constants, counts nullcline intersections on a coarse grid, and confirms the
promising draws on a finer grid with Newton refinement.  The set shipped in
``slowfast/data/bistable.json`` came out of a run of this search and was then
rounded to three significant figures.

    python3 demos/locate_bistable.py --trials 500 --seed 1
"""

from __future__ import annotations

import argparse
import json

import numpy as np

from slowfast.analysis import find_equilibria, nullcline_scan
from slowfast.errors import InvalidParameterError
from slowfast.models.futile import RATE_NAMES, FutileCycleParams, K0_polytope, reduced_futile_cycle


def draw(rng: np.random.Generator) -> FutileCycleParams:
    vals = {k: 10 ** rng.uniform(-1, 1.5) for k in RATE_NAMES}
    S = 10 ** rng.uniform(0, 1.5)
    c = 10 ** rng.uniform(-0.5, 0.5)
    return FutileCycleParams(**vals, S_tot=S, E_tot=0.01 * S, F_tot=0.01 * S * c)


def equilibria(p: FutileCycleParams, resolution: int):
    field = reduced_futile_cycle(p)
    seeds = nullcline_scan(field, [0.0, 0.0], [1.0, 1.0], resolution)
    return find_equilibria(field, seeds, domain=K0_polytope())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--want", type=int, default=1, help="stop after this many bistable sets")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    found = 0
    for trial in range(args.trials):
        try:
            p = draw(rng)
        except InvalidParameterError:
            continue
        if len(equilibria(p, 60)) < 3:
            continue
        eqs = equilibria(p, 300)
        labels = [e.classification for e in eqs]
        if labels.count("stable-node") + labels.count("stable-focus") < 2:
            continue
        found += 1
        print(f"trial {trial}: {len(eqs)} equilibria")
        for e in eqs:
            print(f"   x = {np.round(e.location, 5)}  {e.classification}")
        print(json.dumps({"model": "futile-cycle", "params": p.as_dict(), "eps": p.eps}, indent=2))
        if found >= args.want:
            break
    if not found:
        print("no bistable set in this batch; try more trials or another seed")


if __name__ == "__main__":
    main()
