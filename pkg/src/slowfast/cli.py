"""Command-line front end: ``slowfast <command> --model KEY [options]``.

Every command writes plot-ready JSON (and CSV where tabular output makes
sense) into ``--out``.  Files are written to a temporary name and renamed into
place.  Exit status is 0 on success, 2 for invalid input and 3 when a
numerical procedure fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .analysis import (
    convergence_census,
    detect_limit_cycle,
    find_equilibria,
    nullcline_scan,
    reduced_field,
    system_equilibria,
    to_jsonable,
)
from .errors import (
    DomainUndefinedError,
    InvalidParameterError,
    InvalidStateError,
    SlowFastError,
    UnsupportedOperationError,
)
from .integrate import EventSpec, IntegratorConfig, integrate
from .manifold import asymptotic_phase, manifold_error_scaling
from .models import MODEL_KEYS, ModelInstance, build_model, load_model_document
from .models.audit import assumption_audit
from .models.futile import derived_constants, futile_cycle_mass_action, futile_cycle_scaled, reduced_futile_cycle
from .monotone import (
    OrthantCone,
    eventually_positive_derivatives,
    kamke_check,
    monotone_order_preservation_test,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
WORKERS_ENV = "SLOWFAST_WORKERS"

COMMANDS = ("simulate", "equilibria", "census", "manifold-error", "phase-track", "monotone-check",
            "check-assumptions", "limit-cycle")


class UsageError(Exception):
    """Bad combination of arguments detected after parsing."""


# ------------------------------------------------------------------ output


def atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ------------------------------------------------------------------ helpers


def _parse_vector(text: str | None, name: str) -> np.ndarray | None:
    if text is None:
        return None
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from exc
    if not np.all(np.isfinite(v)):
        raise UsageError(f"--{name} must be finite")
    return v


def _model(args) -> ModelInstance:
    key, params, eps = args.model, {}, None
    if args.params is not None:
        if not Path(args.params).exists():
            raise UsageError(f"parameter file {args.params} does not exist")
        doc_key, params, eps = load_model_document(Path(args.params))
        if key is not None and key != doc_key:
            raise UsageError(f"--model {key} conflicts with model {doc_key!r} in {args.params}")
        key = doc_key
    if key is None:
        raise UsageError("--model is required (or a --params document naming the model)")
    if args.eps is not None:
        eps = args.eps
    return build_model(key, params, eps)


def _need_system(model: ModelInstance, command: str):
    if model.system is None:
        raise UsageError(f"{command} needs a slow–fast model (futile-cycle or counterexample), got {model.key}")


def _cfg(args, **defaults) -> IntegratorConfig:
    kw = dict(defaults)
    if args.rtol is not None:
        kw["rtol"] = args.rtol
    if args.atol is not None:
        kw["atol"] = args.atol
    try:
        return IntegratorConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _cfg_dict(cfg: IntegratorConfig) -> dict:
    return {"method": cfg.method, "rtol": cfg.rtol, "atol": cfg.atol, "max_steps": cfg.max_steps}


def _default_state(model: ModelInstance) -> np.ndarray:
    if model.key == "counterexample":
        return np.array([0.5, 0.5])
    if model.key == "futile-cycle-reduced":
        return np.array([0.5, 0.2])
    scaled = np.array([0.5, 0.2, 0.0, 0.0, 0.0, 0.0])
    if model.key == "futile-cycle-mass-action":
        return futile_cycle_mass_action(model.params).from_scaled(scaled)
    return scaled


def _cone(model: ModelInstance) -> OrthantCone:
    return OrthantCone((1,)) if model.key == "counterexample" else OrthantCone((-1, 1))


def _reduced(model: ModelInstance):
    if model.key == "counterexample":
        return reduced_field(model.system)
    return reduced_futile_cycle(model.params)


def _interior_samples(model: ModelInstance, n: int, rng) -> np.ndarray:
    """Uniform points strictly inside the slow region used for monotonicity tests."""
    if model.key == "counterexample":
        a = model.params.a
        return rng.uniform(-a, a, size=(n, 1))
    out = []
    while len(out) < n:
        p = rng.uniform(0.0, 1.0, size=2)
        if p.sum() < 1.0 - 1e-3 and p.min() > 1e-3:
            out.append(p)
    return np.array(out)


# ------------------------------------------------------------------ commands


def cmd_simulate(args, model: ModelInstance):
    s0 = _parse_vector(args.initial, "initial")
    s0 = _default_state(model) if s0 is None else s0
    if s0.size != model.field.dim:
        raise UsageError(f"--initial needs {model.field.dim} components for {model.key}")
    if model.key == "futile-cycle-mass-action":
        futile_cycle_mass_action(model.params).check_state(s0)
    method = "rosenbrock" if model.system is not None else "rk45"
    cfg = _cfg(args, method=method)
    t_end = args.horizon if args.horizon is not None else 10.0
    times = np.linspace(0.0, t_end, args.n_out + 1)
    traj = integrate(model.field, s0, (0.0, t_end), cfg, domain=model.region, t_eval=times)
    n = model.system.n if model.system is not None else s0.size
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{j + 1}" for j in range(s0.size - n)]
    rows = [header] + [[repr(float(t))] + [repr(float(v)) for v in z] for t, z in zip(traj.times, traj.states)]
    csv_path = atomic_write(Path(args.out) / "trajectory.csv", _csv_text(rows))
    result = {"status": traj.status, "t_final": traj.t_final, "final_state": traj.final, "n_steps": traj.n_steps,
              "n_rejected": traj.n_rejected, "message": traj.message, "csv": csv_path.name}
    settings = {"initial": s0, "horizon": t_end, "n_out": args.n_out, "integrator": _cfg_dict(cfg),
                "time": "slow time t" if model.system is not None else "model time"}
    code = EXIT_OK if traj.status in ("completed", "left-domain") else EXIT_NUMERICAL
    return result, settings, code


def cmd_equilibria(args, model: ModelInstance):
    res = args.resolution
    if model.system is not None:
        reduced, full = system_equilibria(model.system, model.eps, model.box[0], model.box[1], res,
                                          domain=model.region)
        result = {"reduced": reduced, "full": full}
    else:
        field = _reduced(model) if model.key != "futile-cycle-reduced" else model.field
        seeds = nullcline_scan(field, model.box[0], model.box[1], res)
        reduced = find_equilibria(field, seeds)
        result = {"reduced": reduced}
        if model.key == "futile-cycle-mass-action":
            sys_, dom = futile_cycle_scaled(model.params)
            _, full = system_equilibria(sys_, model.eps, model.box[0], model.box[1], res, domain=dom.at(model.eps))
            ma = futile_cycle_mass_action(model.params)
            result["full"] = [{"location": ma.from_scaled(e.location), "scaled": e.location,
                               "classification": e.classification} for e in full]
    result["count"] = len(result.get("full", result["reduced"]))
    return result, {"scan_resolution": res, "dedupe_radius": 1e-6, "residual_tol": 1e-10}, EXIT_OK


def cmd_census(args, model: ModelInstance):
    _need_system(model, "census")
    cfg = _cfg(args, rtol=1e-6, atol=1e-9, method="rosenbrock")
    horizon = args.horizon if args.horizon is not None else 200.0
    rep = convergence_census(model.system, model.domain, model.eps, args.samples, horizon, tol=args.tol,
                             seed=args.seed, cfg=cfg, workers=args.workers, x_box=model.box)
    atomic_write(Path(args.out) / "census.csv", _csv_text(rep.csv_rows()))
    result = rep.to_dict()
    result["csv"] = "census.csv"
    settings = {"samples": args.samples, "horizon": horizon, "tol": args.tol, "proximity": 1e3 * args.tol,
                "checks": 100, "integrator": _cfg_dict(cfg), "sampling": "rejection from bounding box"}
    return result, settings, EXIT_OK


def cmd_manifold_error(args, model: ModelInstance):
    _need_system(model, "manifold-error")
    eps_list = _parse_vector(args.eps_list, "eps-list")
    if np.any(eps_list <= 0):
        raise UsageError("--eps-list values must be positive")
    rng = np.random.default_rng(args.seed)
    xs = _interior_samples(model, args.samples, rng)
    cfg = _cfg(args, rtol=1e-10, atol=1e-13, method="rosenbrock")
    rep = manifold_error_scaling(model.system, eps_list, xs, cfg)
    atomic_write(Path(args.out) / "manifold-error.csv", _csv_text(rep.to_csv_rows()))
    result = {"eps": rep.eps, "sup_error": rep.sup_error, "slope": rep.slope, "intercept": rep.intercept,
              "status": rep.status, "mu": rep.mu, "tau_bl": rep.tau_bl, "csv": "manifold-error.csv"}
    return result, {"eps_list": eps_list, "x_samples": xs, "integrator": _cfg_dict(cfg)}, EXIT_OK


def cmd_phase_track(args, model: ModelInstance):
    _need_system(model, "phase-track")
    sys_ = model.system
    x = _parse_vector(args.x, "x")
    if x is None:
        x = np.array([0.3, 0.3]) if model.key != "counterexample" else np.array([0.5])
    if x.size != sys_.n:
        raise UsageError(f"--x needs {sys_.n} components")
    s0 = np.concatenate([x, sys_.m0(x) + args.displacement])
    cfg = _cfg(args, rtol=1e-10, atol=1e-13, method="rosenbrock")
    # the futile cycle has a uniform spectral bound over K; elsewhere estimate it at the start point
    mu = derived_constants(model.params).mu if model.key == "futile-cycle" else None
    rep = asymptotic_phase(sys_, s0, model.eps, cfg, mu=mu, manifold=args.proxy)
    result = {"times": rep.times, "distances": rep.distances, "rate": rep.rate, "initial_distance":
              rep.initial_distance, "final_distance": rep.final_distance, "mu": rep.mu, "horizon": rep.horizon,
              "fit_window": rep.fit_window, "manifold": rep.manifold}
    settings = {"x": x, "displacement": args.displacement, "horizon_factor": 40.0, "proxy": args.proxy,
                "integrator": _cfg_dict(cfg)}
    return result, settings, EXIT_OK


def cmd_monotone_check(args, model: ModelInstance):
    field = model.field if model.key == "futile-cycle-reduced" else _reduced(model)
    cone = _cone(model)
    rng = np.random.default_rng(args.seed)
    pts = _interior_samples(model, args.samples, rng)
    km = kamke_check(field, pts, cone, strict=True)
    cfg = _cfg(args, rtol=1e-9, atol=1e-12)
    epd_pts = pts[: args.epd_samples]
    epd = eventually_positive_derivatives(field, cone, epd_pts, cfg=cfg, domain=model.region
                                          if model.key == "futile-cycle-reduced" else None)
    pairs = []
    while len(pairs) < args.pairs:
        u = _interior_samples(model, 1, rng)[0]
        v = u + 0.05 * cone.s * rng.uniform(0.1, 1.0, size=u.size)
        if model.key == "counterexample" or (v.min() > 0 and v.sum() < 1):
            pairs.append((u, v))
    order = monotone_order_preservation_test(field, cone, pairs, args.order_time, strong=True, cfg=cfg)
    result = {
        "signature": list(cone.signature),
        "kamke": {"passed": km.passed, "n_points": len(pts), "min_off_diagonal": km.min_off_diagonal,
                  "violations": km.violations[:10]},
        "epd": {"achieved": epd.achieved, "t0": epd.t0, "margin": epd.margin, "t_grid": epd.t_grid,
                "n_samples": epd.n_samples, "excluded": epd.excluded},
        "order": {"n_pairs": len(pairs), "preserved": int(order.sum()), "t": args.order_time},
    }
    result["passed"] = bool(km.passed and epd.achieved and order.all())
    settings = {"samples": args.samples, "epd_samples": len(epd_pts), "pairs": args.pairs,
                "order_time": args.order_time, "integrator": _cfg_dict(cfg)}
    return result, settings, EXIT_OK


def cmd_check_assumptions(args, model: ModelInstance):
    if model.key not in ("futile-cycle", "counterexample"):
        raise UsageError("check-assumptions supports futile-cycle and counterexample")
    rep = assumption_audit(model.params, grid_n=args.grid, n_boundary=args.boundary_samples, seed=args.seed)
    return rep.to_dict(), {"grid": args.grid, "boundary_samples": args.boundary_samples, "epd_samples": 20,
                           "kamke_points": 1000}, EXIT_OK


def cmd_limit_cycle(args, model: ModelInstance):
    _need_system(model, "limit-cycle")
    s0 = _parse_vector(args.initial, "initial")
    s0 = _default_state(model) if s0 is None else s0
    idx, val = args.section_index, args.section_value
    if not 0 <= idx < s0.size:
        raise UsageError("--section-index out of range")
    _, eqs = system_equilibria(model.system, model.eps, model.box[0], model.box[1], 2000 if model.system.n == 1
                               else 200, domain=model.region)
    cfg = _cfg(args, rtol=1e-10, atol=1e-12)
    section = EventSpec(lambda z: z[idx] - val, "up")
    rep = detect_limit_cycle(model.field, s0, section, cfg, equilibria=eqs, t_max=args.horizon or 1e3,
                             section_label=f"z[{idx}] = {val:g}")
    result = rep.to_dict()
    result["equilibria"] = eqs
    settings = {"initial": s0, "section_index": idx, "section_value": val, "direction": "up",
                "crossings": 20, "window": 5, "tol": 1e-6, "far": 1e-3, "t_max": args.horizon or 1e3,
                "integrator": _cfg_dict(cfg)}
    return result, settings, EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "equilibria": cmd_equilibria,
    "census": cmd_census,
    "manifold-error": cmd_manifold_error,
    "phase-track": cmd_phase_track,
    "monotone-check": cmd_monotone_check,
    "check-assumptions": cmd_check_assumptions,
    "limit-cycle": cmd_limit_cycle,
}


# ------------------------------------------------------------------ parser


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=MODEL_KEYS)
    common.add_argument("--params", help="JSON document {model, params, eps}")
    common.add_argument("--eps", type=_positive_float)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--rtol", type=_positive_float)
    common.add_argument("--atol", type=_positive_float)
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable output")

    p = argparse.ArgumentParser(prog="slowfast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="integrate one trajectory to CSV")
    s.add_argument("--initial", help="comma-separated initial state")
    s.add_argument("--horizon", type=_positive_float)
    s.add_argument("--n-out", type=_positive_int, default=200)

    s = sub.add_parser("equilibria", parents=[common], help="locate and classify equilibria")
    s.add_argument("--resolution", type=_positive_int, default=200)

    s = sub.add_parser("census", parents=[common], help="seeded convergence census over D_eps")
    s.add_argument("--samples", type=_positive_int, default=1000)
    s.add_argument("--horizon", type=_positive_float)
    s.add_argument("--tol", type=_positive_float, default=1e-6)
    s.add_argument("--workers", type=_positive_int, help=f"worker processes (default ${WORKERS_ENV} or 1)")

    s = sub.add_parser("manifold-error", parents=[common], help="sup |y - m0| after relaxation, per eps")
    s.add_argument("--eps-list", default="0.1,0.01,0.001,0.0001")
    s.add_argument("--samples", type=_positive_int, default=8)

    s = sub.add_parser("phase-track", parents=[common], help="distance to the slow manifold along a run")
    s.add_argument("--x", help="comma-separated slow start point")
    s.add_argument("--displacement", type=float, default=0.1)
    s.add_argument("--proxy", choices=("m0", "first-order", "corrected"), default="corrected")

    s = sub.add_parser("monotone-check", parents=[common], help="Kamke, eventual positivity and order tests")
    s.add_argument("--samples", type=_positive_int, default=1000)
    s.add_argument("--epd-samples", type=_positive_int, default=20)
    s.add_argument("--pairs", type=_positive_int, default=100)
    s.add_argument("--order-time", type=_positive_float, default=5.0)

    s = sub.add_parser("check-assumptions", parents=[common], help="audit A1..A7")
    s.add_argument("--grid", type=_positive_int, default=50)
    s.add_argument("--boundary-samples", type=_positive_int, default=1000)

    s = sub.add_parser("limit-cycle", parents=[common], help="Poincaré-section limit-cycle detection")
    s.add_argument("--initial")
    s.add_argument("--section-index", type=int, default=0)
    s.add_argument("--section-value", type=float, default=0.0)
    s.add_argument("--horizon", type=_positive_float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        model = _model(args)
        result, settings, code = HANDLERS[args.command](args, model)
    except (UsageError, InvalidParameterError, InvalidStateError, DomainUndefinedError,
            UnsupportedOperationError, ValueError) as exc:
        print(f"slowfast {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SlowFastError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"slowfast {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    doc = {
        "command": args.command,
        "model": model.key,
        "eps": model.eps,
        "params": model.params.as_dict(),
        "seed": args.seed,
        "settings": settings,
        "result": result,
        "version": _version(),
    }
    if not args.no_timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    path = atomic_write(Path(args.out) / f"{args.command}.json", _json_text(doc))
    print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
