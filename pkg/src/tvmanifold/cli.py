"""Command-line front end: ``tvmanifold <subcommand> --out DIR [options]``.

Every subcommand writes its CSV/JSON results, a ``manifest.json`` (resolved
configuration, versions, output digests) and a ``timings.json`` into ``--out``.
Outputs are staged and moved into place only on success or numeric failure, so
a usage error leaves no files behind.

Exit status: 0 success, 1 numeric failure (``diagnostic.json`` written) or a
failing ``verify-all``, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import DomainError, NumericError, ParameterError
from .fields import Region, ScalarField, field_from_csv, random_smooth_field, write_csv

SUBCOMMANDS = ("perimeter", "heatflow", "coarea", "isoperimetry", "plap-solve", "symmetrize", "verify-all")

# option name -> (type, default); subcommand-specific options, all settable from --config
OPTIONS = {
    "perimeter": {"region": (str, "cap:1.0471975511965976"), "method": (str, "both")},
    "heatflow": {"region": (str, "hemisphere"), "tau": (float, None), "steps": (int, 10), "theta": (float, 0.0)},
    "coarea": {"field": (str, "sine"), "thresholds": (int, 1000)},
    "isoperimetry": {"count": (int, 500), "angles": (int, 47)},
    "plap-solve": {"problem": (dict, None), "growth": (float, 0.0), "core": (float, 1.0)},
    "symmetrize": {"pole_x": (float, 1.0), "sigma": (float, 0.1), "radius": (float, 16.0), "f_l1": (float, None)},
    "verify-all": {"criteria": (str, "1,2,3,4,5,6,7,8,9,10")},
}
DEFAULT_MESH = {
    "perimeter": "icosphere:4",
    "heatflow": "icosphere:4",
    "coarea": "torus:128",
    "isoperimetry": "icosphere:4",
    "plap-solve": None,
    "symmetrize": "icosphere:5",
    "verify-all": "icosphere:4",
}
COMMON = {"mesh": (str, None), "seed": (int, 0), "threads": (int, 1)}


class UsageError(Exception):
    pass


class RunFailure(Exception):
    """Numeric failure after outputs may have been partially produced."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


# ---------------------------------------------------------------------- parsing
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvmanifold", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--mesh", help="icosphere:N, torus:N, disk:R,h[,growth,core] or a path to an OFF file")
        p.add_argument("--seed", type=int)
        p.add_argument("--config", help="JSON file with option values")
        p.add_argument("--threads", type=int, help="worker threads (computation is sequential; recorded)")
        for opt, (typ, _) in OPTIONS[name].items():
            if typ is dict:
                continue
            p.add_argument("--" + opt.replace("_", "-"), dest=opt, type=typ)
    return parser


def resolve_config(args) -> dict:
    """Merge defaults, the JSON config file and explicit flags (flags win)."""
    spec = {**COMMON, **OPTIONS[args.command]}
    conf = {}
    if args.config:
        try:
            conf = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(conf, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(conf) - set(spec))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {unknown}")
    resolved = {}
    for key, (typ, default) in spec.items():
        val = getattr(args, key, None)
        if val is None:
            val = conf.get(key, default)
        if val is not None and typ is not dict:
            if typ is float and isinstance(val, bool) or typ is int and isinstance(val, bool):
                raise UsageError(f"option {key} has the wrong type")
            try:
                val = typ(val)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"option {key}: {exc}") from exc
        elif val is not None and not isinstance(val, dict):
            raise UsageError(f"option {key} must be a JSON object")
        resolved[key] = val
    if resolved["mesh"] is None:
        resolved["mesh"] = DEFAULT_MESH[args.command]
    if resolved["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return resolved


def parse_mesh(spec: str):
    from .mesh import build_disk, build_flat_torus, build_icosphere, read_off

    kind, _, rest = spec.partition(":")
    try:
        if kind == "icosphere":
            return build_icosphere(int(rest))
        if kind == "torus":
            return build_flat_torus(int(rest))
        if kind == "disk":
            nums = [float(x) for x in rest.split(",")]
            if len(nums) not in (2, 4):
                raise ValueError("disk needs R,h or R,h,growth,core")
            return build_disk(*nums)
    except ValueError as exc:
        raise UsageError(f"bad mesh spec {spec!r}: {exc}") from exc
    if spec.lower().endswith(".off") and Path(spec).is_file():
        return read_off(spec)
    raise UsageError(f"bad mesh spec {spec!r}")


def parse_region(mesh, spec: str, rng) -> tuple[Region, float | None]:
    """Region and, for polar caps on the unit sphere, the analytic boundary length."""
    from .isoperimetry import random_region

    if spec == "hemisphere":
        spec = f"cap:{np.pi / 2!r}"
    kind, _, rest = spec.partition(":")
    if kind == "cap":
        try:
            angle = float(rest)
        except ValueError as exc:
            raise UsageError(f"bad region {spec!r}") from exc
        if not 0 < angle < np.pi:
            raise UsageError("cap angle must lie in (0, pi)")
        on_sphere = np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)
        return Region.polar_cap(mesh, angle), (2 * np.pi * np.sin(angle) if on_sphere else None)
    if kind == "random":
        try:
            frac = float(rest) if rest else None
        except ValueError as exc:
            raise UsageError(f"bad region {spec!r}") from exc
        return random_region(mesh, rng, fraction=frac), None
    if kind == "strip":
        x = mesh.centroids[:, 0]
        lo = x.min()
        return Region(mesh, x - lo < 0.5 * (x.max() - lo), "strip"), None
    raise UsageError(f"bad region {spec!r}")


# ---------------------------------------------------------------------- subcommands
def cmd_perimeter(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .perimeter import perimeter_cut, perimeter_heat, tv_dual

    methods = {"cut": ["cut"], "heat": ["heat"], "dual": ["dual"], "both": ["cut", "heat"], "all": ["cut", "heat", "dual"]}
    if cfg["method"] not in methods:
        raise UsageError(f"--method must be one of {sorted(methods)}")
    E, analytic = parse_region(mesh, cfg["region"], rng)
    rows = []
    for m in methods[cfg["method"]]:
        t0 = time.perf_counter()
        if m == "cut":
            val = perimeter_cut(E)
        elif m == "heat":
            val = perimeter_heat(E).value
        else:
            res = tv_dual(E.vertex_lift())
            res.to_csv(out / "dual_certificate.csv")
            val = res.value
        timings[m] = time.perf_counter() - t0
        rows.append((m, val, "" if analytic is None else analytic))
    write_csv(out / "perimeter.csv", ["method", "value", "analytic"], rows)
    return {"region": E.label, "area": E.area, "analytic": analytic, "values": {r[0]: r[1] for r in rows}}


def cmd_heatflow(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .perimeter import empirical_theta, heat_flow, monotonicity_check

    if cfg["steps"] < 1:
        raise UsageError("--steps must be >= 1")
    tau = cfg["tau"] if cfg["tau"] is not None else mesh.mean_edge_length**2
    E, _ = parse_region(mesh, cfg["region"], rng)
    tr = heat_flow(E.vertex_lift(), tau, cfg["steps"])
    tr.to_csv(out / "trace.csv", cfg["theta"])
    ok, worst = monotonicity_check(tr, cfg["theta"])
    summary = {
        "region": E.label,
        "tau": tau,
        "theta": cfg["theta"],
        "monotone": ok,
        "worst_increase": worst,
        "empirical_theta": empirical_theta(tr),
        "mass_drift": float(np.max(np.abs(tr.masses - tr.masses[0]))),
    }
    (out / "heatflow.json").write_text(_dumps(summary))
    return summary


def _field(cfg, mesh, rng) -> ScalarField:
    spec = cfg["field"]
    X = mesh.vertices
    if spec == "sine":
        return ScalarField(mesh, np.sin(2 * np.pi * X[:, 0]))
    if spec == "height":
        return ScalarField(mesh, X[:, 2] if not mesh.periodic else X[:, 0])
    if spec == "random":
        return random_smooth_field(mesh, rng)
    if spec.startswith("csv:"):
        return field_from_csv(mesh, spec[4:])
    raise UsageError(f"bad field {spec!r}; use sine, height, random or csv:PATH")


def cmd_coarea(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .coarea import coarea_integral, derivative_identity_check, layer_cake_l1_check
    from .fields import distribution_curve, total_gradient_norm

    if cfg["thresholds"] < 2:
        raise UsageError("--thresholds must be >= 2")
    u = _field(cfg, mesh, rng)
    if not np.all(np.isfinite(u.values)):
        raise UsageError("field has missing or non-finite values")
    res = coarea_integral(u, cfg["thresholds"])
    summary = {
        "total_variation": total_gradient_norm(u),
        "closed_form": res.closed_form,
        "quadrature": res.quadrature,
    }
    if not u.is_constant():
        lo, hi = u.min, u.max
        grid = np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 200)
        chk = derivative_identity_check(u, grid)
        chk.to_csv(out / "derivative.csv")
        summary["derivative_max_residual"] = chk.max_residual
        summary["layer_cake_l1_error"] = layer_cake_l1_check(u, np.linspace(lo, hi, cfg["thresholds"]))
        distribution_curve(u, np.linspace(lo, hi, cfg["thresholds"])).to_csv(out / "distribution.csv")
    (out / "coarea.json").write_text(_dumps(summary))
    return summary


def cmd_isoperimetry(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .isoperimetry import SPHERE_CONSTANT, cap_scan, random_region_audit, reports_to_csv

    if cfg["count"] < 0 or cfg["angles"] < 1:
        raise UsageError("--count must be >= 0 and --angles >= 1")
    angles = np.linspace(np.pi / 24, np.pi - np.pi / 24, cfg["angles"])
    summary = {}
    if np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0):
        reps, cmin = cap_scan(mesh, angles, "cut")
        reports_to_csv(reps, out / "caps.csv")
        _, lmin = cap_scan(mesh, angles, "level")
        summary.update(cap_min_cut=cmin, cap_min_level=lmin, reference=SPHERE_CONSTANT)
    t0 = time.perf_counter()
    audit = random_region_audit(mesh, cfg["count"], cfg["seed"], SPHERE_CONSTANT - 0.1)
    timings["audit"] = time.perf_counter() - t0
    write_csv(out / "random_regions.csv", ["angle_or_seed", "area", "perimeter", "ratio"],
              ((f"seed:{cfg['seed']}:{i}", a, pr, r) for i, (a, pr, r) in enumerate(zip(audit.areas, audit.perimeters, audit.ratios))))
    (out / "audit_failures.json").write_text(_dumps(audit.failures))
    summary.update(random_min=audit.min_ratio, failures=len(audit.failures))
    (out / "isoperimetry.json").write_text(_dumps(summary))
    return summary


def cmd_plap(cfg, mesh_spec, rng, out: Path, timings: dict) -> dict:
    from .plap import PlapProblem, problem_mesh, save_problem, solve_problem

    raw = cfg["problem"] or {"p": 2.0, "poles": [{"x": 0.0, "y": 0.0, "gamma": 1.0}], "radius": 1.0, "sigma": 0.05}
    problem = PlapProblem.from_dict(raw)
    mesh = parse_mesh(mesh_spec) if mesh_spec else problem_mesh(problem, growth=cfg["growth"], core=cfg["core"])
    save_problem(problem, out / "problem.json")
    res = solve_problem(problem, mesh)
    res.to_csv(out / "solution.csv")
    summary = {
        "energy": res.energy,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "energies": list(res.energies),
        "n_vertices": mesh.n_vertices,
    }
    (out / "solve.json").write_text(_dumps(summary))
    if not res.converged:
        raise RunFailure("solver hit the iteration cap", summary)
    return summary


def cmd_symmetrize(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .acceptance import sphere_dipole_field
    from .symmetrization import (
        calibrated_isoperimetric_constant,
        decay_bound_check,
        decreasing_rearrangement,
        estimate_chain,
        rearrangement_log_fit,
    )

    u, prob, res, tr = sphere_dipole_field(mesh, cfg["pole_x"], cfg["sigma"], cfg["radius"])
    f_l1 = cfg["f_l1"] if cfg["f_l1"] is not None else prob.source_l1
    rep = estimate_chain(u, f_l1, C_I=calibrated_isoperimetric_constant(mesh))
    rep.to_csv(out / "chain.csv")
    decay = decay_bound_check(rep)
    fit = rearrangement_log_fit(u)
    s = np.geomspace(1e-3 * rep.mu0, rep.mu0, 200)
    write_csv(out / "rearrangement.csv", ["s", "u_star", "fit"],
              zip(s, decreasing_rearrangement(u, s), fit.a - fit.b * np.log(s)))
    summary = {
        "C": rep.C,
        "decay_pass": decay.ok,
        "decay_worst_margin": decay.worst_margin,
        "fit": {"a": fit.a, "b": fit.b, "max_residual": fit.max_residual, "bound_pass": fit.bound_ok},
        "lq_norms": fit.lq_norms,
        "pass_fractions": {k: rep.pass_fraction(k) for k in ("check11", "check13", "check14")},
        "C_I": rep.isoperimetric_constant,
        "f_l1": f_l1,
        "sampled_fraction": float(tr.sampled.mean()),
    }
    (out / "symmetrize.json").write_text(_dumps(summary))
    return summary


def cmd_verify(cfg, mesh, rng, out: Path, timings: dict) -> dict:
    from .acceptance import run_all

    try:
        numbers = {int(x) for x in cfg["criteria"].split(",") if x.strip()}
    except ValueError as exc:
        raise UsageError(f"bad --criteria {cfg['criteria']!r}") from exc
    if not numbers or not numbers <= set(range(1, 11)):
        raise UsageError("--criteria must list numbers in 1..10")
    results = run_all(cfg["seed"], numbers, echo=print)
    for r in results:
        timings[f"criterion_{r.number}"] = {"seconds": r.runtime, "limit": r.limit, "within_limit": r.within_time}
    (out / "verify.json").write_text(_dumps([r.to_dict() for r in results]))
    write_csv(out / "verify.csv", ["criterion", "title", "passed"], ((r.number, r.title, r.passed) for r in results))
    failed = [r.number for r in results if not r.ok]
    if failed:
        raise RunFailure("acceptance criteria failed", {"failed": failed})
    return {"passed": [r.number for r in results]}


# ---------------------------------------------------------------------- driver
def _dumps(obj) -> str:
    from .acceptance import _plain

    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> dict:
    import scipy

    return {"tvmanifold": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": kernels.backend_name()}


def run(args) -> int:
    cfg = resolve_config(args)
    out = Path(args.out)
    rng = np.random.default_rng(cfg["seed"])
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".tvmanifold-", dir=out.parent))
    timings: dict = {}
    status = 0
    t0 = time.perf_counter()
    try:
        try:
            if args.command == "plap-solve":
                result = cmd_plap(cfg, cfg["mesh"], rng, stage, timings)
            else:
                mesh = parse_mesh(cfg["mesh"])
                handler = {
                    "perimeter": cmd_perimeter,
                    "heatflow": cmd_heatflow,
                    "coarea": cmd_coarea,
                    "isoperimetry": cmd_isoperimetry,
                    "symmetrize": cmd_symmetrize,
                    "verify-all": cmd_verify,
                }[args.command]
                result = handler(cfg, mesh, rng, stage, timings)
        except (ParameterError, DomainError) as exc:
            raise UsageError(str(exc)) from exc
        except (NumericError, RunFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
            status = 1
            details = getattr(exc, "details", {})
            if isinstance(exc, NumericError):
                details = {"step": exc.step}
            (stage / "diagnostic.json").write_text(_dumps({"error": str(exc), "type": type(exc).__name__, "details": details}))
            result = None
            print(f"tvmanifold: {exc}", file=sys.stderr)
        timings["total"] = time.perf_counter() - t0
        outputs = {p.name: _digest(p) for p in sorted(stage.iterdir())}
        manifest = {
            "subcommand": args.command,
            "config": cfg,
            "status": status,
            "versions": _versions(),
            "outputs": outputs,
            "result": result,
        }
        (stage / "manifest.json").write_text(_dumps(manifest))
        (stage / "timings.json").write_text(_dumps(timings))
        out.mkdir(parents=True, exist_ok=True)
        for p in sorted(stage.iterdir()):
            os.replace(p, out / p.name)
        return status
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run(args)
    except UsageError as exc:
        print(f"tvmanifold: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
