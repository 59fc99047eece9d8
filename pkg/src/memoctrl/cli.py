"""Command-line front end: solve, optimize, verify, sweep.

One flat JSON document configures a run (see CONFIG_EXAMPLE below and the
README); results go to an output directory as CSV fields, a cost-breakdown
JSON, and a run manifest recording the config echo, derived constants,
solver reports, file inventory, timings, and (for verify) the pass/fail
table.  Exit codes: 0 success, 1 config or validation error, 2 solver
non-convergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cost import check_fp_identity, evaluate_J0
from .fields import SpaceTimeField, SpatialGrid, omega_mask
from .optimality import solve_optimality
from .params import Box, make_params
from .state import StateProblem, solve_state
from .timeops import TimeGrid
from .verify import format_table, run_suite, suite_passed

CONFIG_EXAMPLE = {
    "n": 3,
    "C0": 1.0,
    "N": 1.0,
    "T": 1.0,
    "sim_dim": 1,
    "domain_box": {"lo": [0.0], "hi": [1.0]},
    "omega_box": {"lo": [0.25], "hi": [0.75]},
    "nodes_per_axis": [65],
    "nt": 128,
    "source": {"preset": "constant", "amplitude": 1.0},
    "control": {"preset": "zero"},
    "solver": {"tol": 1e-8, "max_picard": 200, "cg_tol": 1e-12,
               "outer_tol": 1e-7, "outer_max": 100},
    "memory_cap_mb": 512,
}

# fields held simultaneously during an optimize run, for the memory estimate
_PERSISTENT_FIELDS = 16


class ConfigError(ValueError):
    pass


def default_config():
    return copy.deepcopy(CONFIG_EXAMPLE)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return normalize_config(raw)


def normalize_config(raw):
    """Fill defaults, validate every invariant, and return the canonical dict."""
    cfg = default_config()
    for key, val in raw.items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(cfg[key], dict) and key in ("solver",):
            bad = set(val) - set(cfg[key])
            if bad:
                raise ConfigError(f"unknown solver options {sorted(bad)}")
            cfg[key].update(val)
        else:
            cfg[key] = copy.deepcopy(val)
    try:
        params = build_params(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    nodes = cfg["nodes_per_axis"]
    if len(nodes) != cfg["sim_dim"]:
        raise ConfigError("nodes_per_axis must list one count per axis")
    if any(int(m) < 3 for m in nodes):
        raise ConfigError("need at least 3 nodes per axis")
    if int(cfg["nt"]) < 2:
        raise ConfigError("need at least 2 time intervals")
    nnodes = int(np.prod([int(m) for m in nodes]))
    est_mb = nnodes * (int(cfg["nt"]) + 1) * _PERSISTENT_FIELDS * 8 / 2 ** 20
    if est_mb > cfg["memory_cap_mb"]:
        raise ConfigError(
            f"estimated memory {est_mb:.0f} MB exceeds cap "
            f"{cfg['memory_cap_mb']} MB (grid too large)")
    src = cfg["source"]
    if "csv" in src:
        if not Path(src["csv"]).exists():
            raise ConfigError(f"source csv not found: {src['csv']}")
    elif src.get("preset") not in ("constant", "sine-product", "gaussian-bump"):
        raise ConfigError(f"unknown source preset {src.get('preset')!r}")
    if cfg["control"].get("preset") not in ("zero", "ramp", "sine"):
        raise ConfigError(f"unknown control preset "
                          f"{cfg['control'].get('preset')!r}")
    grid = SpatialGrid(params.domain_box, tuple(int(m) for m in nodes))
    omega_mask(grid, params)  # raises if omega grabs a boundary node
    return cfg


def build_params(cfg):
    return make_params(
        n=cfg["n"], C0=cfg["C0"], N=cfg["N"], T=cfg["T"],
        sim_dim=cfg["sim_dim"],
        domain_box=Box(tuple(cfg["domain_box"]["lo"]),
                       tuple(cfg["domain_box"]["hi"])),
        omega_box=Box(tuple(cfg["omega_box"]["lo"]),
                      tuple(cfg["omega_box"]["hi"])))


def build_grids(cfg, params):
    grid = SpatialGrid(params.domain_box,
                       tuple(int(m) for m in cfg["nodes_per_axis"]))
    tgrid = TimeGrid(T=params.T, nt=int(cfg["nt"]))
    return grid, tgrid


def build_source(cfg, params, grid, tgrid):
    src = cfg["source"]
    if "csv" in src:
        return field_from_csv(src["csv"], grid, tgrid)
    amp = float(src.get("amplitude", 1.0))
    kind = src["preset"]
    if kind == "constant":
        vals = np.full((grid.nnodes, tgrid.nt + 1), amp)
    elif kind == "sine-product":
        prof = np.ones(grid.nnodes)
        for ax, (lo, hi) in enumerate(zip(grid.box.lo, grid.box.hi)):
            prof *= np.sin(np.pi * (grid.coords[:, ax] - lo) / (hi - lo))
        vals = amp * prof[:, None] * np.ones(tgrid.nt + 1)[None, :]
    else:  # gaussian-bump
        center = src.get("center", [(lo + hi) / 2.0 for lo, hi
                                    in zip(grid.box.lo, grid.box.hi)])
        width = float(src.get("width", 0.2))
        d2 = np.zeros(grid.nnodes)
        for ax, cx in enumerate(center):
            d2 += (grid.coords[:, ax] - cx) ** 2
        vals = amp * np.exp(-d2 / (2 * width ** 2))[:, None] \
            * np.ones(tgrid.nt + 1)[None, :]
    tmod = src.get("time", "constant")
    if tmod == "ramp":
        vals = vals * (tgrid.times / tgrid.T)[None, :]
    elif tmod == "sine":
        vals = vals * np.sin(np.pi * tgrid.times / tgrid.T)[None, :]
    elif tmod != "constant":
        raise ConfigError(f"unknown source time modulation {tmod!r}")
    return SpaceTimeField(grid, tgrid, vals)


def build_control(cfg, params, grid, tgrid):
    ctl = cfg["control"]
    kind = ctl.get("preset", "zero")
    vals = np.zeros((grid.nnodes, tgrid.nt + 1))
    if kind != "zero":
        amp = float(ctl.get("amplitude", 1.0))
        w = omega_mask(grid, params)
        if kind == "ramp":
            vals[w] = amp * (tgrid.times / tgrid.T)[None, :]
        else:  # sine
            vals[w] = amp * np.sin(np.pi * tgrid.times / tgrid.T)[None, :]
        vals[:, 0] = 0.0
    return SpaceTimeField(grid, tgrid, vals)


# --- CSV I/O -------------------------------------------------------------

_AXIS_NAMES = ("x", "y", "z")


def field_to_csv(field, path):
    """Columns (coords..., t, value), row-major: node index outer, time inner."""
    grid, tgrid = field.grid, field.tgrid
    header = ",".join(_AXIS_NAMES[:grid.dim]) + ",t,value"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(grid.nnodes):
            coords = ",".join(repr(float(c)) for c in grid.coords[i])
            for k, t in enumerate(tgrid.times):
                fh.write(f"{coords},{float(t)!r},{float(field.values[i, k])!r}\n")


def series_to_csv(series, path):
    with open(path, "w") as fh:
        fh.write("t,value\n")
        for t, v in zip(series.grid.times, series.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


def series_from_csv(path, grid):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.shape[0] != grid.nt + 1:
        raise ConfigError(f"series csv {path} has {data.shape[0]} rows, "
                          f"expected {grid.nt + 1}")
    if not np.allclose(data[:, 0], grid.times, atol=1e-12):
        raise ConfigError(f"series csv {path} times do not match the grid")
    from .timeops import TimeSeries
    return TimeSeries(grid, data[:, 1])


def field_from_csv(path, grid, tgrid):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    expected = grid.nnodes * (tgrid.nt + 1)
    if data.shape[0] != expected:
        raise ConfigError(f"field csv {path} has {data.shape[0]} rows, "
                          f"expected {expected} for this grid")
    d = grid.dim
    coords = data[::tgrid.nt + 1, :d]
    if not np.allclose(coords, grid.coords, atol=1e-12):
        raise ConfigError(f"field csv {path} coordinates do not match the grid")
    vals = data[:, d + 1].reshape(grid.nnodes, tgrid.nt + 1)
    return SpaceTimeField(grid, tgrid, vals)


def breakdown_to_files(breakdown, out_dir):
    d = breakdown.as_dict()
    with open(out_dir / "breakdown.json", "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "breakdown.csv", "w") as fh:
        keys = sorted(d)
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(repr(float(d[k])) for k in keys) + "\n")


def _write_manifest(out_dir, manifest):
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _base_manifest(cfg, params):
    return {
        "config": cfg,
        "derived_constants": {"An": params.An, "Bn": params.Bn,
                              "mu": params.mu},
        "reports": {},
        "outputs": [],
        "timings_s": {},
        "verify_suite": None,
    }


def _report_dict(report):
    d = asdict(report)
    d["residual_history"] = [float(r) for r in d["residual_history"]]
    return d


# --- subcommands ----------------------------------------------------------

def cmd_solve(cfg, out_dir):
    params = build_params(cfg)
    grid, tgrid = build_grids(cfg, params)
    f = build_source(cfg, params, grid, tgrid)
    v = build_control(cfg, params, grid, tgrid)
    s = cfg["solver"]
    manifest = _base_manifest(cfg, params)
    t0 = time.perf_counter()
    u, report = solve_state(StateProblem(
        params=params, f=f, v=v, tol=s["tol"], max_picard=s["max_picard"],
        cg_tol=s["cg_tol"]))
    manifest["timings_s"]["solve"] = time.perf_counter() - t0
    manifest["reports"]["state"] = _report_dict(report)
    field_to_csv(u, out_dir / "u0.csv")
    manifest["outputs"].append("u0.csv")
    _write_manifest(out_dir, manifest)
    return 0 if report.converged else 2


def cmd_optimize(cfg, out_dir):
    params = build_params(cfg)
    grid, tgrid = build_grids(cfg, params)
    f = build_source(cfg, params, grid, tgrid)
    s = cfg["solver"]
    manifest = _base_manifest(cfg, params)
    t0 = time.perf_counter()
    result = solve_optimality(f, params, outer_tol=s["outer_tol"],
                              outer_max=s["outer_max"],
                              max_picard=s["max_picard"], cg_tol=s["cg_tol"])
    manifest["timings_s"]["optimize"] = time.perf_counter() - t0
    for name, rep in result.reports.items():
        manifest["reports"][name] = _report_dict(rep)
    manifest["reports"]["outer"] = {
        "iterations": result.outer_iterations,
        "final_residual": result.outer_residual,
        "converged": result.converged,
    }
    for name, field in (("u0", result.u0), ("p0", result.p0),
                        ("v0", result.v0)):
        field_to_csv(field, out_dir / f"{name}.csv")
        manifest["outputs"].append(f"{name}.csv")
    breakdown = evaluate_J0(result.v0, result.u0, params)
    breakdown_to_files(breakdown, out_dir)
    manifest["outputs"] += ["breakdown.json", "breakdown.csv"]
    lhs, rhs = check_fp_identity(f, result, params)
    manifest["fp_identity"] = {
        "J0_total": lhs, "integral_f_p0": rhs,
        "rel_gap": abs(lhs - rhs) / max(abs(rhs), 1e-300),
    }
    _write_manifest(out_dir, manifest)
    return 0 if result.converged else 2


def cmd_verify(cfg, out_dir, seed, tamper_an=1.0):
    params = build_params(cfg)
    manifest = _base_manifest(cfg, params)
    manifest["seed"] = seed
    if tamper_an != 1.0:
        manifest["tamper_an"] = tamper_an
    t0 = time.perf_counter()
    results = run_suite(params, seed=seed, tamper_an=tamper_an)
    manifest["timings_s"]["verify"] = time.perf_counter() - t0
    manifest["verify_suite"] = [asdict(r) for r in results]
    _write_manifest(out_dir, manifest)
    print(format_table(results))
    ok = suite_passed(results)
    if not ok:
        worst = [r for r in results if not r.passed]
        for r in worst:
            print(f"FAILED invariant {r.name}: measured {r.measured:.6e} "
                  f"exceeds allowed {r.allowed:.6e}", file=sys.stderr)
    return 0 if ok else 3


_SWEEP_AXES = ("N", "C0", "omega_size", "nt", "h")


def _sweep_point_config(cfg, axis, value):
    point = copy.deepcopy(cfg)
    if axis == "N":
        point["N"] = float(value)
    elif axis == "C0":
        point["C0"] = float(value)
    elif axis == "nt":
        point["nt"] = int(value)
    elif axis == "h":
        point["nodes_per_axis"] = [int(value)] * cfg["sim_dim"]
    else:  # omega_size: scale the controlled box about its center
        lo = np.asarray(cfg["omega_box"]["lo"], dtype=float)
        hi = np.asarray(cfg["omega_box"]["hi"], dtype=float)
        center = (lo + hi) / 2.0
        half = (hi - lo) / 2.0 * float(value)
        point["omega_box"] = {"lo": (center - half).tolist(),
                              "hi": (center + half).tolist()}
    return normalize_config(point)


def _run_sweep_point(args):
    cfg, axis, value, out_sub = args
    out_dir = Path(out_sub)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        point = _sweep_point_config(cfg, axis, value)
        code = cmd_optimize(point, out_dir)
    except ConfigError as exc:
        return {"axis": axis, "value": value, "exit": 1, "error": str(exc)}
    runtime = time.perf_counter() - t0
    with open(out_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    with open(out_dir / "breakdown.json") as fh:
        breakdown = json.load(fh)
    row = {"axis": axis, "value": value, "exit": code, "runtime_s": runtime}
    row.update({f"term_{k}": v for k, v in breakdown.items()})
    row.update(manifest["derived_constants"])
    row["N_param"] = manifest["config"]["N"]
    row["C0_param"] = manifest["config"]["C0"]
    row["fp_rel_gap"] = manifest["fp_identity"]["rel_gap"]
    row["outer_iterations"] = manifest["reports"]["outer"]["iterations"]
    row["converged"] = manifest["reports"]["outer"]["converged"]
    return row


def cmd_sweep(cfg, out_dir, axis, values, workers=1):
    if axis not in _SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; "
                          f"choose from {_SWEEP_AXES}")
    if len(values) < 2:
        raise ConfigError("sweep needs at least 2 values")
    jobs = [(cfg, axis, value, str(out_dir / f"point_{i:03d}"))
            for i, value in enumerate(values)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_sweep_point, jobs))
    else:
        rows = [_run_sweep_point(job) for job in jobs]
    keys = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    def fmt(x):
        if isinstance(x, bool) or x is None or isinstance(x, str):
            return str(x)
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        return repr(float(x))

    with open(out_dir / "sweep.csv", "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(k, ""))
                              for k in keys) + "\n")
    return 2 if any(row["exit"] != 0 for row in rows) else 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="memoctrl",
        description="Homogenized-limit optimal control runs and verification")
    parser.add_argument("--config", type=str, default=None,
                        help="path to the JSON run configuration")
    parser.add_argument("--out", type=str, default="out",
                        help="output directory")
    parser.add_argument("--seed", type=int, default=42,
                        help="seed for randomized verification inputs")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for sweep points")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="solve the state problem for the "
                                 "configured control")
    sub.add_parser("optimize", help="solve the coupled optimality system")
    pv = sub.add_parser("verify", help="run the executable invariant suite")
    pv.add_argument("--tamper-an", type=float, default=1.0,
                    help="multiply the absorption constant by this factor; "
                         "the suite must fail for any value != 1 "
                         "(sensitivity self-check)")
    ps = sub.add_parser("sweep", help="one optimize run per parameter value")
    ps.add_argument("--axis", required=True, choices=_SWEEP_AXES)
    ps.add_argument("--values", required=True,
                    help="comma-separated list of values")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors are validation errors (exit 1); --help stays 0
        return 0 if exc.code == 0 else 1

    try:
        cfg = load_config(args.config) if args.config else normalize_config({})
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "optimize":
            return cmd_optimize(cfg, out_dir)
        if args.command == "verify":
            return cmd_verify(cfg, out_dir, seed=args.seed,
                              tamper_an=args.tamper_an)
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("empty sweep value list")
        return cmd_sweep(cfg, out_dir, args.axis, values,
                         workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
