"""Command-line entry point: config schema, subcommands, output files.

Every run validates its JSON config against a strict schema (unknown keys
rejected), merges it over the documented defaults, and embeds the merged
config plus a short hash in every output file, so any artifact can be
regenerated bit-identically from its own metadata.

Exit codes: 0 success, 1 validation error, 2 numerical failure (eigensolve,
blow-up), 3 check-suite failure.
"""

import argparse
import copy
import json
import os
import sys

import jsonschema
import numpy as np

from .anderson import build_operator, translation_averaged_green
from .checks import (check_algebra, check_fields, check_green,
                     check_invariance, check_semigroup, check_spectrum)
from .container import config_hash, get_operator, write_container
from .dynamics import SimConfig, evolve, init_stationary_convolution
from .errors import NumericalError, ValidationError
from .gibbs import GibbsConfig, gff_coefficients, sample_gibbs_coefficients
from .grid import Field, TorusGrid, torus_distance
from .noise import RngSpec, sample_spatial_white_noise
from .wick import WickPolynomial

DEFAULTS = {
    "grid": {"n_per_dim": 64},
    "operator": {"cutoff_K": 12, "seed": 0, "stream_id": 0,
                 "counterterm": "auto", "noise_amplitude": 1.0},
    "measure": {"F_coeffs": [0.0, 0.0, 0.0, 0.0, 0.25], "N": 8.0, "M": 4.0,
                "sampler": {"kind": "pcn", "beta": 0.5, "burn_in": 1000,
                            "thin": 20, "n_samples": 1000}},
    "dynamics": {"dt": 5e-4, "t_max": 0.1, "record_every": 10},
    "check": {"suites": ["all"], "n_samples": 10000, "n_replicas": 1000},
    "output": {"dir": "asqe_out", "formats": ["csv", "json", "asqe"]},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {"n_per_dim": {"type": "integer", "minimum": 8}},
        },
        "operator": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "cutoff_K": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "stream_id": {"type": "integer", "minimum": 0},
                "counterterm": {
                    "anyOf": [{"const": "auto"}, {"type": "number"}]},
                "noise_amplitude": {"type": "number", "minimum": 0.0},
            },
        },
        "measure": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "F_coeffs": {"type": "array",
                             "items": {"type": "number"}},
                "N": {"type": "number", "minimum": 1.0},
                "M": {"type": "number", "exclusiveMinimum": 0.0},
                "sampler": {
                    "type": "object", "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["importance", "pcn"]},
                        "beta": {"type": "number"},
                        "burn_in": {"type": "integer", "minimum": 0},
                        "thin": {"type": "integer", "minimum": 1},
                        "n_samples": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "dynamics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0.0},
                "t_max": {"type": "number", "exclusiveMinimum": 0.0},
                "record_every": {"type": "integer", "minimum": 1},
            },
        },
        "check": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "suites": {"type": "array", "items": {"type": "string"}},
                "n_samples": {"type": "integer", "minimum": 100},
                "n_replicas": {"type": "integer", "minimum": 1000},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array",
                            "items": {"enum": ["csv", "json", "asqe"]}},
            },
        },
    },
}

SUITE_NAMES = ("algebra", "spectrum", "green", "fields", "semigroup",
               "invariance")


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path) -> dict:
    """Merged, schema-valid config with every default materialized."""
    user = {}
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
    try:
        jsonschema.validate(user, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "top level"
        raise ValidationError("config %s: %s" % (where, exc.message))
    cfg = _merge(DEFAULTS, user)
    if 3 * cfg["operator"]["cutoff_K"] > cfg["grid"]["n_per_dim"]:
        raise ValidationError("grid too coarse: need 3*cutoff_K <= n_per_dim")
    return cfg


def potential_from(cfg) -> WickPolynomial | None:
    coeffs = cfg["measure"]["F_coeffs"]
    if not any(coeffs):
        return None
    try:
        return WickPolynomial(tuple(coeffs))
    except ValidationError as exc:
        raise ValidationError("F_coeffs: %s" % exc)


def gibbs_config_from(cfg) -> GibbsConfig:
    m = cfg["measure"]
    s = m["sampler"]
    return GibbsConfig(poly=potential_from(cfg), N=float(m["N"]),
                       M=float(m["M"]) if "M" in m else None,
                       sampler=s["kind"], beta=float(s["beta"]),
                       burn_in=int(s["burn_in"]), thin=int(s["thin"]))


def sim_config_from(cfg) -> SimConfig:
    d = cfg["dynamics"]
    return SimConfig(dt=float(d["dt"]), t_max=float(d["t_max"]),
                     cfg=gibbs_config_from(cfg),
                     record_every=int(d["record_every"]))


def operator_from(cfg):
    o = cfg["operator"]
    n = cfg["grid"]["n_per_dim"]
    if o["noise_amplitude"] == 1.0:
        return get_operator(o["seed"], o["stream_id"], o["cutoff_K"], n,
                            o["counterterm"])
    # scaled or zero noise falls outside the cache key, so build directly
    grid = TorusGrid(n)
    xi = sample_spatial_white_noise(grid, RngSpec(o["seed"], o["stream_id"]))
    xi = Field(grid, o["noise_amplitude"] * xi.values, check=False)
    return build_operator(grid, xi, o["cutoff_K"], o["counterterm"])


def run_meta(cfg) -> dict:
    o = cfg["operator"]
    return {"config": cfg, "config_hash": config_hash(cfg),
            "seeds": {"seed": o["seed"], "stream_id": o["stream_id"],
                      "run_stream_id": o["stream_id"] + 100}}


def run_rng(cfg) -> RngSpec:
    o = cfg["operator"]
    return RngSpec(o["seed"], o["stream_id"] + 100)


def _outdir(cfg) -> str:
    path = cfg["output"]["dir"]
    os.makedirs(path, exist_ok=True)
    return path


def write_csv(path, header, columns, meta) -> None:
    """Plot-ready CSV: one metadata comment line, a header row, then '%.17g'
    rows so reruns reproduce the file byte for byte."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write("# asqe config_hash=%s seeds=%s config=%s\n" % (
            meta["config_hash"], json.dumps(meta["seeds"], sort_keys=True),
            json.dumps(meta["config"], sort_keys=True)))
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_spectrum(cfg) -> int:
    op = operator_from(cfg)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    path = os.path.join(out, "spectrum.csv")
    if "csv" in cfg["output"]["formats"]:
        write_csv(path, ["n", "lambda_n"],
                  [np.arange(op.dim), op.eigenvalues], meta)
    if "json" in cfg["output"]["formats"]:
        write_json(os.path.join(out, "spectrum.json"),
                   {"meta": meta, "dim": op.dim,
                    "lambda_min": float(op.eigenvalues[0]),
                    "lambda_max": float(op.eigenvalues[-1]),
                    "counterterm": op.counterterm, "shift": op.shift})
    print("spectrum: %d eigenvalues in [%.4g, %.4g], wrote %s"
          % (op.dim, op.eigenvalues[0], op.eigenvalues[-1], path))
    return 0


def cmd_green(cfg) -> int:
    op = operator_from(cfg)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    n_val = float(cfg["measure"]["N"])
    kernel = translation_averaged_green(op, n_val)
    x1, x2 = op.grid.meshgrid()
    pts = np.stack([x1.ravel(), x2.ravel()], axis=-1)
    dist = torus_distance(pts, np.zeros(2))
    order = np.argsort(dist, kind="stable")
    path = os.path.join(out, "green.csv")
    if "csv" in cfg["output"]["formats"]:
        write_csv(path, ["distance", "kernel"],
                  [dist[order], kernel.values.ravel()[order]], meta)
    print("green: averaged P_N kernel at N=%g over %d offsets, wrote %s"
          % (n_val, len(dist), path))
    return 0


def cmd_sample_gff(cfg) -> int:
    op = operator_from(cfg)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    n_samples = cfg["measure"]["sampler"]["n_samples"]
    coeffs = gff_coefficients(op, run_rng(cfg), n_samples)
    if "asqe" in cfg["output"]["formats"]:
        write_container(os.path.join(out, "gff.asqe"),
                        {"coefficients": coeffs}, meta)
    if "csv" in cfg["output"]["formats"]:
        write_csv(os.path.join(out, "gff.csv"),
                  ["mode", "sample_var", "target_var"],
                  [np.arange(op.dim), coeffs.var(axis=0, ddof=1),
                   1.0 / op.eigenvalues], meta)
    print("sample-gff: %d draws of %d modes, wrote %s"
          % (n_samples, op.dim, out))
    return 0


def cmd_sample_gibbs(cfg) -> int:
    op = operator_from(cfg)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    gcfg = gibbs_config_from(cfg)
    n_samples = cfg["measure"]["sampler"]["n_samples"]
    coeffs, weights, rate, ess = sample_gibbs_coefficients(
        op, gcfg, n_samples, run_rng(cfg))
    if "asqe" in cfg["output"]["formats"]:
        write_container(os.path.join(out, "gibbs.asqe"),
                        {"coefficients": coeffs, "weights": weights}, meta)
    if "csv" in cfg["output"]["formats"]:
        write_csv(os.path.join(out, "gibbs.csv"),
                  ["mode", "weighted_mean", "weighted_var"],
                  [np.arange(op.dim),
                   np.average(coeffs, axis=0, weights=weights),
                   np.average((coeffs - np.average(
                       coeffs, axis=0, weights=weights)) ** 2,
                       axis=0, weights=weights)], meta)
    extra = "acceptance=%.3f" % rate if rate is not None else "reweighted"
    print("sample-gibbs: %d samples, ess=%.1f, %s, wrote %s"
          % (n_samples, ess, extra, out))
    return 0


def cmd_simulate(cfg) -> int:
    op = operator_from(cfg)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    simcfg = sim_config_from(cfg)
    rng = run_rng(cfg)
    gen = rng.generator()
    u0 = init_stationary_convolution(op, gen)
    traj = evolve(op, simcfg, u0, gen)
    if "asqe" in cfg["output"]["formats"]:
        snaps = np.array([op.coefficients(s) for s in traj.snapshots])
        write_container(os.path.join(out, "trajectory.asqe"),
                        {"times": traj.times, "snapshot_coefficients": snaps,
                         "l2_norm": traj.observables["l2_norm"]}, meta)
    if "csv" in cfg["output"]["formats"]:
        write_csv(os.path.join(out, "simulate.csv"), ["time", "l2_norm"],
                  [traj.times, traj.observables["l2_norm"]], meta)
    if traj.halted:
        raise NumericalError("trajectory blew up at t=%.6g (norm %.3g)"
                             % (traj.halt_time, traj.halt_norm))
    print("simulate: %d snapshots to t=%g, wrote %s"
          % (len(traj.times), traj.times[-1], out))
    return 0


def _suite_reports(cfg, names):
    op = operator_from(cfg)
    o = cfg["operator"]
    reports = []
    for name in names:
        if name == "algebra":
            reports.append(check_algebra(RngSpec(o["seed"],
                                                 o["stream_id"] + 101)))
        elif name == "spectrum":
            grid = TorusGrid(cfg["grid"]["n_per_dim"])
            op_zero = build_operator(grid, Field.zeros(grid),
                                     o["cutoff_K"], 0.0)
            reports.append(check_spectrum(op_zero, op))
        elif name == "green":
            ladder = [float(n) for n in (4, 8, 16) if n <= o["cutoff_K"]]
            reports.append(check_green(op, ladder))
        elif name == "fields":
            reports.append(check_fields(
                op, RngSpec(o["seed"], o["stream_id"] + 102),
                n_samples=cfg["check"]["n_samples"]))
        elif name == "semigroup":
            reports.append(check_semigroup(
                op, RngSpec(o["seed"], o["stream_id"] + 103)))
        elif name == "invariance":
            reports.append(check_invariance(
                op, gibbs_config_from(cfg), sim_config_from(cfg),
                cfg["check"]["n_replicas"],
                RngSpec(o["seed"], o["stream_id"] + 104)))
        else:
            raise ValidationError("unknown check suite %r; choose from %s"
                                  % (name, ", ".join(SUITE_NAMES)))
    return reports


def cmd_check(cfg, suites_arg=None) -> int:
    names = suites_arg if suites_arg else cfg["check"]["suites"]
    if list(names) == ["all"]:
        names = list(SUITE_NAMES)
    meta = run_meta(cfg)
    out = _outdir(cfg)
    reports = _suite_reports(cfg, names)
    ok = True
    for rep in reports:
        n_pass = sum(c.passed for c in rep.cases)
        print("check %s: %d/%d cases passed (%.1fs)"
              % (rep.suite, n_pass, len(rep.cases), rep.wall_time_s))
        ok = ok and rep.all_passed
        if "json" in cfg["output"]["formats"]:
            write_json(os.path.join(out, "check_%s.json" % rep.suite),
                       {"meta": meta, "report": json.loads(rep.to_json())})
    return 0 if ok else 3


def cmd_invariance(cfg) -> int:
    meta = run_meta(cfg)
    out = _outdir(cfg)
    rep = _suite_reports(cfg, ["invariance"])[0]
    if "json" in cfg["output"]["formats"]:
        write_json(os.path.join(out, "invariance.json"),
                   {"meta": meta, "report": json.loads(rep.to_json())})
    n_pass = sum(c.passed for c in rep.cases)
    print("invariance: %d/%d cases passed (%.1fs)"
          % (n_pass, len(rep.cases), rep.wall_time_s))
    return 0 if rep.all_passed else 3


def run_command(argv) -> int:
    parser = argparse.ArgumentParser(
        prog="asqe",
        description="spectral laboratory for stochastic quantization "
                    "with a white-noise Anderson Hamiltonian")
    parser.add_argument("--threads", type=int, default=os.cpu_count(),
                        help="thread budget exported to the BLAS pools "
                             "(default: logical cores)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "green", "sample-gff", "sample-gibbs",
                 "simulate", "invariance", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="JSON config; omitted sections use defaults")
        if name == "check":
            p.add_argument("--suites", default=None,
                           help="comma-separated suite list or 'all'")
    args = parser.parse_args(argv)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    try:
        cfg = load_config(args.config)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "green":
            return cmd_green(cfg)
        if args.command == "sample-gff":
            return cmd_sample_gff(cfg)
        if args.command == "sample-gibbs":
            return cmd_sample_gibbs(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "invariance":
            return cmd_invariance(cfg)
        suites = args.suites.split(",") if args.suites else None
        return cmd_check(cfg, suites)
    except ValidationError as exc:
        _print_error(args, "validation error", exc)
        return 1
    except NumericalError as exc:
        _print_error(args, "numerical failure", exc)
        return 2


def _print_error(args, kind, exc) -> None:
    try:
        cfg = load_config(args.config)
        tag = "config=%s seed=%d stream=%d" % (
            config_hash(cfg), cfg["operator"]["seed"],
            cfg["operator"]["stream_id"])
    except Exception:
        tag = "config=unreadable"
    print("asqe %s (%s): %s" % (kind, tag, exc), file=sys.stderr)


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
