"""Command-line interface: ``stiffkrylov <command> [options]``.

Commands
--------
validate   check the structural assumptions of a netlist or matrix set
simulate   one step from t = 0 to t = h
sweep      error grid over (h, m, variant) for one phi route
numrange   sample the C-numerical range of G^{-1} C and fit covering disks
bounds     E(gamma) curve and slope report
gen        write a generated RLC mesh netlist

Exit codes: 0 success, 1 validation or input failure, 2 numerical failure.
Failures print a one-line JSON object on stderr.  ``STIFFKRYLOV_LOG`` sets
the log level (e.g. ``DEBUG``).  ``--config FILE`` reads defaults from a TOML
file whose keys are option names (dashes or underscores); command-line flags
win.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .arnoldi import factor_shifted
from .bounds import (covering_disk_from_box, covering_disk_from_sample, e_gamma_curve,
                     mapped_disk, sample_c_numrange, slope_diagnostics, spectral_box)
from .cases import four_node_example
from .errors import NetlistError, NumericalError, StiffKrylovError, ValidationError
from .evolve import build_bases, single_step
from .model import ORACLE_MAX_N, validate
from .netlist import gen_rlc_mesh, read_netlist, serialize_netlist, stamp_mna
from .oracle import reduced_B11
from .sweep import SweepConfig, run_sweep

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("stiffkrylov")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(ValidationError):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text):
    """Comma list of floats, or ``logspace:a:b:n`` (exponents a..b, n points)."""
    text = str(text).strip()
    if text.startswith("logspace:"):
        try:
            _, a, b, n = text.split(":")
            return [float(x) for x in np.logspace(float(a), float(b), int(n))]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad logspace spec {text!r}") from exc
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _int_list(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _add_source(p, numrange=False):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--netlist", help="netlist file")
    g.add_argument("--matrices", help="directory with C.mtx, G.mtx and optional u0/u1/x0 .csv")
    g.add_argument("--preset", choices=["paper_like"], help="generated mesh preset")
    if numrange:
        g.add_argument("--four-node", action="store_true",
                       help="built-in four-unknown example with a singular C")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (mesh preset, sampling)")


def _add_out(p, default_format="csv"):
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"], default=default_format)


def _add_gamma(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, help="fixed shift for every step size")
    g.add_argument("--gamma-half-h", action="store_true", help="gamma = h/2 (default)")


def build_parser():
    parser = _Parser(prog="stiffkrylov", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="TOML file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.subcommands = sub.choices

    p = sub.add_parser("validate", help="check structural assumptions")
    _add_source(p)
    _add_out(p, "json")

    p = sub.add_parser("simulate", help="single step from t = 0 to t = h")
    _add_source(p)
    p.add_argument("--h", type=float, required=False, help="step size")
    p.add_argument("--m", type=int, default=30, help="maximal Krylov dimension")
    _add_gamma(p)
    p.add_argument("--variant", default="structured-pruned",
                   choices=["structured", "structured-pruned", "plain", "plain-pruned"])
    p.add_argument("--mode", default="combined", choices=["combined", "per-term"])
    p.add_argument("--tol", type=float, default=1e-12, help="breakdown tolerance")
    p.add_argument("--dump-krylov", action="store_true", help="write H.csv, W.mtx, meta.json")
    _add_out(p, "json")

    p = sub.add_parser("sweep", help="error grid over h, m and Arnoldi variants")
    _add_source(p)
    p.add_argument("--h", type=_float_list, default=None,
                   help="step sizes: comma list or logspace:a:b:n")
    p.add_argument("--m", type=_int_list, default=None, help="Krylov dimensions, comma list")
    _add_gamma(p)
    p.add_argument("--phi", type=int, choices=[0, 1, 2], default=2, help="phi route")
    p.add_argument("--variant", action="append",
                   choices=["plain", "plain-pruned", "structured-pruned"],
                   help="repeatable; default all three")
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    _add_out(p)

    p = sub.add_parser("numrange", help="sample the C-numerical range of G^{-1} C")
    _add_source(p, numrange=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--gamma", type=float, default=None, help="shift for the mapped disk")
    _add_out(p)

    p = sub.add_parser("bounds", help="E(gamma) curve and slope report")
    _add_source(p)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--k", type=int, choices=[0, 1, 2], default=0, help="phi order")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--h-over-gamma", type=float, default=2.0, help="delta = h/gamma")
    p.add_argument("--gammas", type=_float_list, default=None,
                   help="gamma grid: comma list or logspace:a:b:n")
    _add_out(p)

    p = sub.add_parser("gen", help="write a generated RLC mesh netlist")
    p.add_argument("--preset", choices=["paper_like"])
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-range", type=_float_list, default=None, help="lo,hi (ohm)")
    p.add_argument("--c-range", type=_float_list, default=None, help="lo,hi (farad)")
    p.add_argument("--l-range", type=_float_list, default=None, help="lo,hi (henry)")
    p.add_argument("--node-caps", type=int, default=0, help="grid nodes with a capacitor")
    p.add_argument("--out", help="netlist file (default: stdout)")
    return parser


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise io.OutputError(path, exc.strerror or str(exc)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return {str(k).replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if known.config:
        cfg = _load_config(known.config)
        command = next((a for a in rest if a in parser.subcommands), None)
        if command is not None:
            sub = parser.subcommands[command]
            actions = {a.dest: a for a in sub._actions}
            unknown = sorted(set(cfg) - set(actions))
            if unknown:
                raise UsageError(f"unknown config key(s) for {command!r}: {', '.join(unknown)}")
            try:
                sub.set_defaults(**{k: _coerce(actions[k], v) for k, v in cfg.items()})
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{known.config}: {exc}") from exc
    return parser.parse_args(rest)


def _coerce(action, val):
    """Config value converted the way the command line would convert it."""
    if action.type in (_float_list, _int_list):
        if isinstance(val, list):
            return action.type(",".join(str(v) for v in val))
        return action.type(val)
    if action.type in (float, int) and not isinstance(val, bool):
        return action.type(val)
    if isinstance(action, argparse._AppendAction) and not isinstance(val, list):
        return [val]
    return val


def _system_from(args):
    """(DaeSystem, notes) from --netlist, --matrices, --preset or --four-node."""
    notes = []
    if getattr(args, "four_node", False):
        return four_node_example(), notes
    if args.netlist:
        stamp = stamp_mna(read_netlist(args.netlist))
        return stamp.system, stamp.warnings
    if args.matrices:
        return io.read_system(args.matrices), notes
    if getattr(args, "preset", None):
        stamp = stamp_mna(gen_rlc_mesh(preset=args.preset, seed=args.seed))
        return stamp.system, stamp.warnings
    raise UsageError("one of --netlist, --matrices or --preset is required")


def _out_dir(args):
    return io.ensure_dir(args.out) if args.out else None


def cmd_validate(args):
    system, notes = _system_from(args)
    rep = validate(system)
    rep.warnings.extend(notes)
    print(rep.summary())
    out = _out_dir(args)
    if out is not None:
        io.write_outputs(rep, out / f"validate.{args.format}", args.format)
    if not rep.ok:
        raise ValidationError("validation failed: C is not symmetric "
                              f"(relative defect {rep.c_symmetry_defect:.3e})")
    return EXIT_OK


def cmd_simulate(args):
    if args.h is None:
        raise UsageError("--h is required")
    system, notes = _system_from(args)
    gamma = args.gamma if args.gamma is not None else args.h / 2
    res = single_step(system, args.h, args.m, gamma=gamma, tol=args.tol,
                      variant=args.variant, mode=args.mode.replace("-", "_"),
                      posterior=True)
    res.warnings.extend(notes)
    bound = res.posterior.posterior_bound if res.posterior is not None else float("nan")
    print(f"t = {res.t!r}  |x| = {np.linalg.norm(res.x_full):.6e}  "
          f"pruned = {res.pruned_count}  posterior bound = {bound:.3e}")
    for w in res.warnings:
        print(f"warning: {w}")
    out = _out_dir(args)
    if out is not None:
        io.write_step_result(out, res, args.format)
        if args.dump_krylov:
            bases = build_bases(system, gamma, args.m, mode=args.mode.replace("-", "_"),
                                variant=args.variant, tol=args.tol,
                                op=factor_shifted(system, gamma))
            for j, K in enumerate(bases.decompositions()):
                io.dump_krylov(out / f"krylov{j}", K)
    return EXIT_OK


def cmd_sweep(args):
    system, _ = _system_from(args)
    hs = args.h if args.h is not None else [float(x) for x in np.logspace(-15, -9, 7)]
    ms = args.m if args.m is not None else [2, 4, 8, 16, 32]
    variants = tuple(args.variant) if args.variant else ("plain", "plain_pruned", "structured_pruned")
    cfg = SweepConfig(hs, ms, gamma="half_h" if args.gamma is None else args.gamma,
                      phi=f"phi{args.phi}", variants=variants, seed=args.seed)
    records = run_sweep(system, cfg, jobs=args.jobs)
    with_bound = system.N > ORACLE_MAX_N
    out = _out_dir(args)
    if out is not None:
        io.write_error_grid(out / f"error_grid.{args.format}", records, args.format, with_bound)
    else:
        cols, rows = io.error_grid_rows(records, with_bound)
        print(",".join(cols))
        for r in rows:
            print(",".join(io.fmt(v) for v in r))
    return EXIT_OK


def cmd_numrange(args):
    system, _ = _system_from(args)
    if system.N > ORACLE_MAX_N:
        raise UsageError(f"numrange needs N <= {ORACLE_MAX_N}")
    P = system.projector
    K = system.g_lu.solve(np.eye(system.N))
    sample = sample_c_numrange(K, system.C, args.samples, seed=args.seed)
    lo, hi = sample.real_range()
    ilo, ihi = sample.imag_range()
    summary = {"samples": sample.count, "seed": args.seed, "redrawn": sample.redrawn,
               "re_min": lo, "re_max": hi, "im_min": ilo, "im_max": ihi}
    try:
        d = covering_disk_from_sample(sample)
        summary["sample_disk"] = {"center": d.center, "radius": d.radius}
    except NumericalError as exc:
        summary["sample_disk"] = str(exc)
    try:
        box = spectral_box(system, "compressed")
        db = covering_disk_from_box(box)
        summary["box"] = {"xi": [box.xi1, box.xi2, box.xi3, box.xi4, box.xi5]}
        summary["box_disk"] = {"center": db.center, "radius": db.radius}
        if args.gamma is not None:
            dm = mapped_disk(db, args.gamma)
            summary["mapped_disk"] = {"gamma": args.gamma, "center": dm.center, "radius": dm.radius}
    except NumericalError as exc:
        summary["box_disk"] = str(exc)
    print(json.dumps(io._jsonable(summary), sort_keys=True))
    out = _out_dir(args)
    if out is not None:
        io.write_points(out / f"numrange.{args.format}", sample.points, args.format)
        io.write_json(out / "disk.json", summary)
        if P.n:
            io.write_eigenvalues(out / f"eig_B11.{args.format}",
                                 np.linalg.eigvals(reduced_B11(system)), args.format)
    return EXIT_OK


def cmd_bounds(args):
    mu1, mu2 = args.mu1, args.mu2
    if mu1 is None or mu2 is None:
        if not (args.netlist or args.matrices or args.preset):
            raise UsageError("give --mu1 and --mu2, or a system to derive them from")
        system, _ = _system_from(args)
        d = covering_disk_from_box(spectral_box(system, "compressed"))
        mu1, mu2 = d.mu1, d.mu2
    if not 0 < mu1 <= mu2:
        raise UsageError("need 0 < mu1 <= mu2")
    gammas = args.gammas
    if gammas is None:
        gammas = [float(g) for g in np.logspace(np.log10(mu1) - 2, np.log10(mu2) + 2, 81)]
    curve = e_gamma_curve(mu1, mu2, args.h_over_gamma, args.m, gammas, args.k)
    rep = slope_diagnostics(curve, mu1, mu2, args.m, args.h_over_gamma, args.k)
    keys = ["k", "m", "delta", "mu1", "mu2", "slope_max_abs_diff", "ratio_increasing"]
    keys += (["cap_shape", "epsilon", "decay_detected", "slope_at_mu1", "formula_slope",
              "formula_cap"] if args.k == 0 else ["min_slope", "slope_ge_k_plus_1",
                                                  "monotone_increasing"])
    print(json.dumps(io._jsonable({k: rep[k] for k in keys}), sort_keys=True))
    out = _out_dir(args)
    if out is not None:
        if args.format == "csv":
            io.write_csv(out / "e_gamma.csv", ("gamma", "E"), curve)
        else:
            io.write_json(out / "e_gamma.json", {"gamma": [g for g, _ in curve],
                                                 "E": [e for _, e in curve]})
        io.write_json(out / "slope_report.json", rep)
    return EXIT_OK


def cmd_gen(args):
    if args.preset:
        net = gen_rlc_mesh(preset=args.preset, seed=args.seed)
    else:
        kw = {}
        for flag, key in (("r_range", "r_value_range"), ("c_range", "c_value_range"),
                          ("l_range", "l_value_range")):
            val = getattr(args, flag)
            if val is not None:
                if len(val) != 2 or not 0 < val[0] <= val[1]:
                    raise UsageError(f"--{flag.replace('_', '-')} needs lo,hi with 0 < lo <= hi")
                kw[key] = tuple(val)
        try:
            net = gen_rlc_mesh(rows=args.rows, cols=args.cols, seed=args.seed,
                               n_node_caps=args.node_caps, **kw)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
    text = serialize_netlist(net)
    if args.out:
        try:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise io.OutputError(args.out, exc.strerror or str(exc)) from exc
        print(f"wrote {args.out}: {net.counts()}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "numrange": cmd_numrange, "bounds": cmd_bounds, "gen": cmd_gen}


def _fail(exc, code):
    msg = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, io.OutputError):
        msg["path"] = exc.path
    if isinstance(exc, NetlistError):
        msg["line"], msg["column"] = exc.line, exc.column
    sys.stderr.write(json.dumps(msg, sort_keys=True) + "\n")
    return code


def main(argv=None):
    level = os.environ.get("STIFFKRYLOV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (StiffKrylovError, ValueError, OSError) as exc:
        return _fail(exc, EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())

__all__ = ["main", "build_parser", "parse_args"]
