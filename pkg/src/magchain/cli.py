"""Command-line surface: reproducible runs with CSV + figure outputs.

Exit codes: 0 success, 2 input error, 3 partial sweep failure, 4 solver or
design failure. Every run writes a manifest next to its outputs; all file
writes go through a temp-then-rename so partial files never appear.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import (default_distance_grid, default_field_grid,
                       default_gamma_grid, efficiency_rows, nonoptimized_profile,
                       sweep, write_efficiency_csv, write_pivot_gamma_csv,
                       write_sweep_csv)
from .catalog import default_catalog, load_catalog_csv, match_catalog
from .config import (default_spec, deg_to_rad, load_spec, rad_to_deg, to_si_dict)
from .design import design_all, load_design_table_csv
from .equilibrium import dump_solver_trace, solve_field_sweep, solve_shape_for_field
from .errors import (ConfigError, DesignError, DomainError, GeometryError,
                     SolverError)
from . import report


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _error_json(exc) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, SolverError) and exc.residual_norm is not None:
        payload["residual_norm"] = exc.residual_norm
    print(json.dumps(payload), file=sys.stderr)


def _atomic(path: Path, writer) -> None:
    # temp name keeps the suffix so format-sniffing writers stay happy
    tmp = path.with_name(f".{path.stem}.tmp{path.suffix}")
    writer(tmp)
    os.replace(tmp, path)


def _resolve_config(path_arg):
    """Config path resolution: explicit path, then MAGCHAIN_CONFIG_DIR,
    then the built-in reference design."""
    if path_arg is None:
        spec, env = default_spec()
        return None, spec, env
    p = Path(path_arg)
    if not p.exists():
        env_dir = os.environ.get("MAGCHAIN_CONFIG_DIR")
        candidate = Path(env_dir) / path_arg if env_dir else None
        if candidate is not None and candidate.exists():
            p = candidate
        else:
            raise ConfigError(f"config file not found: {path_arg}")
    spec, env = load_spec(p)
    return p, spec, env


def _resolve_stiffness(spec, env, design_table_path, auto_design: bool):
    """Attach bending stiffnesses: config values, a design-table CSV, or (if
    allowed) a fresh design run."""
    if design_table_path is not None:
        kb = load_design_table_csv(design_table_path)
        if len(kb) != spec.segment_count:
            raise ConfigError(
                f"design table carries {len(kb)} springs, config wants "
                f"{spec.segment_count}")
        return spec.with_stiffnesses(kb)
    if spec.has_stiffnesses():
        return spec
    if not auto_design:
        raise ConfigError("bending stiffnesses required: set "
                          "segments.bending_stiffness_Nm_per_rad in the config "
                          "or pass --design-table")
    table = design_all(spec, env)
    return spec.with_stiffnesses(table.stiffnesses)


def _write_manifest(out_dir: Path, command: str, config_path, parameters: dict,
                    outputs: list[str], started: float) -> None:
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "parameters": parameters,
        "tool_version": __version__,
        "outputs": sorted(outputs),
        "timing": {
            "started_utc": datetime.datetime.fromtimestamp(
                started, tz=datetime.timezone.utc).isoformat(),
            "duration_s": round(time.time() - started, 3),
        },
    }
    _atomic(out_dir / "manifest.json",
            lambda p: Path(p).write_text(json.dumps(manifest, indent=2) + "\n"))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_design(args) -> int:
    started = time.time()
    config_path, spec, env = _resolve_config(args.config)
    out = _out_dir(args)
    table = design_all(spec, env)
    for warning in table.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    outputs = ["design_table.csv", "design_trace.csv"]
    _atomic(out / "design_table.csv", table.write_csv)
    _atomic(out / "design_trace.csv", table.write_trace_csv)
    if not args.no_figures:
        _atomic(out / "design_table.png", lambda p: report.fig_design_table(table, p))
        outputs.append("design_table.png")
    params = to_si_dict(spec, env)
    params["designed_stiffness_Nm_per_rad"] = [float(k) for k in table.stiffnesses]
    _write_manifest(out, "design", config_path, params, outputs, started)
    return 0


def _cmd_solve(args) -> int:
    started = time.time()
    config_path, spec, env = _resolve_config(args.config)
    spec = _resolve_stiffness(spec, env, args.design_table, auto_design=False)
    if not 1 <= args.t <= spec.segment_count:
        raise ConfigError(f"--t must lie in 1..{spec.segment_count}, got {args.t}")
    if args.theta < 0:
        raise ConfigError("--theta must be non-negative (degrees)")
    out = _out_dir(args)

    theta = deg_to_rad(args.theta)
    config, monotone = solve_field_sweep(theta, args.t, spec, env)
    if not monotone:
        print("warning: non-monotone bend growth during the field sweep "
              "(possible bistability)", file=sys.stderr)
    trace_rows = None
    if args.trace:
        trace_rows = []
        solve_shape_for_field(theta, args.t, spec, env, init=config.alphas,
                              trace=trace_rows)

    def write_shape(path):
        with open(path, "w", newline="") as fh:
            fh.write("# schema: chain_shape v1\n")
            writer = csv.writer(fh)
            writer.writerow(["magnet", "alpha_deg", "x_mm", "y_mm", "z_mm"])
            pos = config.magnet_positions()
            for n in range(1, config.t + 2):
                alpha = (f"{rad_to_deg(float(config.alphas[n - 1])):.6f}"
                         if n <= config.t else "")
                p = pos[n - 1]
                writer.writerow([n, alpha, f"{p[0]*1e3:.6f}", f"{p[1]*1e3:.6f}",
                                 f"{p[2]*1e3:.6f}"])

    outputs = ["shape.csv"]
    _atomic(out / "shape.csv", write_shape)
    if trace_rows is not None:
        _atomic(out / "solver_trace.csv", lambda p: dump_solver_trace(trace_rows, p))
        outputs.append("solver_trace.csv")
    if not args.no_figures:
        _atomic(out / "shape.png", lambda p: report.fig_chain_shape(config, spec, p))
        outputs.append("shape.png")
    params = to_si_dict(spec, env)
    params["solve"] = {"theta_deg": args.theta, "t": args.t,
                       "theta_star_deg": rad_to_deg(config.theta),
                       "alphas_deg": [rad_to_deg(float(a)) for a in config.alphas]}
    _write_manifest(out, "solve", config_path, params, outputs, started)
    return 0


def _cmd_sweep(args) -> int:
    started = time.time()
    config_path, spec, env = _resolve_config(args.config)
    spec = _resolve_stiffness(spec, env, args.design_table, auto_design=True)
    out = _out_dir(args)

    gamma_grid = default_gamma_grid()
    if args.vary == "gamma":
        field_grid = [env.field_magnitude]
        distance_grid = [env.lumen_distance]
        csv_name, fig_name = "pivot_vs_gamma.csv", "pivot_vs_gamma.png"
    elif args.vary == "B":
        field_grid = default_field_grid()
        distance_grid = [env.lumen_distance]
        csv_name, fig_name = "sweep_B.csv", "sweep_B.png"
    else:
        field_grid = [env.field_magnitude]
        distance_grid = default_distance_grid()
        csv_name, fig_name = "sweep_dp.csv", "sweep_dp.png"

    records = sweep(gamma_grid, field_grid, distance_grid, spec, env)
    n_ok = sum(1 for r in records if r.ok)
    for r in records:
        if not r.ok:
            print(f"warning: failed cell gamma={rad_to_deg(r.gamma):.0f} deg, "
                  f"B={r.field_magnitude*1e3:.0f} mT, "
                  f"dp={r.lumen_distance*1e2:.0f} cm: {r.message}",
                  file=sys.stderr)

    outputs = [csv_name]
    if args.vary == "gamma":
        ok_records = [r for r in records if r.ok]
        _atomic(out / csv_name, lambda p: write_pivot_gamma_csv(ok_records, p))
        if not args.no_figures:
            _atomic(out / fig_name, lambda p: report.fig_pivot_vs_gamma(ok_records, p))
            outputs.append(fig_name)
    else:
        _atomic(out / csv_name, lambda p: write_sweep_csv(records, args.vary, p))
        if not args.no_figures:
            _atomic(out / fig_name,
                    lambda p: report.fig_sweep_heatmaps(records, args.vary, p))
            outputs.append(fig_name)

    params = to_si_dict(spec, env)
    params["sweep"] = {"vary": args.vary, "cells": len(records), "ok": n_ok}
    _write_manifest(out, "sweep", config_path, params, outputs, started)
    return 0 if n_ok >= 0.95 * len(records) else 3


def _cmd_efficiency(args) -> int:
    started = time.time()
    config_path, spec, env = _resolve_config(args.config)
    spec = _resolve_stiffness(spec, env, args.design_table, auto_design=True)
    out = _out_dir(args)

    if args.gammas:
        try:
            gammas = [deg_to_rad(float(v)) for v in args.gammas.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--gammas must be comma-separated degrees: {exc}")
    else:
        gammas = default_gamma_grid()

    if args.profile == "nonoptimized":
        spec_run = spec.with_stiffnesses(nonoptimized_profile(spec.stiffness_vector()))
    else:
        spec_run = spec
    rows = efficiency_rows(gammas, spec_run, env, profile=args.profile)

    outputs = ["efficiency.csv"]
    _atomic(out / "efficiency.csv", lambda p: write_efficiency_csv(rows, p))
    if not args.no_figures:
        _atomic(out / "efficiency.png", lambda p: report.fig_efficiency(rows, p))
        outputs.append("efficiency.png")
    params = to_si_dict(spec_run, env)
    params["efficiency"] = {"profile": args.profile,
                            "gammas_deg": [rad_to_deg(g) for g in gammas]}
    _write_manifest(out, "efficiency", config_path, params, outputs, started)
    return 0


def _cmd_match_springs(args) -> int:
    started = time.time()
    kb = load_design_table_csv(args.design_table)
    catalog = (load_catalog_csv(args.catalog) if args.catalog
               else default_catalog())
    out = _out_dir(args)
    matches = match_catalog(kb, catalog)

    def write_matches(path):
        with open(path, "w", newline="") as fh:
            fh.write("# schema: spring_match v1\n")
            writer = csv.writer(fh)
            writer.writerow(["n", "kb_design_Nm_per_rad", "kb_matched_Nm_per_rad",
                             "e_kb_pct", "d_mm", "D_mm", "c", "kc_N_per_m"])
            for m in matches:
                g = m.entry.geometry
                geo = ([f"{g.wire_diameter*1e3:.6g}", f"{g.outer_diameter*1e3:.6g}",
                        f"{g.active_coils:.6g}"] if g else ["", "", ""])
                kc = m.entry.compression_stiffness
                writer.writerow([m.index, f"{m.design_value:.9e}",
                                 f"{m.entry.bending_stiffness:.9e}",
                                 f"{m.relative_error*100:.6f}"] + geo
                                + [f"{kc:.6f}" if kc is not None else ""])

    outputs = ["spring_match.csv"]
    _atomic(out / "spring_match.csv", write_matches)
    if not args.no_figures:
        _atomic(out / "spring_match.png",
                lambda p: report.fig_spring_match(matches, p))
        outputs.append("spring_match.png")
    params = {"design_table": str(args.design_table),
              "catalog": str(args.catalog) if args.catalog else "builtin",
              "e_kb_pct": [m.relative_error * 100 for m in matches]}
    _write_manifest(out, "match-springs", None, params, outputs, started)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magchain",
        description="Design and analysis toolkit for magnetically actuated "
                    "magnet-spring chain catheters.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, design_table=True):
        p.add_argument("--config", default=None,
                       help="config YAML (mm/mT/deg units); falls back to "
                            "$MAGCHAIN_CONFIG_DIR, then built-in defaults")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--no-figures", action="store_true",
                       help="skip PNG rendering")
        if design_table:
            p.add_argument("--design-table", default=None,
                           help="design_table.csv supplying bending stiffnesses "
                                "(N·m/rad)")

    p = sub.add_parser("design", help="compute the gradient stiffness ladder")
    common(p, design_table=False)
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("solve", help="chain shape for one field direction")
    common(p)
    p.add_argument("--theta", type=float, required=True,
                   help="field direction angle, degrees from the parent axis")
    p.add_argument("--t", type=int, required=True,
                   help="number of unsupported segments (1..N)")
    p.add_argument("--trace", action="store_true",
                   help="dump Newton iterations of the verification solve")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="pivot-stability parameter sweeps")
    common(p)
    p.add_argument("--vary", choices=("gamma", "B", "dp"), required=True,
                   help="sweep variable: steering direction (deg grid 0..180), "
                        "field magnitude (35..45 mT), or lumen distance "
                        "(4..14 cm)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("efficiency", help="bending/propulsion efficiency report")
    common(p)
    p.add_argument("--profile", choices=("optimized", "nonoptimized"),
                   default="optimized",
                   help="stiffness profile: the designed ladder or the "
                        "stiffened comparison profile")
    p.add_argument("--gammas", default=None,
                   help="comma-separated steering directions in degrees "
                        "(default 0..180 step 10)")
    p.set_defaults(func=_cmd_efficiency)

    p = sub.add_parser("match-springs", help="match designs to a spring catalog")
    p.add_argument("--design-table", required=True,
                   help="design_table.csv with the target stiffnesses")
    p.add_argument("--catalog", default=None,
                   help="catalog CSV (d_mm, D_mm, c, kb_Nm_per_rad, kc_N_per_m); "
                        "defaults to the built-in synthetic grid")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering")
    p.set_defaults(func=_cmd_match_springs)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, GeometryError) as exc:
        _error_json(exc)
        return 2
    except (SolverError, DesignError) as exc:
        _error_json(exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
