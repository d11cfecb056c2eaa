"""Command-line harness: configured runs, refinement studies, density checks
and quasi-static loop traces, all emitting reproducible CSV/JSON artifacts.

Exit codes: 0 ok, 2 configuration error, 3 solver error, 4 admissibility
check failed, 5 output I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import (DEFAULTS_YAML, build_density, build_material,
                     config_hash, parse_config)
from .errors import ConfigError, PiezorodError
from .hypotheses import hypothesis_report
from .loops import q_loop_trace, strain_loop_trace
from .solver import (SNAPSHOT_COLUMNS, TRACE_COLUMNS, run_simulation,
                     save_checkpoint)
from .studies import converge_study

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_HYPOTHESIS = 4
EXIT_IO = 5


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _run_dir(args, cfg):
    if args.outdir:
        out = Path(args.outdir)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = Path("runs") / f"{config_hash(cfg)}-{stamp}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
    return cfg


def _check_admissibility(cfg):
    report = hypothesis_report(build_density(cfg), build_material(cfg))
    return report


def cmd_run(args):
    cfg = _load_config(args)
    out = _run_dir(args, cfg)
    report = _check_admissibility(cfg)
    if not report.passed and not cfg.allow_hypothesis_fail:
        (out / "summary.json").write_text(json.dumps({
            "completed": False,
            "error": "admissibility check failed: "
                     + ", ".join(report.failing_items()),
        }, indent=2, sort_keys=True))
        print(f"[run] admissibility check failed: {report.failing_items()}",
              file=sys.stderr)
        return EXIT_HYPOTHESIS

    result = run_simulation(cfg)

    _write_csv(out / "trace.csv", TRACE_COLUMNS,
               [tr.as_row() for tr in result.traces])
    for idx, (t, snap) in enumerate(result.snapshots):
        rows = np.column_stack([snap[c] for c in SNAPSHOT_COLUMNS])
        _write_csv(out / f"fields_{idx:06d}.csv", SNAPSHOT_COLUMNS, rows)
    if result.final_state is not None:
        save_checkpoint(out / "checkpoint.json", result.final_state,
                        config_hash=config_hash(cfg))
    summary = dict(result.summary)
    summary["config_hash"] = config_hash(cfg)
    summary["admissibility_passed"] = report.passed
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True))

    print(f"[run] {summary['n_steps']} steps, final energy "
          f"{summary['final_energy']:.6g}, min theta {summary['min_theta']:.4g}"
          f" -> {out}")
    if not result.completed:
        print(f"[run] aborted: {result.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_converge(args):
    cfg = _load_config(args)
    out = _run_dir(args, cfg)
    modes = [int(tok) for tok in args.modes.split(",") if tok]
    dts = [float(tok) for tok in args.dts.split(",")] if args.dts else None
    study = converge_study(cfg, modes, dts=dts)

    rows = [(r["m"], r["nodes"], r["dt"], r["energy_drift"],
             r["l2_dist_u"], r["l2_dist_theta"]) for r in study["modes"]]
    _write_csv(out / "converge.csv",
               ("m", "nodes", "dt", "energy_drift", "l2_dist_u",
                "l2_dist_theta"), rows)
    if study["dts"]:
        _write_csv(out / "converge_dt.csv", ("m", "dt", "energy_drift"),
                   [(r["m"], r["dt"], r["energy_drift"]) for r in study["dts"]])
    for r in study["modes"]:
        print(f"[converge] m={r['m']:3d} drift={r['energy_drift']:.3e} "
              f"dist_u={r['l2_dist_u']:.3e} dist_theta={r['l2_dist_theta']:.3e}")
    for r in study["dts"]:
        print(f"[converge] dt={r['dt']:.3e} drift={r['energy_drift']:.3e}")
    print(f"[converge] table -> {out}")
    return EXIT_OK


def cmd_check_density(args):
    cfg = _load_config(args)
    report = _check_admissibility(cfg)
    text = report.to_json()
    if args.outdir:
        out = _run_dir(args, cfg)
        (out / "density_report.json").write_text(text)
        print(f"[check-density] report -> {out / 'density_report.json'}")
    else:
        print(text)
    if not report.passed:
        print(f"[check-density] FAIL: {report.failing_items()}",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    print("[check-density] all items pass", file=sys.stderr)
    return EXIT_OK


def cmd_loops(args):
    cfg = _load_config(args)
    out = _run_dir(args, cfg)
    density = build_density(cfg)
    material = build_material(cfg)
    temps = ([float(tok) for tok in args.temperatures.split(",")]
             if args.temperatures else [material.theta_c])

    q_rows = []
    s_rows = []
    for theta in temps:
        trace = q_loop_trace(density, theta, args.amplitude, args.cycles,
                             args.samples, r_nodes=cfg.density.r_nodes,
                             r_rule=cfg.density.r_rule)
        for i in range(trace["q"].size):
            q_rows.append((theta, i, trace["q"][i], trace["P"][i],
                           trace["U"][i], trace["diss_cum"][i]))
        print(f"[loops] theta={theta:g}: cycle area={trace['cycle_area']:.6g} "
              f"dissipation={trace['cycle_dissipation']:.6g}")
        strain = strain_loop_trace(material, density, theta, args.amplitude,
                                   args.cycles, args.samples,
                                   r_nodes=cfg.density.r_nodes,
                                   r_rule=cfg.density.r_rule,
                                   tol=cfg.discretization.tol_q)
        for i in range(strain["eps"].size):
            s_rows.append((theta, i, strain["eps"][i], strain["sigma"][i],
                           strain["q"][i], strain["P"][i], strain["U"][i],
                           strain["E_field"][i]))
    _write_csv(out / "loops_q.csv",
               ("theta", "sample", "q", "P", "U", "diss_cum"), q_rows)
    _write_csv(out / "loops_strain.csv",
               ("theta", "sample", "eps", "sigma", "q", "P", "U", "E_field"),
               s_rows)
    print(f"[loops] traces -> {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="piezorod",
        description="Simulate 1D oscillations of a thermo-piezoelectric rod "
                    "with temperature-dependent hysteresis.")
    parser.add_argument("--print-defaults", action="store_true",
                        help="print the default configuration (annotated YAML)"
                             " and exit")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("config", help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--outdir", default=None,
                       help="output directory (default: runs/<hash>-<stamp>)")

    p_run = sub.add_parser("run", help="execute a scenario")
    add_common(p_run)

    p_conv = sub.add_parser("converge", help="mode-refinement study")
    add_common(p_conv)
    p_conv.add_argument("--modes", default="4,8,16",
                        help="comma-separated increasing mode counts")
    p_conv.add_argument("--dts", default=None,
                        help="optional comma-separated step sizes to compare")

    p_chk = sub.add_parser("check-density",
                           help="run the admissibility checker")
    add_common(p_chk)

    p_loops = sub.add_parser("loops", help="quasi-static hysteresis loops")
    add_common(p_loops)
    p_loops.add_argument("--amplitude", type=float, default=2.0)
    p_loops.add_argument("--cycles", type=int, default=2)
    p_loops.add_argument("--samples", type=int, default=2048,
                         help="samples per drive leg")
    p_loops.add_argument("--temperatures", default=None,
                         help="comma-separated temperatures (default theta_c)")

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        print(DEFAULTS_YAML, end="")
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    handlers = {"run": cmd_run, "converge": cmd_converge,
                "check-density": cmd_check_density, "loops": cmd_loops}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"[config] {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"[io] {exc}", file=sys.stderr)
        return EXIT_IO
    except PiezorodError as exc:
        print(f"[solver] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
