"""Command-line front end: one subcommand per experiment.

Each run reads a JSON configuration (flags override file values), writes a
manifest plus CSV tables into the output directory, and renders the
matching figures alongside them.  Exit codes: 0 all solves converged,
1 configuration error, 2 non-convergence or runtime failure (details in
error.json).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from .analysis import thermal_compare, threshold_surface, trace_selection
from .config import ConfigError, RunConfig, load_config, validate_config
from .dynamics import ConvergenceError, OscillationDetected
from .sweeps import (
    RunManifest,
    SweepAxis,
    SweepSpec,
    _analytic_thresholds,
    _solve_point,
    run_cutoff_scan,
    run_phase_diagram,
    run_pump_sweep,
)
from .units import from_thz

__all__ = [
    "main",
    "cmd_thresholds",
    "cmd_pump_sweep",
    "cmd_phase_diagram",
    "cmd_cutoff_scan",
    "cmd_thermal_check",
    "cmd_steady",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyecav",
        description="Steady-state mode selection in a pumped dye-filled microcavity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("thresholds", "per-mode selection thresholds over a xi grid"),
        ("pump-sweep", "mode populations along an ascending pump chain"),
        ("phase-diagram", "selection boundaries over the (pump, xi) plane"),
        ("cutoff-scan", "first/second selection vs cavity cutoff frequency"),
        ("thermal-check", "steady-state spectrum vs the thermal distribution"),
        ("steady", "a single steady-state solve"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="JSON configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--workers", type=int, metavar="N",
                       help="process count for parallel sweeps")
        p.add_argument("--report-p-over-gamma", action="store_true",
                       help="report pump rates as P/Gamma instead of GHz")
    return parser


def _resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig(validate_config({}))
    if args.report_p_over_gamma:
        cfg.data["output"]["p_over_gamma"] = True
    if args.out:
        cfg.data["output"]["dir"] = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers: must be at least 1")
        cfg.data["sweep"]["workers"] = args.workers
    return cfg


def _out_dir(cfg: RunConfig, command: str) -> str:
    out = cfg["output.dir"] or f"dyecav-{command}"
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(cfg: RunConfig, command: str, params) -> RunManifest:
    """Manifest snapshot; execution context (out dir, workers) is blanked
    so reruns of one manifest are byte-comparable."""
    snapshot = cfg.as_dict()
    snapshot["output"]["dir"] = None
    snapshot["sweep"]["workers"] = None
    return RunManifest.collect(command, snapshot, params, p_unit=cfg.p_unit)


def _pump_grid(cfg: RunConfig, params) -> SweepAxis:
    """Pump axis from absolute bounds if given, else threshold-relative."""
    sweep = cfg.data["sweep"]
    if (sweep["pump_min_GHz"] is None) != (sweep["pump_max_GHz"] is None):
        raise ConfigError(
            "sweep: pump_min_GHz and pump_max_GHz must be set together"
        )
    if sweep["pump_min_GHz"] is not None:
        lo, hi = sweep["pump_min_GHz"] * 1e9, sweep["pump_max_GHz"] * 1e9
    else:
        seed = float(np.min(_analytic_thresholds(params)))
        if not math.isfinite(seed):
            raise ConfigError(
                "sweep: no finite threshold at these parameters; "
                "set pump_min_GHz/pump_max_GHz explicitly"
            )
        lo = sweep["pump_min_over_th"] * seed
        hi = sweep["pump_max_over_th"] * seed
    if sweep["pump_spacing"] == "log":
        return SweepAxis.log("pump", lo, hi, sweep["pump_count"])
    return SweepAxis.linear("pump", lo, hi, sweep["pump_count"])


def _sweep_spec(cfg: RunConfig, params, axes) -> SweepSpec:
    sweep = cfg.data["sweep"]
    seed = None
    slices = sweep["f_slice_pumps_over_th"]
    if slices:
        seed = float(np.min(_analytic_thresholds(params)))
    return SweepSpec(
        axes=axes,
        params=params,
        rtol=cfg["solver.rtol"],
        handoff=cfg["solver.handoff"],
        f_slice_pumps=tuple(x * seed for x in slices) if slices else (),
        cold_checkpoints=sweep["cold_checkpoints"],
        boundary_rel=sweep["boundary_rel"],
        p_span=sweep["p_span"],
    )


# ---------------------------------------------------------------------------
# subcommand handlers (return True when every solve converged)


def cmd_thresholds(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    basis = cfg.build_basis()
    dye = cfg.build_dye()
    xi_grid = np.geomspace(
        cfg["sweep.xi_min"], cfg["sweep.xi_max"], cfg["sweep.thresholds_xi_count"]
    )
    report = threshold_surface(
        xi_grid,
        basis,
        dye,
        Gamma=cfg["system.gamma_GHz"] * 1e9,
        cutoff=from_thz(cfg["system.cutoff_THz"]),
    )
    scale, unit = cfg.p_scale(), cfg.p_unit
    report.write_csv(os.path.join(out, "thresholds.csv"), scale, unit)
    report.write_argmin_csv(os.path.join(out, "argmin.csv"), scale, unit)
    if cfg["output.figures"]:
        from .plots import plot_thresholds

        plot_thresholds(report, os.path.join(out, "thresholds.png"), scale, unit)
    params = cfg.build_params(basis=basis, dye=dye)
    manifest = _manifest(cfg, "thresholds", params)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return True


def cmd_pump_sweep(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    params = cfg.build_params()
    axis = _pump_grid(cfg, params)
    spec = _sweep_spec(cfg, params, [axis])
    result = run_pump_sweep(spec)
    scale, unit = cfg.p_scale(), cfg.p_unit
    result.write_populations_csv(os.path.join(out, "populations.csv"), scale, unit)
    trace = trace_selection(result)
    trace.write_csv(os.path.join(out, "events.csv"), scale, unit)
    _write_f_slices(result, os.path.join(out, "f_slices.csv"), scale, unit)
    if cfg["output.figures"]:
        from .plots import plot_f_slices, plot_pump_sweep

        plot_pump_sweep(result, os.path.join(out, "pump_sweep.png"), scale, unit)
        if any("f_slice" in r for r in result.records):
            plot_f_slices(result, os.path.join(out, "f_slices.png"), scale, unit)
    manifest = _manifest(cfg, "pump-sweep", params)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return result.all_converged


def _write_f_slices(result, path, p_scale, p_unit):
    slices = [(r["pump"], r["f_slice"]) for r in result.records if "f_slice" in r]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not slices:
            writer.writerow(["x_over_d"])
            return
        writer.writerow(
            ["x_over_d"] + [f"f_P_{pump * p_scale:.8g}{p_unit}" for pump, _ in slices]
        )
        x = slices[0][1][0]
        for k in range(len(x)):
            writer.writerow(
                [str(float(x[k]))] + [str(float(sl[1][k])) for _, sl in slices]
            )


def cmd_phase_diagram(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    params = cfg.build_params()
    xi_axis = SweepAxis.log("xi", cfg["sweep.xi_min"], cfg["sweep.xi_max"],
                            cfg["sweep.xi_count"])
    sweep = cfg.data["sweep"]
    if sweep["pump_min_GHz"] is not None and sweep["pump_max_GHz"] is not None:
        p_axis = SweepAxis.log("pump", sweep["pump_min_GHz"] * 1e9,
                               sweep["pump_max_GHz"] * 1e9, 2)
    else:
        gamma = params.gamma
        p_axis = SweepAxis.log("pump", 1e-6 * gamma, 1e8 * gamma, 2)
    spec = _sweep_spec(cfg, params, [xi_axis, p_axis])
    workers = cfg["sweep.workers"] or os.cpu_count() or 1
    diagram = run_phase_diagram(spec, workers=workers)
    scale, unit = cfg.p_scale(), cfg.p_unit
    diagram.write_cells_csv(os.path.join(out, "cells.csv"), scale)
    diagram.boundaries.write_csv(os.path.join(out, "boundaries.csv"), scale, unit)
    if cfg["output.figures"]:
        from .plots import plot_phase_diagram

        plot_phase_diagram(diagram, os.path.join(out, "phase_diagram.png"), scale, unit)
    manifest = _manifest(cfg, "phase-diagram", params)
    for col in sorted(diagram.columns, key=lambda c: c.xi):
        manifest.add_timing(f"column_xi_{col.xi:.8g}", col.wall)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return diagram.all_converged


def cmd_cutoff_scan(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    params = cfg.build_params()
    cutoffs = [from_thz(v) for v in cfg["sweep.cutoffs_THz"]]
    axis = SweepAxis("cutoff", cutoffs)
    spec = _sweep_spec(cfg, params, [axis])
    spec.p_span = cfg["sweep.cutoff_p_span"]
    result = run_cutoff_scan(spec)
    scale, unit = cfg.p_scale(), cfg.p_unit
    result.write_cutoff_csv(os.path.join(out, "cutoffs.csv"), scale, unit)
    if cfg["output.figures"]:
        from .plots import plot_cutoff_scan

        plot_cutoff_scan(result, os.path.join(out, "cutoff_scan.png"), scale, unit)
    manifest = _manifest(cfg, "cutoff-scan", params)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return all(r["converged"] for r in result.records)


def cmd_thermal_check(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    params = cfg.build_params()
    seed = float(np.min(_analytic_thresholds(params)))
    if not math.isfinite(seed):
        raise ConfigError("system: no finite threshold; cannot place the pump")
    pump = cfg["sweep.thermal_pump_over_th"] * seed
    params = params.replace(pump=pump)
    steady, error = _solve_point(params, None, cfg["solver.rtol"], cfg["solver.handoff"])
    if steady is None:
        raise ConvergenceError(f"thermal-check solve failed: {error}")
    fit = thermal_compare(steady, params.dye, params)
    fit.write_csv(os.path.join(out, "thermal.csv"))
    steady.write_csv(os.path.join(out, "steady.csv"))
    with open(os.path.join(out, "thermal_summary.json"), "w") as fh:
        json.dump(
            {
                "pump_Hz": pump,
                "beta_fit_per_J": fit.beta_fit,
                "beta_dye_per_J": fit.beta_ref,
                "slope_ratio": fit.beta_fit / fit.beta_ref,
                "mu_fit_J": fit.mu_fit,
                "modes_in_fit": int(len(fit.included)),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    if cfg["output.figures"]:
        from .plots import plot_thermal_fit

        plot_thermal_fit(fit, os.path.join(out, "thermal_check.png"))
    manifest = _manifest(cfg, "thermal-check", params)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return True


def cmd_steady(cfg: RunConfig, out: str) -> bool:
    t0 = time.perf_counter()
    if cfg["system.pump_GHz"] is None:
        raise ConfigError("system.pump_GHz: required for the steady command")
    params = cfg.build_params(pump=cfg["system.pump_GHz"] * 1e9)
    steady, error = _solve_point(params, None, cfg["solver.rtol"], cfg["solver.handoff"])
    if steady is None:
        raise ConvergenceError(f"steady solve failed: {error}")
    steady.write_csv(os.path.join(out, "steady.csv"))
    steady.write_f_slice(os.path.join(out, "f_slice.csv"))
    if cfg["output.figures"]:
        from .plots import plot_steady

        plot_steady(steady, os.path.join(out, "steady.png"))
    manifest = _manifest(cfg, "steady", params)
    manifest.add_timing("total", time.perf_counter() - t0)
    manifest.write(out)
    return True


_HANDLERS = {
    "thresholds": cmd_thresholds,
    "pump-sweep": cmd_pump_sweep,
    "phase-diagram": cmd_phase_diagram,
    "cutoff-scan": cmd_cutoff_scan,
    "thermal-check": cmd_thermal_check,
    "steady": cmd_steady,
}


def _fail(out: str, command: str, kind: str, message: str) -> None:
    summary = {"command": command, "error": kind, "message": message}
    if out is not None:
        with open(os.path.join(out, "error.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = _out_dir(cfg, args.command)
    except ConfigError as err:
        print(json.dumps({"command": args.command, "error": "ConfigError",
                          "message": str(err)}), file=sys.stderr)
        return 1
    try:
        converged = _HANDLERS[args.command](cfg, out)
    except ConfigError as err:
        _fail(out, args.command, "ConfigError", str(err))
        return 1
    except (ConvergenceError, OscillationDetected) as err:
        _fail(out, args.command, type(err).__name__, str(err))
        return 2
    if not converged:
        _fail(out, args.command, "NonConvergence",
              "one or more cells did not converge; see the result CSVs")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
