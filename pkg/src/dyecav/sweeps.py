"""Parameter sweeps: pump sweeps, (pump, xi) phase diagrams, cutoff scans.

Steady-state solves are orchestrated into warm-start chains along the pump
axis; phase-diagram columns (one per xi) are independent work units
dispatched to a process pool.  All scheduling is deterministic: a run's
result files depend only on its manifest, never on worker count or timing.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import math
import multiprocessing
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _pkg_version
from .analysis import extract_phase_boundaries, pump_for_gain
from .dye import DyeModel
from .dynamics import (
    ConvergenceError,
    OscillationDetected,
    SteadyState,
    SystemParams,
    SystemState,
    evolve_to_steady,
    solve_self_consistent,
)
from .modes import ModeBasis, SpatialGrid
from .units import thz

__all__ = [
    "SweepAxis",
    "SweepSpec",
    "SweepResult",
    "ColumnResult",
    "PhaseDiagram",
    "RunManifest",
    "run_pump_sweep",
    "run_phase_diagram",
    "run_cutoff_scan",
    "locate_first_selection",
]


@dataclass(eq=False)
class SweepAxis:
    """One swept parameter: a name and a strictly monotone value grid."""

    name: str
    values: np.ndarray
    spacing: str = "explicit"  # "linear" | "log" | "explicit"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValueError(f"axis {self.name!r} needs a 1-D non-empty grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"axis {self.name!r} has non-finite values")
        d = np.diff(self.values)
        if len(d) and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"axis {self.name!r} must be strictly monotone")

    @classmethod
    def linear(cls, name: str, lo: float, hi: float, count: int) -> "SweepAxis":
        return cls(name, np.linspace(lo, hi, count), spacing="linear")

    @classmethod
    def log(cls, name: str, lo: float, hi: float, count: int) -> "SweepAxis":
        if lo <= 0 or hi <= 0:
            raise ValueError("log axis bounds must be positive")
        return cls(name, np.geomspace(lo, hi, count), spacing="log")


@dataclass(eq=False)
class SweepSpec:
    """A sweep request: axes, fixed system parameters, solver policy.

    The phase-diagram pump axis is interpreted as a search window (adaptive
    bracketing resolves the boundaries inside it); pump-sweep and cutoff
    axes are solved point by point.
    """

    axes: list
    params: SystemParams
    warm_start: bool = True
    rtol: float = 1e-9
    handoff: float = 1e-3
    deterministic: bool = True
    f_slice_pumps: tuple = ()
    cold_checkpoints: int = 0
    boundary_rel: float = 1e-3
    p_span: float = 3000.0
    saturation_level: float = 1.0 - 1e-3

    def __post_init__(self):
        if not self.axes:
            raise ValueError("at least one sweep axis is required")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate axis names")
        if not self.deterministic:
            raise ValueError("non-deterministic sweeps are not supported")
        if self.boundary_rel <= 0 or self.p_span <= 1:
            raise ValueError("boundary_rel must be > 0 and p_span > 1")

    def axis(self, name: str) -> SweepAxis:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(f"no axis named {name!r}")


@dataclass(eq=False)
class SweepResult:
    """Ordered per-point records of a one-axis sweep."""

    kind: str  # "pump-sweep" | "cutoff-scan"
    axis: str
    values: np.ndarray
    records: list
    basis: ModeBasis
    params: SystemParams
    meta: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(r["converged"] for r in self.records)

    def write_populations_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz"):
        """Mode populations vs pump, one column per mode."""
        labels = [m.token for m in self.basis.modes]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"P_{p_unit}"] + [f"n_{lab}" for lab in labels] + ["converged"])
            for rec in self.records:
                ns = rec["n"]
                row = [str(float(rec["pump"] * p_scale))]
                if ns is None:
                    row += [""] * len(labels)
                else:
                    row += [str(float(v)) for v in ns]
                row.append(1 if rec["converged"] else 0)
                writer.writerow(row)

    def write_cutoff_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz"):
        """Per-cutoff summary: first selection, second selection, saturation."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "cutoff_THz",
                    f"P_first_{p_unit}",
                    "first_modes",
                    f"P_second_{p_unit}",
                    "second_modes",
                    "saturated",
                    "error",
                ]
            )
            for rec in self.records:
                writer.writerow(
                    [
                        str(thz(rec["cutoff"])),
                        "" if rec["p_first"] is None else str(float(rec["p_first"] * p_scale)),
                        _mode_tokens(self.basis, rec["first_set"]),
                        "" if rec["p_second"] is None else str(float(rec["p_second"] * p_scale)),
                        _mode_tokens(self.basis, rec["second_set"]),
                        1 if rec["saturated"] else 0,
                        rec["error"] or "",
                    ]
                )


def _mode_tokens(basis: ModeBasis, indices) -> str:
    if not indices:
        return ""
    modes = basis.modes
    return ";".join(modes[i].token for i in sorted(indices))


@dataclass(eq=False)
class ColumnResult:
    """Boundary data for one xi column of the phase diagram."""

    xi: float
    ground_index: int
    analytic_min_pump: float
    p_first: float | None
    first_set: frozenset | None
    p_second: float | None
    second_set: frozenset | None
    saturated: bool
    p_sat: float | None
    cells: list  # (pump, selected frozenset | None, converged bool)
    n_solves: int
    unresolved: int
    wall: float


@dataclass(eq=False)
class PhaseDiagram:
    """Adaptive (pump, xi) phase diagram: per-cell labels plus boundaries."""

    columns: list
    basis: ModeBasis
    params: SystemParams
    meta: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(c.unresolved == 0 for c in self.columns)

    @property
    def boundaries(self):
        return extract_phase_boundaries(self)

    def iter_cells(self):
        """All solved cells sorted by (xi, pump)."""
        for col in sorted(self.columns, key=lambda c: c.xi):
            for pump, selected, converged in sorted(col.cells, key=lambda c: c[0]):
                yield col, pump, selected, converged

    def write_cells_csv(self, path, p_scale: float = 1e-9):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["xi", "P", "n_selected", "ground_selected", "selected_modes", "converged"]
            )
            for col, pump, selected, converged in self.iter_cells():
                if converged:
                    writer.writerow(
                        [
                            str(float(col.xi)),
                            str(float(pump * p_scale)),
                            len(selected),
                            1 if col.ground_index in selected else 0,
                            _mode_tokens(self.basis, selected),
                            1,
                        ]
                    )
                else:
                    writer.writerow(
                        [str(float(col.xi)), str(float(pump * p_scale)), "", "", "", 0]
                    )


def grid_checksum(grid: SpatialGrid) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(grid.axis).tobytes())
    h.update(np.ascontiguousarray(grid.axis_weights).tobytes())
    return h.hexdigest()


def basis_checksum(basis: ModeBasis) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(basis.energies).tobytes())
    h.update(np.ascontiguousarray(basis.quantum_numbers).tobytes())
    h.update(grid_checksum(basis.grid).encode())
    return h.hexdigest()


def dye_provenance(dye: DyeModel) -> dict:
    """Serializable description of where the rates came from."""
    if dye.source == "surrogate":
        return {
            "kind": "surrogate",
            "r_up_at_calibration": dye.r_up_at_calibration,
            "calibration_freq_THz": thz(dye.calibration_freq),
            "log_slope_per_Hz": dye.log_slope,
            "zero_phonon_THz": thz(dye.zero_phonon_freq),
            "ks_constant": dye.ks_constant,
            "beta_per_J": dye.beta,
            "density_per_d2": dye.density,
        }
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(dye.table_freq).tobytes())
    h.update(np.ascontiguousarray(dye.table_log_up).tobytes())
    h.update(np.ascontiguousarray(dye.table_log_down).tobytes())
    return {
        "kind": "tabulated",
        "file_sha256": getattr(dye, "source_digest", None),
        "table_sha256": h.hexdigest(),
        "rows": int(len(dye.table_freq)),
        "zero_phonon_THz": thz(dye.zero_phonon_freq),
        "ks_constant": dye.ks_constant,
        "beta_per_J": dye.beta,
        "density_per_d2": dye.density,
        "ks_violation_max": dye.ks_violation_max,
    }


@dataclass(eq=False)
class RunManifest:
    """Reproducibility record written beside every run's result files.

    The JSON itself contains only inputs (resolved configuration, dye
    provenance, grid/basis checksums, software versions) so that it is
    byte-identical between reruns; wall-clock timings go to a separate
    timings.csv sidecar which is excluded from reproducibility comparisons.
    """

    command: str
    config: dict
    dye: dict
    basis_checksum: str
    grid_checksum: str
    versions: dict
    p_unit: str = "GHz"
    timings: list = field(default_factory=list, repr=False)

    @classmethod
    def collect(cls, command: str, config: dict, params: SystemParams, p_unit: str = "GHz"):
        versions = {
            "package": _pkg_version,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        try:
            import scipy

            versions["scipy"] = scipy.__version__
        except ImportError:  # pragma: no cover
            pass
        return cls(
            command=command,
            config=config,
            dye=dye_provenance(params.dye),
            basis_checksum=basis_checksum(params.basis),
            grid_checksum=grid_checksum(params.basis.grid),
            versions=versions,
            p_unit=p_unit,
        )

    def add_timing(self, label: str, seconds: float):
        self.timings.append((label, seconds))

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "dye": self.dye,
            "basis_checksum": self.basis_checksum,
            "grid_checksum": self.grid_checksum,
            "versions": self.versions,
            "p_unit": self.p_unit,
        }

    def write(self, out_dir):
        with open(f"{out_dir}/manifest.json", "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(f"{out_dir}/timings.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["label", "seconds"])
            for label, seconds in self.timings:
                writer.writerow([label, str(float(seconds))])


# ---------------------------------------------------------------------------
# solving helpers


def _solve_point(params: SystemParams, initial, rtol, handoff):
    """One steady-state solve; returns (steady | None, error | None).

    Warm starts integrate from the supplied state; cold starts use the
    fixed-point solver with the integrator as fall-back, per its contract.
    """
    try:
        if initial is not None:
            return evolve_to_steady(initial, params, rtol=rtol, handoff=handoff), None
        try:
            return solve_self_consistent(params, rtol=rtol, handoff=handoff), None
        except OscillationDetected:
            return evolve_to_steady(None, params, rtol=rtol, handoff=handoff), None
    except ConvergenceError as err:
        return None, str(err)


def _warm_state(steady: SteadyState) -> SystemState:
    return SystemState(n=steady.state.n.copy(), f=steady.state.f.copy())


def run_pump_sweep(spec: SweepSpec) -> SweepResult:
    """Solve an ascending chain of pumps, warm-starting each point.

    Per-point non-convergence is recorded (converged flag False, error
    message kept) and the chain restarts cold at the next point.  Records
    carry the occupations, gains, selected sets and, for pumps listed in
    ``spec.f_slice_pumps``, the excited-fraction slice along x.
    """
    axis = spec.axis("pump")
    pumps = axis.values
    slice_idx = _nearest_indices(pumps, spec.f_slice_pumps)
    check_idx = _checkpoint_indices(len(pumps), spec.cold_checkpoints)
    records = []
    prev = None
    for k, pump in enumerate(pumps):
        params_k = spec.params.replace(pump=float(pump))
        initial = prev if (spec.warm_start and prev is not None) else None
        steady, error = _solve_point(params_k, initial, spec.rtol, spec.handoff)
        rec = {
            "pump": float(pump),
            "converged": steady is not None,
            "error": error,
        }
        if steady is None:
            rec.update(n=None, gains=None, g_th=None, selected=None, residual=None,
                       solver=None, f_max=None)
            prev = None
        else:
            rec.update(
                n=steady.state.n.copy(),
                gains=steady.gains.copy(),
                g_th=params_k.rates.threshold_gain(params_k.kappa),
                selected=steady.selected,
                residual=steady.residual,
                solver=steady.meta.get("solver"),
                f_max=float(steady.state.f.max()),
            )
            if k in slice_idx:
                grid = spec.params.basis.grid
                j = int(np.argmin(np.abs(grid.axis)))
                rec["f_slice"] = (grid.axis.copy(), steady.state.f[:, j].copy())
            if k in check_idx:
                cold, cold_err = _solve_point(params_k, None, spec.rtol, spec.handoff)
                if cold is None:
                    rec["cold_check"] = {"error": cold_err}
                else:
                    rec["cold_check"] = _compare_states(steady, cold)
            prev = _warm_state(steady)
        records.append(rec)
    return SweepResult(
        kind="pump-sweep",
        axis="pump",
        values=pumps,
        records=records,
        basis=spec.params.basis,
        params=spec.params,
    )


def _nearest_indices(values: np.ndarray, targets) -> set:
    return {int(np.argmin(np.abs(values - t))) for t in targets}


def _checkpoint_indices(n: int, count: int) -> set:
    if count <= 0:
        return set()
    return {int(i) for i in np.linspace(0, n - 1, min(count, n)).round()}


def _compare_states(a: SteadyState, b: SteadyState) -> dict:
    """Selected-set match and worst relative deviation over n > 1."""
    mask = (a.state.n > 1.0) | (b.state.n > 1.0)
    if np.any(mask):
        dev = float(
            np.max(
                np.abs(a.state.n[mask] - b.state.n[mask])
                / np.maximum(a.state.n[mask], b.state.n[mask])
            )
        )
    else:
        dev = 0.0
    return {"sets_match": a.selected == b.selected, "max_rel_dev": dev}


def _analytic_thresholds(params: SystemParams) -> np.ndarray:
    """Per-mode first-threshold pumps from the gain condition."""
    gth = params.rates.threshold_gain(params.kappa)
    with np.errstate(divide="ignore"):
        p = np.where(gth < 1.0, pump_for_gain(np.minimum(gth, 1.0 - 1e-15), params.gamma), np.inf)
    return p


def locate_first_selection(
    params: SystemParams,
    rel: float = 1e-3,
    margin: float = 3e-3,
    rtol: float = 1e-9,
    handoff: float = 1e-3,
):
    """Bisect the pump at which some mode's gain first reaches threshold.

    The crossing predicate is max_i G_i/G_i^th >= 1 - margin, evaluated on
    converged steady states; bisection warm-starts from the sub-threshold
    side.  Returns (pump, info) with the bracketing states in info.
    """
    gth = params.rates.threshold_gain(params.kappa)
    seed = float(np.min(_analytic_thresholds(params)))
    if not math.isfinite(seed):
        raise ValueError("no mode has a finite first threshold at these parameters")

    def probe(pump, initial):
        steady, error = _solve_point(
            params.replace(pump=pump), initial, rtol, handoff
        )
        if steady is None:
            raise ConvergenceError(f"threshold probe failed at P = {pump}: {error}")
        level = float(np.max(steady.gains / gth))
        return steady, level >= 1.0 - margin

    lo = seed * 0.7
    steady_lo, crossed = probe(lo, None)
    guard = 0
    while crossed:
        lo *= 0.7
        steady_lo, crossed = probe(lo, None)
        guard += 1
        if guard > 200:
            raise RuntimeError("threshold bracketing failed to find a lower bound")
    hi = lo * 1.4
    steady_hi, crossed = probe(hi, _warm_state(steady_lo))
    while not crossed:
        lo, steady_lo = hi, steady_hi
        hi *= 1.4
        steady_hi, crossed = probe(hi, _warm_state(steady_lo))
        guard += 1
        if guard > 200:
            raise RuntimeError("threshold bracketing failed to find an upper bound")
    while (hi - lo) / lo > rel:
        mid = 0.5 * (lo + hi)
        steady_mid, crossed = probe(mid, _warm_state(steady_lo))
        if crossed:
            hi, steady_hi = mid, steady_mid
        else:
            lo, steady_lo = mid, steady_mid
    pump = 0.5 * (lo + hi)
    info = {"lo": lo, "hi": hi, "steady_lo": steady_lo, "steady_hi": steady_hi,
            "analytic_seed": seed}
    return pump, info


# ---------------------------------------------------------------------------
# phase diagram


def _phase_column(
    params: SystemParams,
    p_window,
    rtol: float = 1e-9,
    handoff: float = 1e-3,
    rel: float = 1e-3,
    p_span: float = 3000.0,
    saturation_level: float = 1.0 - 1e-3,
) -> ColumnResult:
    """Resolve the selection boundaries of one xi column.

    The first-selection pump is bisected on the detector predicate
    (selected set non-empty); if the first event selects a single mode, the
    pump marches geometrically until a second selection, gain saturation
    (max f above the configured level) or the window edge, and the second
    boundary is bisected inside the last march interval.
    """
    t0 = time.perf_counter()
    xi = params.xi
    ground = int(np.argmin(params.basis.energies))
    analytic = _analytic_thresholds(params)
    seed = float(np.min(analytic))
    p_lo_window, p_hi_window = p_window
    cells = []
    counters = {"solves": 0, "unresolved": 0}

    def S(pump, initial):
        counters["solves"] += 1
        steady, _ = _solve_point(params.replace(pump=pump), initial, rtol, handoff)
        if steady is None:
            counters["unresolved"] += 1
            cells.append((pump, None, False))
            return None, None
        cells.append((pump, steady.selected, True))
        return _warm_state(steady), steady.selected

    def finish(p_first=None, first_set=None, p_second=None, second_set=None,
               saturated=False, p_sat=None):
        return ColumnResult(
            xi=float(xi),
            ground_index=ground,
            analytic_min_pump=seed,
            p_first=p_first,
            first_set=first_set,
            p_second=p_second,
            second_set=second_set,
            saturated=saturated,
            p_sat=p_sat,
            cells=cells,
            n_solves=counters["solves"],
            unresolved=counters["unresolved"],
            wall=time.perf_counter() - t0,
        )

    lo = min(max(seed * 0.5, p_lo_window), p_hi_window) if math.isfinite(seed) else p_lo_window
    state_lo, sel_lo = S(lo, None)
    guard = 0
    while sel_lo and lo > p_lo_window:
        lo = max(lo * 0.5, p_lo_window)
        state_lo, sel_lo = S(lo, None)
        guard += 1
        if guard > 100:
            break
    if sel_lo:
        # selection persists down to the window edge: boundary not bracketable
        return finish(p_first=lo, first_set=sel_lo)
    hi = lo * 2.0
    state_hi, sel_hi = S(hi, state_lo)
    while not sel_hi:
        if hi >= p_hi_window:
            return finish()  # no selection anywhere in the window
        lo, state_lo = hi, state_hi
        hi = min(hi * 1.6, p_hi_window)
        state_hi, sel_hi = S(hi, state_lo)
    first_set = sel_hi
    while (hi - lo) / lo > rel:
        mid = 0.5 * (lo + hi)
        state, sel = S(mid, state_lo)
        if sel:
            hi, first_set = mid, sel
        else:
            lo, state_lo = mid, state
    p_first = 0.5 * (lo + hi)

    if len(first_set) >= 2:
        # quasi-degenerate group selected together: boundaries merge
        return finish(p_first=p_first, first_set=first_set,
                      p_second=p_first, second_set=first_set)

    lo2, state2 = p_first, state_lo
    pump = min(p_first * 1.3, p_hi_window)
    p_cap = min(seed * p_span, p_hi_window)
    while True:
        state, sel = S(pump, state2)
        if state is not None and _cell_f_max(state) > saturation_level:
            return finish(p_first=p_first, first_set=first_set,
                          saturated=True, p_sat=pump)
        if sel is not None and len(sel) >= 2:
            break
        if pump >= p_cap:
            return finish(p_first=p_first, first_set=first_set)
        if state is not None:
            lo2, state2 = pump, state
        pump = min(pump * 1.6, p_cap)
    hi2, second_set = pump, sel
    while (hi2 - lo2) / lo2 > rel:
        mid = 0.5 * (lo2 + hi2)
        state, sel = S(mid, state2)
        if sel is not None and len(sel) >= 2:
            hi2, second_set = mid, sel
        elif state is not None:
            lo2, state2 = mid, state
        else:
            break  # unresolved midpoint: stop refining, keep the bracket
    return finish(p_first=p_first, first_set=first_set,
                  p_second=0.5 * (lo2 + hi2), second_set=second_set)


def _cell_f_max(state: SystemState) -> float:
    return float(state.f.max())


_WORKER_SPEC = None


def _column_worker(args):
    xi, p_window = args
    spec = _WORKER_SPEC
    return _phase_column(
        spec.params.replace(xi=xi),
        p_window,
        rtol=spec.rtol,
        handoff=spec.handoff,
        rel=spec.boundary_rel,
        p_span=spec.p_span,
        saturation_level=spec.saturation_level,
    )


def _pool_initializer(spec):
    global _WORKER_SPEC
    _WORKER_SPEC = spec


def run_phase_diagram(spec: SweepSpec, workers: int = 1) -> PhaseDiagram:
    """Resolve selection boundaries over a log-spaced xi grid.

    Columns are independent and solved in parallel; results are gathered
    and sorted by xi, so output is identical for any worker count.  The
    pump axis bounds the adaptive search window.
    """
    xi_axis = spec.axis("xi")
    p_axis = spec.axis("pump")
    p_window = (float(p_axis.values.min()), float(p_axis.values.max()))
    jobs = [(float(xi), p_window) for xi in xi_axis.values]
    if workers <= 1 or len(jobs) == 1:
        _pool_initializer(spec)
        columns = [_column_worker(job) for job in jobs]
    else:
        ctx = multiprocessing.get_context("fork")
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=workers, mp_context=ctx,
            initializer=_pool_initializer, initargs=(spec,),
        ) as pool:
            columns = list(pool.map(_column_worker, jobs))
    columns.sort(key=lambda c: c.xi)
    return PhaseDiagram(
        columns=columns,
        basis=spec.params.basis,
        params=spec.params,
        meta={"p_window": p_window, "n_columns": len(columns)},
    )


# ---------------------------------------------------------------------------
# cutoff scan


def run_cutoff_scan(spec: SweepSpec) -> SweepResult:
    """First/second selection vs cavity cutoff frequency at fixed xi.

    Each cutoff rebuilds the rate table (dye-window coverage errors are
    recorded per cutoff, not raised), locates the first selection, then
    marches the pump to decide whether a second selection or gain
    saturation comes first within ``p_span`` times the first threshold.
    """
    axis = spec.axis("cutoff")
    records = []
    for cutoff in axis.values:
        rec = {
            "cutoff": float(cutoff),
            "p_first": None,
            "first_set": None,
            "p_second": None,
            "second_set": None,
            "saturated": False,
            "p_sat": None,
            "converged": False,
            "error": None,
        }
        try:
            params_c = spec.params.replace(cutoff=float(cutoff))
        except ValueError as err:
            rec["error"] = str(err)
            records.append(rec)
            continue
        col = _phase_column(
            params_c,
            (1e-6 * spec.params.gamma, math.inf),
            rtol=spec.rtol,
            handoff=spec.handoff,
            rel=spec.boundary_rel,
            p_span=spec.p_span,
            saturation_level=spec.saturation_level,
        )
        rec.update(
            p_first=col.p_first,
            first_set=col.first_set,
            p_second=col.p_second,
            second_set=col.second_set,
            saturated=col.saturated,
            p_sat=col.p_sat,
            converged=col.unresolved == 0 and col.p_first is not None,
        )
        records.append(rec)
    return SweepResult(
        kind="cutoff-scan",
        axis="cutoff",
        values=axis.values,
        records=records,
        basis=spec.params.basis,
        params=spec.params,
        meta={"xi": spec.params.xi, "p_span": spec.p_span},
    )
