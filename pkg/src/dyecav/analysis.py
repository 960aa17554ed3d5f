"""Analytic thresholds, selection traces, thermal fits, phase boundaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dye import DyeModel, RateTable, rates_for_basis
from .dynamics import SteadyState, SystemParams
from .modes import ModeBasis
from .units import from_thz, ghz, hbar, thz

__all__ = [
    "ThresholdReport",
    "SelectionTrace",
    "ThermalFit",
    "PhaseBoundaries",
    "threshold_gain",
    "gain_for_pump",
    "pump_for_gain",
    "first_threshold_pump",
    "threshold_surface",
    "trace_selection",
    "thermal_compare",
    "extract_phase_boundaries",
]

# symmetric partners (i,j)/(j,i) sit within this relative threshold split
# and are reported together on the argmin curve
ARGMIN_GROUP_TOL = 1e-3


def threshold_gain(i: int, xi: float, rates: RateTable) -> float:
    """Gain level at which mode i's net photon rate crosses zero.

    Evaluated as (R_up_i + kappa/rho)/(R_up_i + R_down_i) with
    kappa = R_up_0 * rho / xi.  For an exactly KS-obeying dye the
    equivalent Boltzmann form
    (1 + R_up_0/(R_up_i xi)) / (1 + C exp(-beta(eps_i - hbar omega_z)))
    is evaluated as well and both are asserted to agree to 1e-10.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    r_up = rates.r_up[i]
    r_down = rates.r_down[i]
    r_up0 = rates.r_up_ground
    direct = (r_up + r_up0 / xi) / (r_up + r_down)
    if rates.dye.source == "surrogate":
        dye = rates.dye
        boltz = dye.ks_constant * math.exp(
            -dye.beta * hbar * (rates.mode_freqs[i] - dye.zero_phonon_freq)
        )
        via_ks = (1.0 + r_up0 / (r_up * xi)) / (1.0 + boltz)
        assert abs(direct - via_ks) <= 1e-10 * via_ks, (
            f"threshold-gain forms disagree for mode {i}: {direct} vs {via_ks}"
        )
    return float(direct)


def gain_for_pump(pump: float, gamma: float) -> float:
    """Homogeneous excited fraction reached at pump P: f = P/(Gamma+P)."""
    return pump / (gamma + pump)


def pump_for_gain(g: float, gamma: float) -> float:
    """Pump at which the homogeneous excited fraction equals g."""
    return gamma * g / (1.0 - g)


def first_threshold_pump(i: int, xi: float, rates: RateTable, Gamma: float) -> float:
    """Pump at which mode i would be the first to reach its gain threshold
    (valid before any other selection): Gamma (R_up_i + R_up_0/xi) /
    (R_down_i - R_up_0/xi).  +inf when the denominator is non-positive
    (the mode can never be first-selected at this xi)."""
    r_up0 = rates.r_up_ground
    denom = rates.r_down[i] - r_up0 / xi
    if denom <= 0:
        return math.inf
    return Gamma * (rates.r_up[i] + r_up0 / xi) / denom


def _first_threshold_vector(xi: float, rates: RateTable, Gamma: float) -> np.ndarray:
    denom = rates.r_down - rates.r_up_ground / xi
    with np.errstate(divide="ignore"):
        p = Gamma * (rates.r_up + rates.r_up_ground / xi) / denom
    return np.where(denom > 0, p, np.inf)


@dataclass(eq=False)
class ThresholdReport:
    """First-selection thresholds over a (xi, mode) grid."""

    xi_grid: np.ndarray
    g_th: np.ndarray  # (n_xi, n_modes)
    p_th: np.ndarray  # (n_xi, n_modes)
    argmin_index: np.ndarray  # (n_xi,) index of the minimal-threshold mode
    is_argmin: np.ndarray  # (n_xi, n_modes) bool, near-degenerate group
    basis: ModeBasis

    def write_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz") -> None:
        modes = self.basis.modes
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["xi", "nu_x", "nu_y", "G_th", f"P_th_{p_unit}", "is_argmin"])
            for k, xi in enumerate(self.xi_grid):
                for i, m in enumerate(modes):
                    writer.writerow(
                        [
                            str(float(xi)),
                            m.nu_x,
                            m.nu_y,
                            str(float(self.g_th[k, i])),
                            str(float(self.p_th[k, i] * p_scale)),
                            1 if self.is_argmin[k, i] else 0,
                        ]
                    )

    def write_argmin_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz") -> None:
        modes = self.basis.modes
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["xi", "nu_x", "nu_y", f"P_th_{p_unit}"])
            for k, xi in enumerate(self.xi_grid):
                i = int(self.argmin_index[k])
                writer.writerow(
                    [
                        str(float(xi)),
                        modes[i].nu_x,
                        modes[i].nu_y,
                        str(float(self.p_th[k, i] * p_scale)),
                    ]
                )


def threshold_surface(
    xi_grid,
    basis: ModeBasis,
    dye: DyeModel,
    Gamma: float = 0.2e9,
    cutoff: float = from_thz(515.0),
) -> ThresholdReport:
    """Evaluate per-mode thresholds over a xi grid and locate the argmin.

    Modes whose threshold lies within ARGMIN_GROUP_TOL of the column
    minimum (near-degenerate symmetric partners) are flagged together.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    rates = rates_for_basis(dye, basis, cutoff)
    n_modes = len(basis)
    g_th = np.empty((len(xi_grid), n_modes))
    p_th = np.empty((len(xi_grid), n_modes))
    for k, xi in enumerate(xi_grid):
        g_th[k] = rates.threshold_gain(rates.r_up_ground * dye.density / xi)
        p_th[k] = _first_threshold_vector(xi, rates, Gamma)
    argmin_index = np.argmin(p_th, axis=1)
    col_min = p_th[np.arange(len(xi_grid)), argmin_index][:, None]
    with np.errstate(invalid="ignore"):
        is_argmin = p_th <= col_min * (1.0 + ARGMIN_GROUP_TOL)
    is_argmin &= np.isfinite(p_th)
    return ThresholdReport(
        xi_grid=xi_grid,
        g_th=g_th,
        p_th=p_th,
        argmin_index=argmin_index,
        is_argmin=is_argmin,
        basis=basis,
    )


@dataclass(eq=False)
class SelectionTrace:
    """Selection/deselection events along an ascending pump sweep.

    events: (pump, mode_index, kind, declamping) with kind in
    {"selected", "deselected"}; declamping is (G_th - G)/G_th at the first
    point past a deselection, None for selections.
    """

    events: list
    sets: list  # (pump, frozenset) for every converged sweep point
    skipped: list  # pump values of non-converged points
    basis: ModeBasis

    def __post_init__(self):
        state = {}
        for _, mode, kind, _ in self.events:
            prev = state.get(mode, "deselected")
            if prev == kind:
                raise ValueError(
                    f"event sequence for mode {mode} is inconsistent: "
                    f"{kind} twice in a row"
                )
            state[mode] = kind

    def write_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"P_{p_unit}", "nu_x", "nu_y", "event", "declamping"])
            for pump, mode, kind, declamp in self.events:
                m = self.basis.modes[mode]
                writer.writerow(
                    [
                        str(float(pump * p_scale)),
                        m.nu_x,
                        m.nu_y,
                        kind,
                        "" if declamp is None else str(float(declamp)),
                    ]
                )


def trace_selection(sweep) -> SelectionTrace:
    """Extract the ordered event list from an ascending pump sweep.

    Accepts a pump-sweep result (records with pump, selected, converged,
    gains, g_th) or an iterable of (pump, SteadyState) pairs.  Events come
    from set differences between consecutive converged points; deselection
    events are annotated with the relative gain drop below the clamp
    level.  Non-converged points are excluded and reported in ``skipped``.
    """
    if hasattr(sweep, "records"):
        basis = sweep.basis
        points = []
        for rec in sweep.records:
            points.append(
                (
                    rec["pump"],
                    rec["converged"],
                    rec["selected"],
                    rec["gains"],
                    rec["g_th"],
                )
            )
    else:
        pairs = list(sweep)
        basis = pairs[0][1].params.basis
        points = []
        for pump, steady in pairs:
            gth = steady.params.rates.threshold_gain(steady.params.kappa)
            points.append((pump, True, steady.selected, steady.gains, gth))

    pumps = [p[0] for p in points]
    if any(b < a for a, b in zip(pumps, pumps[1:])):
        raise ValueError("sweep must be ascending in pump")

    events = []
    sets = []
    skipped = []
    prev = frozenset()
    for pump, converged, selected, gains, g_th in points:
        if not converged:
            skipped.append(pump)
            continue
        selected = frozenset(selected)
        for mode in sorted(selected - prev):
            events.append((pump, mode, "selected", None))
        for mode in sorted(prev - selected):
            declamp = (g_th[mode] - gains[mode]) / g_th[mode]
            events.append((pump, mode, "deselected", float(declamp)))
        sets.append((pump, selected))
        prev = selected
    return SelectionTrace(events=events, sets=sets, skipped=skipped, basis=basis)


@dataclass(eq=False)
class ThermalFit:
    """Least-squares line through ln(1 + 1/n_i) vs mode energy.

    The fit runs over unselected, populated modes.  ``residuals`` belong
    to the free two-parameter fit; ``pinned_residuals`` to the line whose
    slope is pinned at the dye's beta (intercept refitted), which isolates
    occupation excess/deficit relative to a strictly thermal spectrum.
    """

    slope: float  # 1/J
    intercept: float
    beta_fit: float
    mu_fit: float  # J
    residuals: np.ndarray
    pinned_residuals: np.ndarray
    included: np.ndarray  # mode indices entering the fit
    energies: np.ndarray  # epsilon_i in J for included modes
    ln_terms: np.ndarray
    beta_ref: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["energy_THz", "n_i", "ln_term", "fit_value"])
            for eps, y in zip(self.energies, self.ln_terms):
                n_i = 1.0 / np.expm1(y)
                writer.writerow(
                    [
                        str(float(eps / hbar / (2 * math.pi * 1e12))),
                        str(float(n_i)),
                        str(float(y)),
                        str(float(self.slope * eps + self.intercept)),
                    ]
                )


def thermal_compare(
    steady: SteadyState, dye: DyeModel, params: SystemParams, n_floor: float = 1e-6
) -> ThermalFit:
    """Fit the unselected mode populations against a Bose-Einstein line.

    ln(1 + 1/n_i) is linear in energy with slope beta and intercept
    -beta*mu for a thermal distribution; the fitted slope and intercept
    are reported as beta_fit and mu_fit.  The abscissa is centered before
    fitting to keep the normal equations well conditioned (mode energies
    sit numerically far from zero).
    """
    n = steady.state.n
    mask = np.ones(len(n), dtype=bool)
    mask[list(steady.selected)] = False
    mask &= n > n_floor
    included = np.where(mask)[0]
    if len(included) < 5:
        raise ValueError(
            f"under-populated spectrum: only {len(included)} unselected modes "
            f"above occupation {n_floor}"
        )
    energies = hbar * params.rates.mode_freqs[included]
    y = np.log1p(1.0 / n[included])
    x0 = energies.mean()
    slope, c_centered = np.polyfit(energies - x0, y, 1)
    intercept = c_centered - slope * x0
    residuals = y - (slope * energies + intercept)
    beta = dye.beta
    c_pinned = (y - beta * energies).mean()
    pinned_residuals = y - (beta * energies + c_pinned)
    return ThermalFit(
        slope=float(slope),
        intercept=float(intercept),
        beta_fit=float(slope),
        mu_fit=float(-intercept / slope),
        residuals=residuals,
        pinned_residuals=pinned_residuals,
        included=included,
        energies=energies,
        ln_terms=y,
        beta_ref=beta,
    )


@dataclass(eq=False)
class PhaseBoundaries:
    """First- and second-selection boundary curves over xi columns."""

    xi: np.ndarray
    lower: np.ndarray  # first-selection pump per column (NaN if none found)
    upper: np.ndarray  # second-selection pump (NaN: none within range)
    merged: np.ndarray  # bool: first event already selects multiple modes
    saturated: np.ndarray  # bool: gain saturation before a second selection
    analytic_lower: np.ndarray  # minimal analytic first threshold
    crossover_xi: float | None  # boundary-merge estimate (ground-first onset)

    def write_csv(self, path, p_scale: float = 1e-9, p_unit: str = "GHz") -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "xi",
                    f"P_lower_{p_unit}",
                    f"P_upper_{p_unit}",
                    "merged",
                    "saturated",
                    f"P_analytic_{p_unit}",
                ]
            )
            def cell(value):
                return "" if np.isnan(value) else str(float(value * p_scale))

            for k in range(len(self.xi)):
                writer.writerow(
                    [
                        str(float(self.xi[k])),
                        cell(self.lower[k]),
                        cell(self.upper[k]),
                        1 if self.merged[k] else 0,
                        1 if self.saturated[k] else 0,
                        str(float(self.analytic_lower[k] * p_scale)),
                    ]
                )


def extract_phase_boundaries(diagram) -> PhaseBoundaries:
    """Boundary curves from a phase diagram's per-column bracketing data.

    The lower boundary interpolates the first-selection points, the upper
    the second-selection points; where the first event already selects a
    multi-mode group the two boundaries coincide (merged columns).  The
    crossover xi marks where the first-selected set starts containing the
    ground mode (geometric midpoint between the neighboring columns).
    """
    columns = sorted(diagram.columns, key=lambda c: c.xi)
    xi = np.array([c.xi for c in columns])
    lower = np.array([c.p_first if c.p_first is not None else np.nan for c in columns])
    upper = np.array(
        [c.p_second if c.p_second is not None else np.nan for c in columns]
    )
    merged = np.array(
        [c.first_set is not None and len(c.first_set) >= 2 for c in columns]
    )
    saturated = np.array([c.saturated for c in columns])
    analytic = np.array([c.analytic_min_pump for c in columns])
    ground = [
        c.first_set is not None and c.ground_index in c.first_set for c in columns
    ]
    crossover = None
    for k in range(len(columns) - 1):
        if not ground[k] and ground[k + 1]:
            crossover = float(math.sqrt(xi[k] * xi[k + 1]))
            break
    return PhaseBoundaries(
        xi=xi,
        lower=lower,
        upper=upper,
        merged=merged,
        saturated=saturated,
        analytic_lower=analytic,
        crossover_xi=crossover,
    )
