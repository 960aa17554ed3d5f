"""Figure rendering for the report path (headless, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .units import hbar, thz

__all__ = [
    "plot_thresholds",
    "plot_pump_sweep",
    "plot_f_slices",
    "plot_phase_diagram",
    "plot_cutoff_scan",
    "plot_thermal_fit",
    "plot_steady",
]

_POP_FLOOR = 1e-8  # occupations below this are off-scale on log plots


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_thresholds(report, path, p_scale=1e-9, p_unit="GHz"):
    """Per-mode first-threshold pumps vs xi with the argmin curve."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    p = report.p_th * p_scale
    for i in range(p.shape[1]):
        ax.plot(report.xi_grid, p[:, i], color="0.75", lw=0.7, zorder=1)
    arg = p[np.arange(len(report.xi_grid)), report.argmin_index]
    ax.plot(report.xi_grid, arg, color="C3", lw=2.0, zorder=2, label="lowest threshold")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(f"$P^{{th}}$ [{p_unit}]")
    ax.legend(loc="best")
    return _finish(fig, path)


def plot_pump_sweep(result, path, p_scale=1e-9, p_unit="GHz"):
    """Mode populations vs pump; modes that never grow stay unlabeled."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    pumps = np.array([r["pump"] for r in result.records if r["converged"]])
    rows = [r["n"] for r in result.records if r["converged"]]
    if rows:
        n = np.vstack(rows)
        peak = n.max(axis=0)
        order = np.argsort(peak)[::-1]
        labeled = 0
        for i in order:
            if peak[i] < _POP_FLOOR:
                continue
            label = None
            if labeled < 8 and peak[i] > 1.0:
                label = result.basis.modes[i].label
                labeled += 1
            ax.plot(pumps * p_scale, np.maximum(n[:, i], _POP_FLOOR), lw=1.0, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(f"$P$ [{p_unit}]")
    ax.set_ylabel(r"$n_i$")
    if rows:
        ax.legend(loc="upper left", fontsize=7, ncol=2)
    return _finish(fig, path)


def plot_f_slices(result, path, p_scale=1e-9, p_unit="GHz"):
    """Excited-fraction profiles along x for the requested pump values."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for rec in result.records:
        if "f_slice" not in rec:
            continue
        x, f = rec["f_slice"]
        ax.plot(x, f, lw=1.2, label=f"P = {rec['pump'] * p_scale:.4g} {p_unit}")
    ax.set_xlabel(r"$x/d$")
    ax.set_ylabel(r"$f(x, 0)$")
    ax.set_ylim(bottom=0.0)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def plot_phase_diagram(diagram, path, p_scale=1e-9, p_unit="GHz"):
    """Cells colored by label plus the extracted boundary curves."""
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    styles = {
        "none": dict(color="0.85", marker=".", s=6),
        "ground-only": dict(color="C0", marker="s", s=10),
        "multi": dict(color="C1", marker="^", s=12),
    }
    buckets = {k: ([], []) for k in styles}
    for col, pump, selected, converged in diagram.iter_cells():
        if not converged:
            continue
        if not selected:
            key = "none"
        elif selected == {col.ground_index}:
            key = "ground-only"
        else:
            key = "multi"
        buckets[key][0].append(col.xi)
        buckets[key][1].append(pump * p_scale)
    for key, (xs, ys) in buckets.items():
        if xs:
            ax.scatter(xs, ys, label=key, **styles[key])
    b = diagram.boundaries
    ax.plot(b.xi, b.lower * p_scale, "k-", lw=1.5, label="first selection")
    with np.errstate(invalid="ignore"):
        ax.plot(b.xi, b.upper * p_scale, "k--", lw=1.5, label="second selection")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(f"$P$ [{p_unit}]")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def plot_cutoff_scan(result, path, p_scale=1e-9, p_unit="GHz"):
    """First/second selection pumps vs cutoff, saturation marked."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    cut = [thz(r["cutoff"]) for r in result.records]
    first = [r["p_first"] * p_scale if r["p_first"] else np.nan for r in result.records]
    second = [r["p_second"] * p_scale if r["p_second"] else np.nan for r in result.records]
    ax.plot(cut, first, "o-", color="C0", label="first selection")
    ax.plot(cut, second, "s--", color="C1", label="second selection")
    for r in result.records:
        if r["saturated"] and r["p_first"]:
            ax.plot([thz(r["cutoff"])], [r["p_sat"] * p_scale], "rx", ms=9,
                    label="gain saturation")
    for x, r in zip(cut, result.records):
        if r["first_set"]:
            lab = ";".join(result.basis.modes[i].label for i in sorted(r["first_set"]))
            ax.annotate(lab, (x, first[cut.index(x)]), fontsize=7,
                        textcoords="offset points", xytext=(4, 4))
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys(), loc="best", fontsize=8)
    ax.set_yscale("log")
    ax.set_xlabel(r"$\omega_c/2\pi$ [THz]")
    ax.set_ylabel(f"$P$ [{p_unit}]")
    return _finish(fig, path)


def plot_thermal_fit(fit, path):
    """ln(1 + 1/n) vs mode energy with the fitted line."""
    fig, (ax, axr) = plt.subplots(
        2, 1, figsize=(6.0, 5.0), sharex=True, height_ratios=[3, 1]
    )
    e_thz = fit.energies / (2 * np.pi * 1e12) / hbar
    ax.plot(e_thz, fit.ln_terms, "o", ms=4, label="unselected modes")
    ax.plot(e_thz, fit.slope * fit.energies + fit.intercept, "-", color="C3",
            label=f"fit: slope/beta = {fit.beta_fit / fit.beta_ref:.3f}")
    ax.set_ylabel(r"$\ln(1 + 1/n_i)$")
    ax.legend(loc="best", fontsize=8)
    axr.axhline(0.0, color="0.6", lw=0.8)
    axr.plot(e_thz, fit.pinned_residuals, ".", color="C2")
    axr.set_xlabel(r"$\epsilon_i/2\pi\hbar$ [THz]")
    axr.set_ylabel("pinned resid.")
    return _finish(fig, path)


def plot_steady(steady, path):
    """Occupations vs mode energy plus the excited-fraction profile."""
    fig, (ax, axf) = plt.subplots(1, 2, figsize=(8.0, 3.6))
    basis = steady.params.basis
    e_thz = [thz(m.transverse_energy) for m in basis.modes]
    n = np.maximum(steady.state.n, _POP_FLOOR)
    colors = ["C3" if i in steady.selected else "C0" for i in range(len(n))]
    ax.scatter(e_thz, n, c=colors, s=14)
    ax.set_yscale("log")
    ax.set_xlabel(r"$(E_i - E_0)/2\pi\hbar$ [THz]")
    ax.set_ylabel(r"$n_i$")
    grid = basis.grid
    j = int(np.argmin(np.abs(grid.axis)))
    axf.plot(grid.axis, steady.state.f[:, j], lw=1.2)
    axf.set_xlabel(r"$x/d$")
    axf.set_ylabel(r"$f(x, 0)$")
    axf.set_ylim(bottom=0.0)
    return _finish(fig, path)
