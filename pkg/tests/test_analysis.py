"""Analytic thresholds, selection traces, thermal fits, boundaries."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from dyecav import (
    SteadyState,
    SystemState,
    first_threshold_pump,
    rates_for_basis,
    thermal_compare,
    threshold_gain,
    threshold_surface,
    trace_selection,
)
from dyecav.analysis import (
    SelectionTrace,
    extract_phase_boundaries,
    gain_for_pump,
    pump_for_gain,
)
from dyecav.units import hbar

from conftest import CUTOFF

GAMMA = 0.2e9


@pytest.fixture(scope="module")
def rates(basis_small, dye):
    return rates_for_basis(dye, basis_small, CUTOFF)


def test_threshold_gain_matches_rate_table(rates, dye):
    for xi in (0.1, 1.0, 10.0, 100.0):
        kappa = rates.r_up_ground * dye.density / xi
        table = rates.threshold_gain(kappa)
        for i in (0, 7, 33, 65):
            # the surrogate path also cross-checks the detailed-balance form
            assert threshold_gain(i, xi, rates) == pytest.approx(table[i], rel=1e-12)


def test_threshold_pump_closed_form(rates):
    xi = 10.0
    for i in (0, 12, 40):
        g = threshold_gain(i, xi, rates)
        p = first_threshold_pump(i, xi, rates, GAMMA)
        assert p == pytest.approx(pump_for_gain(g, GAMMA), rel=1e-12)
        assert gain_for_pump(p, GAMMA) == pytest.approx(g, rel=1e-12)


def test_threshold_pump_pole(rates):
    # strong cavity loss: emission cannot beat the photon escape, no threshold
    assert first_threshold_pump(0, 1e-3, rates, GAMMA) == math.inf
    assert first_threshold_pump(0, 100.0, rates, GAMMA) < math.inf


def test_threshold_pump_linear_in_gamma(rates):
    p1 = first_threshold_pump(3, 5.0, rates, GAMMA)
    p2 = first_threshold_pump(3, 5.0, rates, 2 * GAMMA)
    assert p2 == pytest.approx(2 * p1, rel=1e-14)


def test_threshold_pump_decreases_with_xi(rates):
    xis = np.geomspace(0.1, 100.0, 13)
    pumps = [first_threshold_pump(0, xi, rates, GAMMA) for xi in xis]
    assert all(b < a for a, b in zip(pumps, pumps[1:]))


def test_threshold_surface_shape_and_argmin(basis_small, dye):
    xi_grid = np.geomspace(0.01, 100.0, 9)
    report = threshold_surface(xi_grid, basis_small, dye, Gamma=GAMMA, cutoff=CUTOFF)
    n_modes = len(basis_small)
    assert report.p_th.shape == (9, n_modes)
    assert report.g_th.shape == (9, n_modes)
    ground = basis_small.index_of(0, 0)
    # strong reabsorption: the ground mode has the lowest threshold
    assert report.argmin_index[-1] == ground
    # weak reabsorption: an excited group wins (a whole quanta shell at the
    # smallest xi; anisotropy splits the shell by ~1% in energy)
    assert report.argmin_index[0] != ground
    assert report.is_argmin[0].sum() >= 2
    assert not report.is_argmin[0, ground]
    # at xi ~ 0.03 the winner is the first excited pair: its reflection
    # partner sits within the degeneracy tolerance and is flagged too
    k = 1
    arg = int(report.argmin_index[k])
    nu_x, nu_y = basis_small.quantum_numbers[arg]
    assert {(nu_x, nu_y), (nu_y, nu_x)} == {(1, 0), (0, 1)}
    assert report.is_argmin[k, basis_small.index_of(nu_y, nu_x)]


def test_threshold_surface_csv(tmp_path, basis_small, dye):
    report = threshold_surface([1.0], basis_small, dye, Gamma=GAMMA, cutoff=CUTOFF)
    path = tmp_path / "thresholds.csv"
    report.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "xi,nu_x,nu_y,G_th,P_th_GHz,is_argmin"
    assert len(lines) == 1 + len(basis_small)
    report.write_argmin_csv(tmp_path / "argmin.csv")
    head, row = (tmp_path / "argmin.csv").read_text().splitlines()
    assert head == "xi,nu_x,nu_y,P_th_GHz"
    assert row.startswith("1.0,")


def _fake_sweep(basis, points):
    """records with the fields trace_selection needs."""
    g_th = np.ones(len(basis))
    records = []
    for pump, converged, selected, gains in points:
        records.append(
            {
                "pump": pump,
                "converged": converged,
                "selected": selected,
                "gains": gains,
                "g_th": g_th,
            }
        )
    return SimpleNamespace(records=records, basis=basis)


def test_trace_selection_events(basis_small):
    g = np.zeros(len(basis_small))
    sweep = _fake_sweep(
        basis_small,
        [
            (1.0, True, frozenset(), g),
            (2.0, True, frozenset({0}), g),
            (3.0, False, None, None),  # skipped, not an event source
            (4.0, True, frozenset({0, 3}), g),
            (5.0, True, frozenset({3}), g + 0.9),  # mode 0 drops out
        ],
    )
    trace = trace_selection(sweep)
    assert trace.skipped == [3.0]
    kinds = [(mode, kind) for _, mode, kind, _ in trace.events]
    assert kinds == [(0, "selected"), (3, "selected"), (0, "deselected")]
    pump, mode, kind, declamp = trace.events[-1]
    assert pump == 5.0
    assert declamp == pytest.approx(0.1)  # (1 - 0.9)/1
    assert trace.events[0][3] is None


def test_trace_selection_requires_ascending_pumps(basis_small):
    g = np.zeros(len(basis_small))
    sweep = _fake_sweep(
        basis_small, [(2.0, True, frozenset(), g), (1.0, True, frozenset(), g)]
    )
    with pytest.raises(ValueError, match="ascending"):
        trace_selection(sweep)


def test_selection_trace_rejects_inconsistent_events(basis_small):
    with pytest.raises(ValueError, match="inconsistent"):
        SelectionTrace(
            events=[(1.0, 0, "selected", None), (2.0, 0, "selected", None)],
            sets=[],
            skipped=[],
            basis=basis_small,
        )


def test_trace_csv(tmp_path, basis_small):
    trace = SelectionTrace(
        events=[(1e9, 0, "selected", None), (2e9, 0, "deselected", 0.05)],
        sets=[],
        skipped=[],
        basis=basis_small,
    )
    path = tmp_path / "events.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "P_GHz,nu_x,nu_y,event,declamping"
    assert lines[1] == "1.0,0,0,selected,"
    assert lines[2] == "2.0,0,0,deselected,0.05"


def _thermal_steady(params, mu, selected=()):
    """Steady state whose unselected occupations are exactly thermal."""
    beta = params.dye.beta
    eps = hbar * params.rates.mode_freqs
    n = 1.0 / np.expm1(beta * (eps - mu))
    npts = params.basis.grid.points_per_axis
    return SteadyState(
        state=SystemState(n=n, f=np.zeros((npts, npts))),
        gains=np.zeros(len(n)),
        residual=0.0,
        selected=frozenset(selected),
        params=params,
    )


def test_thermal_compare_recovers_exact_distribution(make_params, dye):
    params = make_params(xi=1.0)
    mu = hbar * params.rates.mode_freqs[0] - 5.0 / dye.beta
    steady = _thermal_steady(params, mu)
    fit = thermal_compare(steady, dye, params)
    assert fit.beta_fit == pytest.approx(dye.beta, rel=1e-9)
    assert fit.mu_fit == pytest.approx(mu, rel=1e-9)
    assert np.abs(fit.residuals).max() < 1e-9
    assert np.abs(fit.pinned_residuals).max() < 1e-9
    assert fit.beta_ref == dye.beta


def test_thermal_compare_requires_populated_spectrum(make_params, dye):
    params = make_params(xi=1.0)
    # push mu far down: occupations collapse below the floor
    mu = hbar * params.rates.mode_freqs[0] - 60.0 / dye.beta
    steady = _thermal_steady(params, mu)
    with pytest.raises(ValueError, match="under-populated"):
        thermal_compare(steady, dye, params)


def test_thermal_compare_excludes_selected_modes(make_params, dye):
    params = make_params(xi=1.0)
    mu = hbar * params.rates.mode_freqs[0] - 5.0 / dye.beta
    steady = _thermal_steady(params, mu, selected=(0, 1))
    steady.state.n[0] = 1e9  # way off the thermal line, but selected
    fit = thermal_compare(steady, dye, params)
    assert 0 not in fit.included
    assert 1 not in fit.included
    assert fit.beta_fit == pytest.approx(dye.beta, rel=1e-9)


def test_thermal_fit_csv(tmp_path, make_params, dye):
    params = make_params(xi=1.0)
    mu = hbar * params.rates.mode_freqs[0] - 5.0 / dye.beta
    fit = thermal_compare(_thermal_steady(params, mu), dye, params)
    path = tmp_path / "thermal.csv"
    fit.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "energy_THz,n_i,ln_term,fit_value"
    assert len(lines) == 1 + len(fit.included)


def _column(xi, p_first, first_set, p_second=None, second_set=None,
            saturated=False, ground_index=0):
    return SimpleNamespace(
        xi=xi,
        ground_index=ground_index,
        analytic_min_pump=p_first if p_first is not None else np.nan,
        p_first=p_first,
        first_set=first_set,
        p_second=p_second,
        second_set=second_set,
        saturated=saturated,
    )


def test_extract_phase_boundaries(tmp_path):
    diagram = SimpleNamespace(
        columns=[
            _column(0.1, 2.0, frozenset({4, 5}), p_second=2.0,
                    second_set=frozenset({4, 5})),
            _column(1.0, 1.0, frozenset({0}), p_second=9.0,
                    second_set=frozenset({0, 3})),
            _column(10.0, 0.5, frozenset({0}), saturated=True),
        ]
    )
    b = extract_phase_boundaries(diagram)
    assert list(b.xi) == [0.1, 1.0, 10.0]
    assert list(b.merged) == [True, False, False]
    assert list(b.saturated) == [False, False, True]
    assert b.lower[1] == 1.0
    assert b.upper[1] == 9.0
    assert np.isnan(b.upper[2])
    # ground first appears between the first and second columns
    assert b.crossover_xi == pytest.approx(math.sqrt(0.1 * 1.0))
    path = tmp_path / "boundaries.csv"
    b.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "xi,P_lower_GHz,P_upper_GHz,merged,saturated,P_analytic_GHz"
    assert len(lines) == 4
    assert lines[3].split(",")[2] == ""  # no upper boundary when saturated


def test_extract_phase_boundaries_without_crossover():
    diagram = SimpleNamespace(
        columns=[_column(1.0, 1.0, frozenset({0})), _column(10.0, 0.5, frozenset({0}))]
    )
    assert extract_phase_boundaries(diagram).crossover_xi is None
