"""Configuration validation and the command-line front end."""

import csv
import json

import pytest

from dyecav import (
    ConfigError,
    RunConfig,
    load_config,
    surrogate_rates,
    validate_config,
)
from dyecav import cli
from dyecav.dye import SPECTRA_HEADER


# ---------------------------------------------------------------------------
# schema validation


def test_empty_config_resolves_to_defaults():
    cfg = RunConfig(validate_config({}))
    assert cfg["trap.omega_x_THz"] == 4.0
    assert cfg["trap.anisotropy"] == 0.99
    assert cfg["grid.points_per_axis"] == 256
    assert cfg["dye.kind"] == "surrogate"
    assert cfg["system.cutoff_THz"] == 515.0
    assert cfg["system.xi"] == 1.0
    assert cfg["sweep.cutoffs_THz"] == [490.0, 515.0, 540.0]
    assert cfg["output.dir"] is None


def test_unknown_keys_rejected_with_dotted_path():
    with pytest.raises(ConfigError, match="unknown key: sweeps"):
        validate_config({"sweeps": {}})
    with pytest.raises(ConfigError, match="unknown key: sweep.pump_maxx"):
        validate_config({"sweep": {"pump_maxx": 1.0}})
    with pytest.raises(ConfigError, match="unknown key: trap.omega"):
        validate_config({"trap": {"omega": 4.0}})


def test_type_errors_name_the_key():
    with pytest.raises(ConfigError, match="system.xi.*bool"):
        validate_config({"system": {"xi": True}})
    with pytest.raises(ConfigError, match="grid.points_per_axis.*float"):
        validate_config({"grid": {"points_per_axis": 256.0}})
    with pytest.raises(ConfigError, match="trap.omega_x_THz"):
        validate_config({"trap": {"omega_x_THz": "fast"}})
    with pytest.raises(ConfigError, match="null"):
        validate_config({"trap": {"omega_x_THz": None}})


def test_cross_validation():
    with pytest.raises(ConfigError, match="exactly one"):
        validate_config({"system": {"xi": 1.0, "kappa_GHz": 0.5}})
    with pytest.raises(ConfigError, match="exactly one"):
        validate_config({"system": {"xi": None}})
    # switching from xi to kappa is legal
    cfg = validate_config({"system": {"xi": None, "kappa_GHz": 0.5}})
    assert cfg["system"]["kappa_GHz"] == 0.5
    with pytest.raises(ConfigError, match="anisotropy"):
        validate_config({"trap": {"anisotropy": 1.2}})
    with pytest.raises(ConfigError, match="pump_spacing"):
        validate_config({"sweep": {"pump_spacing": "cubic"}})
    with pytest.raises(ConfigError, match="spectra_path"):
        validate_config({"dye": {"kind": "tabulated"}})
    with pytest.raises(ConfigError, match="list of numbers"):
        validate_config({"sweep": {"cutoffs_THz": [515.0, "x"]}})


def test_builders_and_pump_reporting():
    cfg = RunConfig(
        validate_config(
            {
                "trap": {"max_quanta": 2},
                "grid": {"points_per_axis": 64},
                "system": {"xi": 5.0},
            }
        )
    )
    basis = cfg.build_basis()
    assert len(basis) == 6
    params = cfg.build_params(pump=1.0, basis=basis)
    assert params.xi == 5.0
    assert params.gamma == 0.2e9
    assert cfg.p_unit == "GHz"
    assert cfg.p_scale() == 1e-9
    cfg.data["output"]["p_over_gamma"] = True
    assert cfg.p_unit == "over_Gamma"
    assert cfg.p_scale() == pytest.approx(1.0 / 0.2e9)


def test_load_config_errors_and_manifest_reingestion(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    manifest_like = tmp_path / "manifest.json"
    manifest_like.write_text(
        json.dumps(
            {
                "command": "steady",
                "config": {"system": {"xi": 7.0}},
                "versions": {"package": "0.1.0"},
            }
        )
    )
    cfg = load_config(manifest_like)
    assert cfg["system.xi"] == 7.0  # manifest stands in for a config file


def test_tabulated_dye_from_spectra_file(tmp_path):
    rows = surrogate_rates().tabulate([509.0 + 0.5 * k for k in range(95)])
    spectra = tmp_path / "spectra.csv"
    with open(spectra, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPECTRA_HEADER)
        writer.writerows(rows)
    cfg = RunConfig(
        validate_config(
            {"dye": {"kind": "tabulated", "spectra_path": str(spectra)}}
        )
    )
    dye = cfg.build_dye()
    assert dye.source == "tabulated"
    assert len(dye.source_digest) == 64
    assert dye.ks_violation_max < 1.01  # sampled from a KS-exact model


# ---------------------------------------------------------------------------
# command line


def write_cfg(tmp_path, name="config.json", **sections):
    base = {
        "trap": {"max_quanta": 2},
        "grid": {"points_per_axis": 64},
        "sweep": {"thresholds_xi_count": 7, "xi_count": 2, "p_span": 4.0,
                  "cutoff_p_span": 3.0, "cutoffs_THz": [515.0],
                  "pump_count": 5},
    }
    for section, content in sections.items():
        base.setdefault(section, {}).update(content)
    path = tmp_path / name
    path.write_text(json.dumps(base))
    return path


def test_parser_accepts_shared_flags():
    args = cli.build_parser().parse_args(
        ["phase-diagram", "--config", "c.json", "--out", "d",
         "--workers", "3", "--report-p-over-gamma"]
    )
    assert args.command == "phase-diagram"
    assert args.config == "c.json"
    assert args.out == "d"
    assert args.workers == 3
    assert args.report_p_over_gamma
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])  # a subcommand is required


def test_config_error_exits_1(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"sweep": {"pump_maxx": 1.0}}))
    out = tmp_path / "out"
    code = cli.main(["steady", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"
    assert "pump_maxx" in err["message"]
    assert not out.exists()  # rejected before any output

    code = cli.main(["steady", "--workers", "0", "--out", str(out)])
    assert code == 1


def test_steady_requires_pump(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    code = cli.main(["steady", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"
    summary = json.loads((out / "error.json").read_text())
    assert "pump_GHz" in summary["message"]


def test_steady_end_to_end_and_manifest_reingestion(tmp_path):
    cfg = write_cfg(tmp_path, system={"pump_GHz": 0.02})
    out_a = tmp_path / "a"
    assert cli.main(["steady", "--config", str(cfg), "--out", str(out_a)]) == 0
    for name in ("steady.csv", "f_slice.csv", "steady.png",
                 "manifest.json", "timings.csv"):
        assert (out_a / name).exists()
    lines = (out_a / "steady.csv").read_text().splitlines()
    assert lines[0] == "nu_x,nu_y,energy_THz,n_i,G_i,G_i_th,selected_flag"
    assert len(lines) == 1 + 6
    assert (out_a / "f_slice.csv").read_text().splitlines()[0] == "x_over_d,f"
    manifest = json.loads((out_a / "manifest.json").read_text())
    assert manifest["config"]["output"]["dir"] is None  # blanked for reruns
    assert manifest["config"]["sweep"]["workers"] is None

    # the manifest is itself a valid config: rerunning reproduces the run
    out_b = tmp_path / "b"
    code = cli.main(
        ["steady", "--config", str(out_a / "manifest.json"), "--out", str(out_b)]
    )
    assert code == 0
    assert (out_b / "manifest.json").read_bytes() == (
        out_a / "manifest.json"
    ).read_bytes()
    assert (out_b / "steady.csv").read_bytes() == (out_a / "steady.csv").read_bytes()


def test_thresholds_end_to_end(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["thresholds", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "thresholds.csv").read_text().splitlines()
    assert lines[0] == "xi,nu_x,nu_y,G_th,P_th_GHz,is_argmin"
    assert len(lines) == 1 + 7 * 6  # xi grid x modes
    argmin = (out / "argmin.csv").read_text().splitlines()
    assert argmin[0] == "xi,nu_x,nu_y,P_th_GHz"
    assert len(argmin) == 1 + 7
    assert (out / "thresholds.png").exists()


def test_pump_sweep_end_to_end_with_unit_switch(tmp_path):
    cfg = write_cfg(tmp_path, sweep={"f_slice_pumps_over_th": [2.0]})
    out = tmp_path / "out"
    assert cli.main(["pump-sweep", "--config", str(cfg), "--out", str(out)]) == 0
    pops = (out / "populations.csv").read_text().splitlines()
    assert pops[0].startswith("P_GHz,n_0:0,")
    assert len(pops) == 1 + 5
    events = (out / "events.csv").read_text().splitlines()
    assert events[0] == "P_GHz,nu_x,nu_y,event,declamping"
    assert any("selected" in line for line in events[1:])
    slices = (out / "f_slices.csv").read_text().splitlines()
    assert slices[0].startswith("x_over_d,f_P_")
    assert len(slices) == 1 + 64
    assert (out / "pump_sweep.png").exists()
    assert (out / "f_slices.png").exists()

    out2 = tmp_path / "out2"
    code = cli.main(
        ["pump-sweep", "--config", str(cfg), "--out", str(out2),
         "--report-p-over-gamma"]
    )
    assert code == 0
    pops2 = (out2 / "populations.csv").read_text().splitlines()
    assert pops2[0].startswith("P_over_Gamma,")
    p_ghz = float(pops[1].split(",")[0])
    p_rel = float(pops2[1].split(",")[0])
    assert p_rel == pytest.approx(p_ghz / 0.2)  # Gamma = 0.2 GHz


def test_phase_diagram_end_to_end(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    code = cli.main(
        ["phase-diagram", "--config", str(cfg), "--out", str(out), "--workers", "2"]
    )
    assert code == 0
    cells = (out / "cells.csv").read_text().splitlines()
    assert cells[0] == "xi,P,n_selected,ground_selected,selected_modes,converged"
    assert len({line.split(",")[0] for line in cells[1:]}) == 2  # two columns
    bounds = (out / "boundaries.csv").read_text().splitlines()
    assert bounds[0] == "xi,P_lower_GHz,P_upper_GHz,merged,saturated,P_analytic_GHz"
    assert len(bounds) == 1 + 2
    assert (out / "phase_diagram.png").exists()
    timing_labels = [
        row.split(",")[0]
        for row in (out / "timings.csv").read_text().splitlines()[1:]
    ]
    assert sum(lab.startswith("column_xi_") for lab in timing_labels) == 2


def test_cutoff_scan_end_to_end(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["cutoff-scan", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "cutoffs.csv").read_text().splitlines()
    assert lines[0] == (
        "cutoff_THz,P_first_GHz,first_modes,P_second_GHz,second_modes,"
        "saturated,error"
    )
    assert len(lines) == 2
    assert lines[1].startswith("515.0,")
    assert (out / "cutoff_scan.png").exists()


def test_thermal_check_end_to_end(tmp_path):
    cfg = write_cfg(tmp_path, system={"xi": 20.0})
    out = tmp_path / "out"
    assert cli.main(["thermal-check", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "thermal_summary.json").read_text())
    assert 0.8 < summary["slope_ratio"] < 1.2
    assert summary["modes_in_fit"] >= 5
    fit = (out / "thermal.csv").read_text().splitlines()
    assert fit[0] == "energy_THz,n_i,ln_term,fit_value"
    assert (out / "steady.csv").exists()
    assert (out / "thermal_check.png").exists()


def test_non_convergence_exits_2(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, system={"pump_GHz": 0.02})
    out = tmp_path / "out"
    monkeypatch.setitem(cli._HANDLERS, "steady", lambda cfg, out: False)
    code = cli.main(["steady", "--config", str(cfg), "--out", str(out)])
    assert code == 2
    summary = json.loads((out / "error.json").read_text())
    assert summary["error"] == "NonConvergence"
    assert json.loads(capsys.readouterr().err)["error"] == "NonConvergence"

    from dyecav import ConvergenceError

    def boom(cfg, out):
        raise ConvergenceError("forced failure")

    monkeypatch.setitem(cli._HANDLERS, "steady", boom)
    code = cli.main(["steady", "--config", str(cfg), "--out", str(out)])
    assert code == 2
    summary = json.loads((out / "error.json").read_text())
    assert summary["error"] == "ConvergenceError"
