"""Run configuration: JSON schema, strict validation, object builders.

Configs are nested JSON with sections trap / grid / dye / system / solver /
sweep / output.  Every key has a default matching the reference experiment
(trap frequency 4 THz, anisotropy 0.99, cutoff 515 THz, molecule density
1e8 per d^2, R_up at cutoff 1 kHz d^2, Gamma 0.2 GHz, xi spanning
0.01-100), so an empty file {} is a valid configuration.  Unknown keys are
rejected with their dotted path; a run manifest can be re-ingested in
place of a config file.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .dye import (
    DyeModel,
    load_spectra_csv,
    surrogate_rates,
    tabulated_rates,
)
from .dynamics import SystemParams
from .modes import ModeBasis, SpatialGrid, TrapConfig, build_basis
from .units import from_thz

__all__ = ["ConfigError", "RunConfig", "load_config", "validate_config", "DEFAULTS"]


class ConfigError(ValueError):
    """Invalid run configuration; the message carries the dotted key path."""


_NUMBER = (int, float)

# every leaf: (default, expected types, nullable)
DEFAULTS = {
    "trap": {
        "omega_x_THz": (4.0, _NUMBER, False),
        "anisotropy": (0.99, _NUMBER, False),
        "max_quanta": (10, (int,), False),
        "oscillator_length": (1.0, _NUMBER, False),
    },
    "grid": {
        "half_width": (8.0, _NUMBER, False),
        "points_per_axis": (256, (int,), False),
    },
    "dye": {
        "kind": ("surrogate", (str,), False),
        "r_up_at_calibration_d2Hz": (1e3, _NUMBER, False),
        "calibration_freq_THz": (515.0, _NUMBER, False),
        "log_slope_per_THz": (0.168, _NUMBER, False),
        "zero_phonon_THz": (545.0, _NUMBER, False),
        "ks_constant": (1.0, _NUMBER, False),
        "temperature_K": (300.0, _NUMBER, False),
        "density_per_d2": (1e8, _NUMBER, False),
        "spectra_path": (None, (str,), True),
    },
    "system": {
        "cutoff_THz": (515.0, _NUMBER, False),
        "gamma_GHz": (0.2, _NUMBER, False),
        "xi": (1.0, _NUMBER, True),
        "kappa_GHz": (None, _NUMBER, True),
        "pump_GHz": (None, _NUMBER, True),
    },
    "solver": {
        "rtol": (1e-9, _NUMBER, False),
        "handoff": (1e-3, _NUMBER, False),
    },
    "sweep": {
        "pump_min_over_th": (0.5, _NUMBER, False),
        "pump_max_over_th": (30.0, _NUMBER, False),
        "pump_count": (41, (int,), False),
        "pump_spacing": ("log", (str,), False),
        "pump_min_GHz": (None, _NUMBER, True),
        "pump_max_GHz": (None, _NUMBER, True),
        "xi_min": (0.01, _NUMBER, False),
        "xi_max": (100.0, _NUMBER, False),
        "xi_count": (40, (int,), False),
        "thresholds_xi_count": (49, (int,), False),
        "cutoffs_THz": ([490.0, 515.0, 540.0], (list,), False),
        "f_slice_pumps_over_th": ([], (list,), False),
        "cold_checkpoints": (0, (int,), False),
        "boundary_rel": (1e-3, _NUMBER, False),
        "p_span": (3000.0, _NUMBER, False),
        "cutoff_p_span": (100.0, _NUMBER, False),
        "thermal_pump_over_th": (1.05, _NUMBER, False),
        "workers": (None, (int,), True),
    },
    "output": {
        "dir": (None, (str,), True),
        "p_over_gamma": (False, (bool,), False),
        "figures": (True, (bool,), False),
    },
}


def _check_leaf(path: str, value, spec):
    default, types, nullable = spec
    if value is None:
        if nullable:
            return None
        raise ConfigError(f"{path}: null is not allowed")
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{path}: expected {types[0].__name__}, got bool")
    if not isinstance(value, types):
        names = "/".join(t.__name__ for t in types)
        raise ConfigError(f"{path}: expected {names}, got {type(value).__name__}")
    if types == (int,) and isinstance(value, float):
        raise ConfigError(f"{path}: expected int, got float")
    return value


def validate_config(data: dict) -> dict:
    """Merge user data over the defaults, rejecting unknown keys.

    Returns the fully-resolved nested dict; raises ConfigError with the
    offending dotted path on unknown keys or type mismatches.
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    resolved = {}
    for section, leaves in DEFAULTS.items():
        resolved[section] = {k: copy.deepcopy(spec[0]) for k, spec in leaves.items()}
    for section, content in data.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown key: {section}")
        if not isinstance(content, dict):
            raise ConfigError(f"{section}: expected a JSON object")
        for key, value in content.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key: {section}.{key}")
            resolved[section][key] = _check_leaf(
                f"{section}.{key}", value, DEFAULTS[section][key]
            )
    _cross_validate(resolved)
    return resolved


def _cross_validate(cfg: dict):
    trap = cfg["trap"]
    if trap["omega_x_THz"] <= 0:
        raise ConfigError("trap.omega_x_THz: must be positive")
    if not 0 < trap["anisotropy"] <= 1:
        raise ConfigError("trap.anisotropy: must lie in (0, 1]")
    if trap["max_quanta"] < 0:
        raise ConfigError("trap.max_quanta: must be non-negative")
    grid = cfg["grid"]
    if grid["half_width"] <= 0:
        raise ConfigError("grid.half_width: must be positive")
    if grid["points_per_axis"] < 2:
        raise ConfigError("grid.points_per_axis: must be at least 2")
    dye = cfg["dye"]
    if dye["kind"] not in ("surrogate", "tabulated"):
        raise ConfigError("dye.kind: must be 'surrogate' or 'tabulated'")
    if dye["kind"] == "tabulated" and not dye["spectra_path"]:
        raise ConfigError("dye.spectra_path: required when dye.kind is 'tabulated'")
    system = cfg["system"]
    if (system["xi"] is None) == (system["kappa_GHz"] is None):
        raise ConfigError(
            "system: exactly one of system.xi and system.kappa_GHz must be set"
        )
    solver = cfg["solver"]
    if solver["rtol"] <= 0 or solver["handoff"] <= 0:
        raise ConfigError("solver: tolerances must be positive")
    sweep = cfg["sweep"]
    if sweep["pump_spacing"] not in ("log", "linear"):
        raise ConfigError("sweep.pump_spacing: must be 'log' or 'linear'")
    for key in ("pump_count", "xi_count", "thresholds_xi_count"):
        if sweep[key] < 1:
            raise ConfigError(f"sweep.{key}: must be at least 1")
    for key in ("cutoffs_THz", "f_slice_pumps_over_th"):
        if not all(isinstance(v, _NUMBER) and not isinstance(v, bool) for v in sweep[key]):
            raise ConfigError(f"sweep.{key}: must be a list of numbers")
    if sweep["workers"] is not None and sweep["workers"] < 1:
        raise ConfigError("sweep.workers: must be at least 1")


@dataclass(eq=False)
class RunConfig:
    """A validated configuration plus builders for the simulation objects."""

    data: dict

    def __getitem__(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def as_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def build_basis(self) -> ModeBasis:
        trap = TrapConfig(
            omega_x=from_thz(self["trap.omega_x_THz"]),
            anisotropy=self["trap.anisotropy"],
            max_quanta=self["trap.max_quanta"],
            oscillator_length=self["trap.oscillator_length"],
        )
        grid = SpatialGrid(
            half_width=self["grid.half_width"],
            points_per_axis=self["grid.points_per_axis"],
        )
        return build_basis(trap, grid)

    def build_dye(self) -> DyeModel:
        d = self.data["dye"]
        if d["kind"] == "surrogate":
            return surrogate_rates(
                r_up_at_cutoff=d["r_up_at_calibration_d2Hz"],
                log_slope=d["log_slope_per_THz"] * 1e-12,
                zero_phonon_freq=from_thz(d["zero_phonon_THz"]),
                ks_constant=d["ks_constant"],
                temperature=d["temperature_K"],
                density=d["density_per_d2"],
                calibration_freq=from_thz(d["calibration_freq_THz"]),
            )
        rows = load_spectra_csv(d["spectra_path"])
        dye = tabulated_rates(
            rows,
            zero_phonon_freq=from_thz(d["zero_phonon_THz"]),
            ks_constant=d["ks_constant"],
            temperature=d["temperature_K"],
            density=d["density_per_d2"],
        )
        with open(d["spectra_path"], "rb") as fh:
            dye.source_digest = hashlib.sha256(fh.read()).hexdigest()
        return dye

    def build_params(
        self,
        pump: float = 0.0,
        basis: ModeBasis = None,
        dye: DyeModel = None,
    ) -> SystemParams:
        basis = basis if basis is not None else self.build_basis()
        dye = dye if dye is not None else self.build_dye()
        kappa = self["system.kappa_GHz"]
        return SystemParams(
            basis=basis,
            dye=dye,
            pump=pump,
            gamma=self["system.gamma_GHz"] * 1e9,
            kappa=None if kappa is None else kappa * 1e9,
            xi=self["system.xi"],
            cutoff=from_thz(self["system.cutoff_THz"]),
        )

    @property
    def p_unit(self) -> str:
        return "over_Gamma" if self["output.p_over_gamma"] else "GHz"

    def p_scale(self) -> float:
        """Multiplier taking internal pump rates (Hz) to reported values."""
        if self["output.p_over_gamma"]:
            return 1.0 / (self["system.gamma_GHz"] * 1e9)
        return 1e-9


def load_config(path) -> RunConfig:
    """Load a config file, or a run manifest standing in for one."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in {path}: {err}") from err
    if isinstance(data, dict) and "config" in data and "versions" in data:
        data = data["config"]
    return RunConfig(validate_config(data))
