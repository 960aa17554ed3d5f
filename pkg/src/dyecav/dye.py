"""Dye absorption/emission rates and their thermodynamic bookkeeping.

A dye model supplies the molecular absorption and emission rate
coefficients R_up(omega), R_down(omega) (units d^2*Hz) for the cavity-mode
frequencies, together with the inverse thermal energy beta, the
zero-phonon frequency omega_z, the proportionality constant C of the
Kennard-Stepanov relation

    R_down(omega) / R_up(omega) = C * exp(-beta * hbar * (omega - omega_z)),

and the molecular density rho (per d^2).  Two sources exist: an exactly
KS-obeying parametric surrogate with log-linear absorption, and tabulated
spectra ingested from CSV (which may violate the KS relation; the maximal
violation over the table is reported as a diagnostic).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .units import TWO_PI, from_thz, hbar, inverse_thermal_energy, thz

__all__ = [
    "DyeModel",
    "RateTable",
    "DyeDataError",
    "DyeWindowError",
    "surrogate_rates",
    "tabulated_rates",
    "load_spectra_csv",
    "rates_for_basis",
    "chemical_potential",
]

SPECTRA_HEADER = ["frequency_THz", "absorption_d2Hz", "emission_d2Hz"]


class DyeDataError(ValueError):
    """Malformed tabulated spectra (ordering, coverage, signs)."""


class DyeWindowError(ValueError):
    """Requested frequency lies outside the tabulated window."""


@dataclass(eq=False)
class DyeModel:
    beta: float  # 1/(k_B T) in 1/J
    zero_phonon_freq: float  # omega_z in rad/s
    ks_constant: float  # C
    density: float  # rho, molecules per d^2
    source: str  # "surrogate" | "tabulated"

    # surrogate parametrization
    r_up_at_calibration: float = None  # d^2*Hz
    calibration_freq: float = None  # rad/s
    log_slope: float = None  # d ln(R_up) / d nu, per Hz of ordinary frequency

    # tabulated parametrization (log-rates, piecewise linear in frequency)
    table_freq: np.ndarray = field(default=None, repr=False)
    table_log_up: np.ndarray = field(default=None, repr=False)
    table_log_down: np.ndarray = field(default=None, repr=False)
    ks_violation_max: float = None

    def __post_init__(self):
        # the absorption profile is exposed as a plain frequency -> rate map
        self.absorption_profile = self.absorption

    def window(self) -> tuple[float, float]:
        """Angular-frequency window over which rates are defined."""
        if self.source == "tabulated":
            return float(self.table_freq[0]), float(self.table_freq[-1])
        return 0.0, math.inf

    def _check_window(self, omega: np.ndarray) -> None:
        lo, hi = self.window()
        bad = (omega < lo) | (omega > hi)
        if np.any(bad):
            outside = np.atleast_1d(omega)[np.atleast_1d(bad)]
            raise DyeWindowError(
                "frequencies outside the tabulated window "
                f"[{thz(lo):.2f}, {thz(hi):.2f}] THz: "
                + ", ".join(f"{thz(v):.3f}" for v in outside[:8])
            )

    def absorption(self, omega):
        """R_up at angular frequency omega (rad/s), in d^2*Hz."""
        omega = np.asarray(omega, dtype=float)
        self._check_window(omega)
        if self.source == "surrogate":
            nu_detune = (omega - self.calibration_freq) / TWO_PI
            return self.r_up_at_calibration * np.exp(self.log_slope * nu_detune)
        return np.exp(np.interp(omega, self.table_freq, self.table_log_up))

    def emission(self, omega):
        """R_down at angular frequency omega (rad/s), in d^2*Hz."""
        omega = np.asarray(omega, dtype=float)
        self._check_window(omega)
        if self.source == "surrogate":
            boltzmann = np.exp(-self.beta * hbar * (omega - self.zero_phonon_freq))
            return self.absorption(omega) * self.ks_constant * boltzmann
        return np.exp(np.interp(omega, self.table_freq, self.table_log_down))

    def ks_ratio(self, omega):
        """The Kennard-Stepanov prediction for R_down/R_up at omega."""
        omega = np.asarray(omega, dtype=float)
        return self.ks_constant * np.exp(-self.beta * hbar * (omega - self.zero_phonon_freq))

    def tabulate(self, freqs_thz) -> list[tuple[float, float, float]]:
        """Sample the model into spectra rows (frequency_THz, R_up, R_down)."""
        rows = []
        for nu in freqs_thz:
            omega = from_thz(nu)
            rows.append(
                (float(nu), float(self.absorption(omega)), float(self.emission(omega)))
            )
        return rows


@dataclass(eq=False)
class RateTable:
    """Per-mode rate coefficients for one basis at one cutoff frequency."""

    r_up: np.ndarray  # d^2*Hz, one entry per mode
    r_down: np.ndarray
    mode_freqs: np.ndarray  # total mode frequencies epsilon_i/hbar in rad/s
    cutoff: float  # rad/s
    dye: DyeModel
    basis: object

    def __post_init__(self):
        if len(self.r_up) != len(self.r_down) or len(self.r_up) != len(self.mode_freqs):
            raise ValueError("rate arrays and mode frequencies must have equal length")
        if np.any(self.r_up < 0) or np.any(self.r_down < 0):
            raise ValueError("rates must be non-negative")

    def __len__(self) -> int:
        return len(self.r_up)

    @property
    def r_up_ground(self) -> float:
        """Absorption coefficient of the lowest mode (the cutoff mode)."""
        return float(self.r_up[0])

    def threshold_gain(self, kappa: float) -> np.ndarray:
        """Per-mode gain level at which the net photon rate crosses zero.

        G_i_th = (R_up_i + kappa/rho) / (R_up_i + R_down_i); a selected
        mode's gain clamps at this value.
        """
        rho = self.dye.density
        return (self.r_up + kappa / rho) / (self.r_up + self.r_down)


def surrogate_rates(
    r_up_at_cutoff: float = 1e3,
    log_slope: float = 0.168e-12,
    zero_phonon_freq: float = from_thz(545.0),
    ks_constant: float = 1.0,
    temperature: float = 300.0,
    density: float = 1e8,
    calibration_freq: float = from_thz(515.0),
) -> DyeModel:
    """Parametric dye with log-linear absorption and exact KS emission.

    ``log_slope`` is d ln(R_up)/d nu per Hz of ordinary frequency (default
    0.168 per THz, rising toward the zero-phonon line); the absorption is
    calibrated to ``r_up_at_cutoff`` (d^2*Hz) at ``calibration_freq``.
    """
    if r_up_at_cutoff <= 0:
        raise ValueError("r_up_at_cutoff must be positive")
    if ks_constant <= 0:
        raise ValueError("ks_constant must be positive")
    beta = inverse_thermal_energy(temperature)
    if density <= 0:
        raise ValueError("density must be positive")
    return DyeModel(
        beta=beta,
        zero_phonon_freq=zero_phonon_freq,
        ks_constant=ks_constant,
        density=density,
        source="surrogate",
        r_up_at_calibration=r_up_at_cutoff,
        calibration_freq=calibration_freq,
        log_slope=log_slope,
    )


def tabulated_rates(
    csv_rows,
    zero_phonon_freq: float = from_thz(545.0),
    ks_constant: float = 1.0,
    temperature: float = 300.0,
    density: float = 1e8,
) -> DyeModel:
    """Dye from measured-style spectra rows (frequency_THz, R_up, R_down).

    Rates are interpolated piecewise-linearly in log-rate, which preserves
    positivity and monotonicity between nodes.  The maximal relative
    violation of the KS relation over the table is recorded in
    ``ks_violation_max`` (factor >= 1; informative, not fatal).
    """
    rows = [tuple(map(float, r)) for r in csv_rows]
    if len(rows) < 2:
        raise DyeDataError("need at least two spectra rows")
    freqs = np.array([r[0] for r in rows])
    if np.any(np.diff(freqs) <= 0):
        raise DyeDataError("spectra frequencies must be strictly increasing")
    up = np.array([r[1] for r in rows])
    down = np.array([r[2] for r in rows])
    if np.any(up <= 0) or np.any(down <= 0):
        raise DyeDataError(
            "spectra rates must be positive (log-linear interpolation)"
        )
    beta = inverse_thermal_energy(temperature)
    omega = from_thz(freqs)
    model = DyeModel(
        beta=beta,
        zero_phonon_freq=zero_phonon_freq,
        ks_constant=ks_constant,
        density=density,
        source="tabulated",
        table_freq=omega,
        table_log_up=np.log(up),
        table_log_down=np.log(down),
    )
    ratio = down / up
    ks = model.ks_ratio(omega)
    factor = np.maximum(ratio / ks, ks / ratio)
    model.ks_violation_max = float(factor.max())
    return model


def load_spectra_csv(path) -> list[tuple[float, float, float]]:
    """Read a spectra CSV with the exact header frequency_THz,absorption_d2Hz,emission_d2Hz."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPECTRA_HEADER:
            raise DyeDataError(
                f"spectra header must be {','.join(SPECTRA_HEADER)}, got {header}"
            )
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise DyeDataError(f"malformed spectra row: {row}")
            rows.append((float(row[0]), float(row[1]), float(row[2])))
    return rows


def rates_for_basis(dye: DyeModel, basis, cutoff: float) -> RateTable:
    """Evaluate the dye at the total mode frequencies for a given cutoff.

    The total frequency of mode i is epsilon_i/hbar = E_i/hbar - E_0/hbar
    + omega_c: shifting the cutoff rigidly shifts every mode.
    """
    energies = basis.energies
    mode_freqs = energies - energies[0] + cutoff
    try:
        r_up = np.asarray(dye.absorption(mode_freqs), dtype=float)
        r_down = np.asarray(dye.emission(mode_freqs), dtype=float)
    except DyeWindowError as exc:
        lo, hi = dye.window()
        bad = [
            basis.modes[i].label
            for i in range(len(basis))
            if not lo <= mode_freqs[i] <= hi
        ]
        raise DyeWindowError(
            f"modes outside the dye window at cutoff {thz(cutoff):.2f} THz: "
            + ", ".join(bad)
        ) from exc
    return RateTable(
        r_up=r_up,
        r_down=r_down,
        mode_freqs=mode_freqs,
        cutoff=cutoff,
        dye=dye,
        basis=basis,
    )


def chemical_potential(f_homogeneous: float, dye: DyeModel) -> float:
    """Chemical potential (in J) of the photon gas for a homogeneous
    excited fraction f, from exp(beta*mu) = C exp(beta*hbar*omega_z) f/(1-f)."""
    if not 0.0 < f_homogeneous < 1.0:
        raise ValueError("homogeneous excited fraction must lie strictly in (0, 1)")
    return hbar * dye.zero_phonon_freq + math.log(
        dye.ks_constant * f_homogeneous / (1.0 - f_homogeneous)
    ) / dye.beta
