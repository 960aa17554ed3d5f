"""Unit conventions and conversion helpers.

Conventions used throughout the package:

- positions are measured in units of the ground-axis oscillator length d
- angular frequencies (trap frequencies, the dye zero-phonon line, the
  cavity cutoff) are stored in rad/s
- kinetic rates (pump, cavity loss, non-cavity decay) are plain Hz
- molecular rate coefficients carry d^2*Hz so that rate * density and
  rate * |psi|^2 are plain frequencies
- reported frequencies are THz, reported rates are GHz
"""

import math

from scipy.constants import hbar, k as k_B  # noqa: F401  (re-exported)

TWO_PI = 2.0 * math.pi


def thz(omega):
    """Angular frequency in rad/s -> ordinary frequency in THz."""
    return omega / (TWO_PI * 1e12)


def from_thz(nu_thz):
    """Ordinary frequency in THz -> angular frequency in rad/s."""
    return TWO_PI * 1e12 * nu_thz


def ghz(rate_hz):
    return rate_hz / 1e9


def from_ghz(rate_ghz):
    return 1e9 * rate_ghz


def inverse_thermal_energy(temperature):
    """1/(k_B T) in 1/J for a temperature in kelvin."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return 1.0 / (k_B * temperature)
