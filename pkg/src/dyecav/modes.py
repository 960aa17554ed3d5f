"""Transverse cavity modes of a 2D anisotropic harmonic trap.

The mode basis consists of all harmonic-oscillator product states with
nu_x + nu_y <= max_quanta, sampled on a uniform square grid together with
trapezoidal quadrature weights.  The slight trap anisotropy (omega_y =
0.99 omega_x by default) splits the symmetric-pair degeneracies and enters
the per-axis oscillator lengths as well as the energies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .units import hbar, thz

__all__ = [
    "TrapConfig",
    "SpatialGrid",
    "Mode",
    "ModeBasis",
    "BasisResolutionError",
    "oscillator_eigenfunction",
    "build_basis",
    "overlap_matrix",
]


class BasisResolutionError(ValueError):
    """Raised when the grid cannot resolve or contain the requested basis."""


@dataclass(frozen=True)
class TrapConfig:
    """Trap frequencies and basis truncation.

    omega_x is the angular trap frequency along x in rad/s; anisotropy is
    omega_y/omega_x.  All positions are expressed in units of the x-axis
    oscillator length d, so ``oscillator_length`` is the unit marker and
    defaults to 1.
    """

    omega_x: float
    anisotropy: float = 0.99
    max_quanta: int = 10
    oscillator_length: float = 1.0

    def __post_init__(self):
        if self.omega_x <= 0:
            raise ValueError("omega_x must be positive")
        if not 0.0 < self.anisotropy <= 1.0:
            raise ValueError("anisotropy must lie in (0, 1]")
        if self.max_quanta < 0:
            raise ValueError("max_quanta must be non-negative")

    @property
    def omega_y(self) -> float:
        return self.anisotropy * self.omega_x


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform square grid over [-L, L]^2 with trapezoidal quadrature.

    The axis is symmetric under reflection: node k and node N-1-k sit at
    opposite positions.  The sum of all 2D weights equals (2L)^2.
    """

    half_width: float = 8.0
    points_per_axis: int = 256

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be at least 2")

    @property
    def axis(self) -> np.ndarray:
        n = self.points_per_axis
        h = 2.0 * self.half_width / (n - 1)
        return (np.arange(n) - (n - 1) / 2.0) * h

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis - 1)

    @property
    def axis_weights(self) -> np.ndarray:
        w = np.full(self.points_per_axis, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @property
    def nodes(self) -> np.ndarray:
        """(N^2, 2) array of node coordinates, x varying slowest."""
        x = self.axis
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    @property
    def weights(self) -> np.ndarray:
        """(N^2,) quadrature weights matching ``nodes``."""
        w = self.axis_weights
        return np.outer(w, w).ravel()

    def quadrature(self, values: np.ndarray) -> float:
        """Integrate a field sampled on the grid ((N, N) or flat)."""
        w = self.axis_weights
        v = np.asarray(values)
        if v.shape == (self.points_per_axis, self.points_per_axis):
            return float(w @ v @ w)
        if v.shape == (self.points_per_axis**2,):
            return float(self.weights @ v)
        raise ValueError(f"field shape {v.shape} does not match the grid")


@dataclass(frozen=True, eq=False)
class Mode:
    nu_x: int
    nu_y: int
    transverse_energy: float  # E_i / hbar in rad/s
    density: np.ndarray  # |psi|^2 on the (N, N) grid

    @property
    def quanta(self) -> int:
        return self.nu_x + self.nu_y

    @property
    def label(self) -> str:
        return f"({self.nu_x},{self.nu_y})"

    @property
    def token(self) -> str:
        """CSV-safe identifier, e.g. "2:0"."""
        return f"{self.nu_x}:{self.nu_y}"


def oscillator_eigenfunction(n: int, x) -> np.ndarray:
    """Normalized 1D harmonic-oscillator eigenfunction at position x.

    x is in units of the oscillator length.  Uses the stable normalized
    recurrence phi_{n+1} = x*sqrt(2/(n+1))*phi_n - sqrt(n/(n+1))*phi_{n-1},
    which avoids the factorial overflow of the raw Hermite-polynomial route
    and stays accurate for large n.
    """
    if n < 0:
        raise ValueError("quantum number must be non-negative")
    x = np.asarray(x, dtype=float)
    phi_prev = np.zeros_like(x)
    phi = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    for k in range(n):
        phi, phi_prev = (
            x * math.sqrt(2.0 / (k + 1)) * phi - math.sqrt(k / (k + 1.0)) * phi_prev,
            phi,
        )
    return phi


@dataclass(eq=False)
class ModeBasis:
    """All modes with nu_x + nu_y <= max_quanta, ordered by energy.

    Ties in energy are broken by ascending nu_x, so the ordering is
    deterministic.  One-dimensional amplitude tables are kept for overlap
    computations and density factorization.
    """

    trap: TrapConfig
    grid: SpatialGrid
    modes: list[Mode]
    # phi_x[n] is the n-quanta amplitude along x sampled on grid.axis, etc.
    _phi_x: np.ndarray = field(repr=False, default=None)
    _phi_y: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.modes)

    def index_of(self, nu_x: int, nu_y: int) -> int:
        for i, m in enumerate(self.modes):
            if m.nu_x == nu_x and m.nu_y == nu_y:
                return i
        raise KeyError(f"mode ({nu_x},{nu_y}) not in basis")

    @property
    def energies(self) -> np.ndarray:
        return np.array([m.transverse_energy for m in self.modes])

    @property
    def quantum_numbers(self) -> list[tuple[int, int]]:
        return [(m.nu_x, m.nu_y) for m in self.modes]

    def density_matrix(self) -> np.ndarray:
        """(n_modes, N^2) stacked densities; cached after first call."""
        cached = getattr(self, "_density_matrix", None)
        if cached is None:
            cached = np.stack([m.density.ravel() for m in self.modes])
            self._density_matrix = cached
        return cached

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["nu_x", "nu_y", "energy_THz"])
            for m in self.modes:
                writer.writerow([m.nu_x, m.nu_y, str(thz(m.transverse_energy))])


def _axis_amplitudes(grid: SpatialGrid, length: float, n_max: int) -> np.ndarray:
    """(n_max+1, N) table of 1D eigenfunctions for one axis.

    ``length`` is the per-axis oscillator length in units of d; the
    amplitude carries the 1/sqrt(length) normalization factor.
    """
    scaled = grid.axis / length
    return np.stack(
        [oscillator_eigenfunction(n, scaled) / math.sqrt(length) for n in range(n_max + 1)]
    )


def build_basis(trap: TrapConfig, grid: SpatialGrid) -> ModeBasis:
    """Construct the full mode basis and validate the discretization.

    Fails with a diagnostic if the grid is too small (norm leaks out of the
    domain) or too coarse (orthonormality of the sampled eigenfunctions
    breaks down) for the requested max_quanta.
    """
    n_max = trap.max_quanta
    # per-axis oscillator lengths: l ~ omega^(-1/2), with l_x = 1 by the
    # choice of the position unit d
    l_x = 1.0
    l_y = trap.anisotropy ** -0.5
    phi_x = _axis_amplitudes(grid, l_x, n_max)
    phi_y = _axis_amplitudes(grid, l_y, n_max)

    w = grid.axis_weights
    norm_x = (phi_x**2) @ w
    norm_y = (phi_y**2) @ w
    worst_containment = min(norm_x.min(), norm_y.min())
    if worst_containment < 1.0 - 1e-8:
        raise BasisResolutionError(
            f"grid [-{grid.half_width}, {grid.half_width}] with "
            f"{grid.points_per_axis} points per axis does not contain the "
            f"basis: worst per-axis norm {worst_containment:.3e} "
            f"(needs >= 1 - 1e-8); enlarge half_width or refine the grid"
        )

    modes = []
    for nu_x in range(n_max + 1):
        for nu_y in range(n_max + 1 - nu_x):
            energy = trap.omega_x * (nu_x + 0.5) + trap.omega_y * (nu_y + 0.5)
            density = np.outer(phi_x[nu_x] ** 2, phi_y[nu_y] ** 2)
            modes.append(Mode(nu_x, nu_y, energy, density))
    modes.sort(key=lambda m: (m.transverse_energy, m.nu_x))

    basis = ModeBasis(trap=trap, grid=grid, modes=modes, _phi_x=phi_x, _phi_y=phi_y)

    overlap = overlap_matrix(basis)
    dev = np.abs(overlap - np.eye(len(modes))).max()
    if dev > 1e-6:
        raise BasisResolutionError(
            f"grid with {grid.points_per_axis} points per axis is too coarse "
            f"for max_quanta={n_max}: worst orthonormality deviation {dev:.3e} "
            f"(needs < 1e-6)"
        )
    return basis


def overlap_matrix(basis: ModeBasis) -> np.ndarray:
    """Matrix of quadrature overlaps <psi_i|psi_j> over the basis.

    The product wavefunctions factorize per axis, so the 2D quadrature is
    evaluated as a product of per-axis quadratures.
    """
    w = basis.grid.axis_weights
    sx = (basis._phi_x * w) @ basis._phi_x.T
    sy = (basis._phi_y * w) @ basis._phi_y.T
    nx = np.array([m.nu_x for m in basis.modes])
    ny = np.array([m.nu_y for m in basis.modes])
    return sx[np.ix_(nx, nx)] * sy[np.ix_(ny, ny)]
