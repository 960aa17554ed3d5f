"""Mode basis: eigenfunctions, grid quadrature, ordering, guards."""

import math

import numpy as np
import pytest

from dyecav import (
    BasisResolutionError,
    SpatialGrid,
    TrapConfig,
    build_basis,
    oscillator_eigenfunction,
    overlap_matrix,
)
from dyecav.units import from_thz


def test_ground_state_peak_value():
    # phi_0(0) = pi^(-1/4)
    assert oscillator_eigenfunction(0, 0.0) == pytest.approx(math.pi**-0.25, rel=1e-14)


def test_odd_states_have_node_at_origin():
    for n in (1, 3, 7):
        assert oscillator_eigenfunction(n, 0.0) == 0.0


def test_eigenfunction_matches_explicit_hermite():
    # phi_3(x) = pi^(-1/4)/sqrt(48) * (8x^3 - 12x) * exp(-x^2/2)
    x = np.linspace(-4.0, 4.0, 17)
    expected = (
        math.pi**-0.25 / math.sqrt(48.0) * (8 * x**3 - 12 * x) * np.exp(-0.5 * x * x)
    )
    assert np.allclose(oscillator_eigenfunction(3, x), expected, atol=1e-13)


def test_eigenfunction_unit_norm_high_n():
    x = np.linspace(-10.0, 10.0, 4001)
    for n in (0, 5, 10):
        phi = oscillator_eigenfunction(n, x)
        assert np.trapezoid(phi**2, x) == pytest.approx(1.0, abs=1e-10)


def test_negative_quantum_number_rejected():
    with pytest.raises(ValueError):
        oscillator_eigenfunction(-1, 0.0)


def test_grid_weights_sum_to_domain_area():
    grid = SpatialGrid(half_width=6.0, points_per_axis=51)
    assert grid.weights.sum() == pytest.approx((2 * 6.0) ** 2, rel=1e-12)
    assert np.allclose(grid.axis, -grid.axis[::-1])


def test_quadrature_accepts_both_field_shapes():
    grid = SpatialGrid(half_width=5.0, points_per_axis=64)
    field = np.exp(-(grid.nodes**2).sum(axis=1))
    flat = grid.quadrature(field)
    square = grid.quadrature(field.reshape(64, 64))
    assert flat == pytest.approx(square, rel=1e-13)
    assert flat == pytest.approx(math.pi, rel=1e-6)  # int e^{-r^2} d^2r
    with pytest.raises(ValueError):
        grid.quadrature(field[:-1])


def test_basis_size_and_ordering(basis_default):
    # 66 modes for max_quanta = 10
    assert len(basis_default) == 66
    assert basis_default.quantum_numbers[0] == (0, 0)
    energies = basis_default.energies
    assert np.all(np.diff(energies) >= 0)
    # anisotropy 0.99 puts (0,1) below (1,0)
    assert basis_default.index_of(0, 1) < basis_default.index_of(1, 0)


def test_pair_splitting_scales_with_anisotropy(basis_default):
    # E(nu,0) - E(0,nu) = nu * (1 - anisotropy) * Omega_x
    trap = basis_default.trap
    for nu in (1, 2, 5):
        split = (
            basis_default.energies[basis_default.index_of(nu, 0)]
            - basis_default.energies[basis_default.index_of(0, nu)]
        )
        assert split == pytest.approx(nu * 0.01 * trap.omega_x, rel=1e-12)


def test_densities_normalized_and_symmetric(basis_default):
    grid = basis_default.grid
    for i in (0, 13, 65):
        density = basis_default.modes[i].density
        assert grid.quadrature(density) == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(density, density[::-1, :])
        assert np.allclose(density, density[:, ::-1])


def test_orthonormality_small_grid(basis_small):
    overlap = overlap_matrix(basis_small)
    dev = np.abs(overlap - np.eye(len(basis_small))).max()
    assert dev < 1e-6


def test_coarse_grid_rejected(trap):
    with pytest.raises(BasisResolutionError):
        build_basis(trap, SpatialGrid(points_per_axis=32))


def test_narrow_grid_rejected(trap):
    # domain too small to contain the nu = 10 tail
    with pytest.raises(BasisResolutionError, match="contain"):
        build_basis(trap, SpatialGrid(half_width=3.0, points_per_axis=256))


def test_trap_validation():
    with pytest.raises(ValueError):
        TrapConfig(omega_x=-1.0)
    with pytest.raises(ValueError):
        TrapConfig(omega_x=from_thz(4.0), anisotropy=1.5)
    trap = TrapConfig(omega_x=from_thz(4.0), anisotropy=0.5)
    assert trap.omega_y == pytest.approx(0.5 * trap.omega_x)


def test_basis_csv_export(tmp_path, basis_small):
    path = tmp_path / "modes.csv"
    basis_small.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "nu_x,nu_y,energy_THz"
    assert len(lines) == 1 + 66
    nu_x, nu_y, energy = lines[1].split(",")
    assert (int(nu_x), int(nu_y)) == (0, 0)
    # ground transverse energy: (omega_x + omega_y)/2 with Omega_x = 4 THz
    assert float(energy) == pytest.approx(2.0 + 2.0 * 0.99, rel=1e-12)
