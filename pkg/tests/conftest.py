"""Shared fixtures: one basis per grid size, one surrogate dye."""

import pytest

from dyecav import (
    SpatialGrid,
    SystemParams,
    TrapConfig,
    build_basis,
    surrogate_rates,
)
from dyecav.units import from_thz

CUTOFF = from_thz(515.0)


@pytest.fixture(scope="session")
def trap():
    return TrapConfig(omega_x=from_thz(4.0))


@pytest.fixture(scope="session")
def basis_default(trap):
    """Full-resolution basis (256 points per axis)."""
    return build_basis(trap, SpatialGrid())


@pytest.fixture(scope="session")
def basis_small(trap):
    """Half-resolution basis; plenty for solver behavior tests."""
    return build_basis(trap, SpatialGrid(points_per_axis=128))


@pytest.fixture(scope="session")
def dye():
    return surrogate_rates()


@pytest.fixture(scope="session")
def make_params(basis_small, dye):
    """Factory for small-grid system parameters at the default cutoff."""

    def factory(pump=0.0, xi=None, kappa=None, **kwargs):
        if xi is None and kappa is None:
            xi = 1.0
        return SystemParams(
            basis=basis_small,
            dye=dye,
            pump=pump,
            xi=xi,
            kappa=kappa,
            cutoff=CUTOFF,
            **kwargs,
        )

    return factory
