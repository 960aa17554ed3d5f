"""Steady-state mode selection in homogeneously pumped dye microcavities.

The package solves coupled photon-mode / dye-excitation rate equations on
a 2-D harmonic trap basis, detects which cavity modes acquire macroscopic
occupation, and maps how that selection pattern changes with pump rate,
photon-reabsorption strength and the cavity cutoff frequency.
"""

__version__ = "0.1.0"

from .analysis import (
    PhaseBoundaries,
    SelectionTrace,
    ThermalFit,
    ThresholdReport,
    extract_phase_boundaries,
    first_threshold_pump,
    thermal_compare,
    threshold_gain,
    threshold_surface,
    trace_selection,
)
from .config import ConfigError, RunConfig, load_config, validate_config
from .dye import (
    DyeDataError,
    DyeModel,
    DyeWindowError,
    RateTable,
    chemical_potential,
    load_spectra_csv,
    rates_for_basis,
    surrogate_rates,
    tabulated_rates,
)
from .dynamics import (
    ConvergenceError,
    OscillationDetected,
    SteadyState,
    SystemParams,
    SystemState,
    analytic_occupation,
    detect_selected,
    evolve_to_steady,
    gain,
    rhs,
    solve_self_consistent,
)
from .modes import (
    BasisResolutionError,
    Mode,
    ModeBasis,
    SpatialGrid,
    TrapConfig,
    build_basis,
    oscillator_eigenfunction,
    overlap_matrix,
)
from .sweeps import (
    PhaseDiagram,
    RunManifest,
    SweepAxis,
    SweepResult,
    SweepSpec,
    locate_first_selection,
    run_cutoff_scan,
    run_phase_diagram,
    run_pump_sweep,
)
from .units import from_thz, thz

__all__ = [
    "__version__",
    # units
    "from_thz",
    "thz",
    # modes
    "TrapConfig",
    "SpatialGrid",
    "Mode",
    "ModeBasis",
    "BasisResolutionError",
    "oscillator_eigenfunction",
    "build_basis",
    "overlap_matrix",
    # dye
    "DyeModel",
    "RateTable",
    "DyeDataError",
    "DyeWindowError",
    "surrogate_rates",
    "tabulated_rates",
    "load_spectra_csv",
    "rates_for_basis",
    "chemical_potential",
    # dynamics
    "SystemParams",
    "SystemState",
    "SteadyState",
    "ConvergenceError",
    "OscillationDetected",
    "gain",
    "rhs",
    "analytic_occupation",
    "evolve_to_steady",
    "solve_self_consistent",
    "detect_selected",
    # analysis
    "ThresholdReport",
    "SelectionTrace",
    "ThermalFit",
    "PhaseBoundaries",
    "threshold_gain",
    "first_threshold_pump",
    "threshold_surface",
    "trace_selection",
    "thermal_compare",
    "extract_phase_boundaries",
    # sweeps
    "SweepAxis",
    "SweepSpec",
    "SweepResult",
    "PhaseDiagram",
    "RunManifest",
    "run_pump_sweep",
    "run_phase_diagram",
    "run_cutoff_scan",
    "locate_first_selection",
    # config
    "RunConfig",
    "ConfigError",
    "load_config",
    "validate_config",
]
