# anelastic/__init__.py

from .errors import (
    CFLViolation,
    ConstraintViolation,
    ConvergenceFailure,
    EigenError,
    GridError,
    NearResonanceWarning,
    PositivityError,
    ScenarioConfigError,
    SnapshotError,
    StepBudgetExceeded,
    TimeMismatch,
    ToleranceConflict,
    WindingError,
)
from .spectral import TorusField, TorusGrid
from .gpe import WaveState, InitialDataSpec, build_initial_state, conserved_quantities, evolve, strang_step
from .hydro import HydroState, conservation_residuals, dispersive_term, fastwave_forcing, observables
from .helmholtz import WeightedHelmholtz, leray_project, project, solve_weighted_poisson
from .fastwave import (
    EigenSystem,
    FastWaveVector,
    ResonanceSet,
    assemble_operator,
    build_eigensystem,
    eigendecompose,
    expand,
    filter_state,
    q1,
    q2,
    reconstruct,
    resonance_set,
    time_average_oracle,
    wave_group,
)
from .limits import (
    AnelasticState,
    OscillatingState,
    anelastic_step,
    coupled_evolve,
    oscillating_rhs,
    oscillating_step,
)
from .modulated import convergence_functionals, modulated_energy
from .models import ConvergenceRow, ConvergenceTable, ModulatedEnergyReport
from .loaders import ScenarioConfig, load_scenario, parse_scenario
from .services import get_eigensystem_cached, get_spectrum_cached, run_scenario

__all__ = [
    # errors
    "CFLViolation",
    "ConstraintViolation",
    "ConvergenceFailure",
    "EigenError",
    "GridError",
    "NearResonanceWarning",
    "PositivityError",
    "ScenarioConfigError",
    "SnapshotError",
    "StepBudgetExceeded",
    "TimeMismatch",
    "ToleranceConflict",
    "WindingError",

    # grids and fields
    "TorusGrid",
    "TorusField",

    # GPE
    "WaveState",
    "InitialDataSpec",
    "build_initial_state",
    "conserved_quantities",
    "evolve",
    "strang_step",

    # hydrodynamics
    "HydroState",
    "observables",
    "dispersive_term",
    "conservation_residuals",
    "fastwave_forcing",

    # weighted Helmholtz
    "WeightedHelmholtz",
    "solve_weighted_poisson",
    "project",
    "leray_project",

    # fast waves
    "EigenSystem",
    "FastWaveVector",
    "ResonanceSet",
    "assemble_operator",
    "eigendecompose",
    "build_eigensystem",
    "expand",
    "reconstruct",
    "wave_group",
    "resonance_set",
    "q1",
    "q2",
    "time_average_oracle",
    "filter_state",

    # limit systems
    "AnelasticState",
    "OscillatingState",
    "anelastic_step",
    "oscillating_rhs",
    "oscillating_step",
    "coupled_evolve",

    # modulated energy
    "ModulatedEnergyReport",
    "modulated_energy",
    "convergence_functionals",

    # harness
    "ScenarioConfig",
    "load_scenario",
    "parse_scenario",
    "ConvergenceRow",
    "ConvergenceTable",
    "run_scenario",
    "get_eigensystem_cached",
    "get_spectrum_cached",
]
