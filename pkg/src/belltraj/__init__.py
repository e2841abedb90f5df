"""Bell-type nonclassicality tests for the distance between two
harmonic-oscillator trajectories, plus the classical models they rule out."""

from .bell import (
    BellEngine,
    BellSweep,
    EigenSearchResult,
    SeparableCheckReport,
    TwoModeState,
    bell_operator,
    find_violating_state,
    integrated_bell_parameter,
    separable_positivity_check,
    sweep,
)
from .dynamics import (
    EvolutionCache,
    HarmonicStrategy,
    evolution_cache,
    evolution_operator,
    fourier_operator,
    hamiltonian_matrix,
    heisenberg_observable,
)
from .errors import AccuracyError, ConvergenceError, CrossValidationError
from .fockops import (
    BasisSpec,
    DistanceKernel,
    FockOperator,
    abs_position_operator,
    distance_kernel,
    hermite_functions,
    momentum_operator,
    number_operator,
    position_operator,
    two_mode_abs_difference,
)
from .hv import (
    BirkhoffDecomposition,
    ClassicalBellResult,
    HVCheckReport,
    LatticeModel,
    SubadditiveFunctional,
    TrajectoryEnsemble,
    TrajectoryFunctional,
    birkhoff_decompose,
    classical_bell_S,
    classical_bell_S_generalized,
    corrupt_decomposition,
    doubly_stochastic_from_unitary,
    hv_distribution_check,
    sample_hv_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BasisSpec",
    "BellEngine",
    "BellSweep",
    "BirkhoffDecomposition",
    "ClassicalBellResult",
    "ConvergenceError",
    "CrossValidationError",
    "DistanceKernel",
    "EigenSearchResult",
    "EvolutionCache",
    "FockOperator",
    "HVCheckReport",
    "HarmonicStrategy",
    "LatticeModel",
    "SeparableCheckReport",
    "SubadditiveFunctional",
    "TrajectoryEnsemble",
    "TrajectoryFunctional",
    "TwoModeState",
    "abs_position_operator",
    "bell_operator",
    "birkhoff_decompose",
    "classical_bell_S",
    "classical_bell_S_generalized",
    "corrupt_decomposition",
    "distance_kernel",
    "doubly_stochastic_from_unitary",
    "evolution_cache",
    "evolution_operator",
    "find_violating_state",
    "fourier_operator",
    "hamiltonian_matrix",
    "heisenberg_observable",
    "hermite_functions",
    "hv_distribution_check",
    "integrated_bell_parameter",
    "momentum_operator",
    "number_operator",
    "position_operator",
    "sample_hv_trajectory",
    "separable_positivity_check",
    "sweep",
    "two_mode_abs_difference",
]
