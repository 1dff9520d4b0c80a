"""
fracpr - fractional-order Pinsky-Rinzel neuron toolkit

Caputo predictor-corrector integration of the two-compartment CA3 pyramidal
cell, with spike and bifurcation analysis and equilibrium stability.
"""

from .analysis import (
    bifurcation_scan,
    burst_grouping,
    detect_peaks,
    estimate_transient,
    firing_mode,
    periodicity_test,
)
from .fde_solver import (
    FractionalOrder,
    SolverConfig,
    Trajectory,
    mittag_leffler,
    solve_caputo_abm,
    solve_classical_reference,
)
from .pinsky_rinzel import (
    NeuronParams,
    NeuronState,
    RateFunctionSet,
    canonical_initial_state,
    canonical_params,
    rhs,
    simulate,
    table_params,
)
from .stability import (
    Verdict,
    analyze_equilibrium,
    compare_seed_modes,
    eigenvalues,
    find_equilibrium,
    matignon_test,
    numerical_jacobian,
    scan_stable_intervals,
)

__version__ = "0.1.0"
__author__ = "fracpr developers"

__all__ = [
    "FractionalOrder",
    "NeuronParams",
    "NeuronState",
    "RateFunctionSet",
    "SolverConfig",
    "Trajectory",
    "Verdict",
    "analyze_equilibrium",
    "bifurcation_scan",
    "burst_grouping",
    "canonical_initial_state",
    "canonical_params",
    "compare_seed_modes",
    "detect_peaks",
    "eigenvalues",
    "estimate_transient",
    "find_equilibrium",
    "firing_mode",
    "matignon_test",
    "mittag_leffler",
    "numerical_jacobian",
    "periodicity_test",
    "rhs",
    "scan_stable_intervals",
    "simulate",
    "solve_caputo_abm",
    "solve_classical_reference",
    "table_params",
]
