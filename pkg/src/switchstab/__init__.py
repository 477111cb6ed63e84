"""Stabilising constrained switched linear systems by pruning automaton edges.

A constrained switched system pairs a set of mode matrices with an
automaton whose accepted words are the admissible switching sequences.
This package removes automaton edges until the remaining switching
language is provably stable, while keeping as much of the language
(measured by entropy) as possible.
"""

from .automaton import (
    Automaton,
    Cycle,
    EnumerationBudgetExceeded,
    accepts,
    cycles_k,
    edge_shift,
    entropy,
    is_irreducible,
    is_right_resolving,
    lift,
    perron_root,
    remove_edge,
    validate_and_trim,
    words_k,
)
from .css import (
    Certificate,
    Css,
    certify_admissible,
    cycle_growth,
    induced_product,
    rho_hat_k,
    rho_lower_k,
)
from .linalg import gelfand_estimate, mat_exp, operator_norm, spectral_radius
from .models import (
    CosimConfig,
    CoupledLinearPair,
    SolverMethod,
    cosim_step_matrix,
    error_system,
    pendulum_instance,
    solver_matrix,
    stability_domain_grid,
)
from .oracle import OracleConfig, Outcome, Verdict, oracle
from .stabilizer import OracleUnknown, optimal_stabilize, stabilize, stabilize_impl

__version__ = "0.1.0"

__all__ = [
    "Automaton", "Cycle", "EnumerationBudgetExceeded", "accepts", "cycles_k",
    "edge_shift", "entropy", "is_irreducible", "is_right_resolving", "lift",
    "perron_root", "remove_edge", "validate_and_trim", "words_k",
    "Certificate", "Css", "certify_admissible", "cycle_growth", "induced_product",
    "rho_hat_k", "rho_lower_k",
    "gelfand_estimate", "mat_exp", "operator_norm", "spectral_radius",
    "CosimConfig", "CoupledLinearPair", "SolverMethod", "cosim_step_matrix",
    "error_system", "pendulum_instance", "solver_matrix", "stability_domain_grid",
    "OracleConfig", "Outcome", "Verdict", "oracle",
    "OracleUnknown", "optimal_stabilize", "stabilize", "stabilize_impl",
]
