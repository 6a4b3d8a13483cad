"""Sampled-data cooperative output regulation toolkit.

Design distributed compensator gains for continuous-time linear
multi-agent systems under periodic sampling, certify the closed loop's
Schur conditions, and simulate the hybrid flow/jump dynamics exactly.
"""

from .backend import ACTIVE_BACKEND
from .graph import (GraphDecomposition, LeaderGraph, RootConditionError,
                    decompose, exact_mu_bound, paper_mu_bound, root_reachable)
from .hybrid_sim import (DivergenceError, HybridTrace, NetworkState,
                         error_metrics, flow, jump, simulate)
from .linalg import (DimensionError, NumericalError, SingularEquationError,
                     Spectrum, eigenvalues, exp_convolution, format_matrix,
                     kron, mat_exp, parse_matrix, sigma_max,
                     solve_discrete_sylvester, solve_sylvester,
                     spectral_radius)
from .regulator import (AssumptionReport, Certificate, CompensatorDesign,
                        DesignError, Exosystem, HoldBlocks, HoldSpec, Plant,
                        PreconditionError, RegulationInfeasibleError,
                        SynthesisError, assemble_zoh, certify_general_hold,
                        certify_zoh, check_assumptions,
                        closed_loop_jump_matrix, design_zoh, discretize,
                        hold_blocks, solve_regulator_pair, synthesize_k1)
from .scenarios import (ConfigError, DispatchState, MicrogridParams,
                        MicrogridTrace, Scenario, builtin_scenario,
                        example_4_1, ic_consensus_step, initial_dispatch,
                        microgrid_flow, parse_scenario_config,
                        random_initial_conditions, run_microgrid)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "AssumptionReport",
    "Certificate",
    "CompensatorDesign",
    "ConfigError",
    "DesignError",
    "DimensionError",
    "DispatchState",
    "DivergenceError",
    "Exosystem",
    "GraphDecomposition",
    "HoldBlocks",
    "HoldSpec",
    "HybridTrace",
    "LeaderGraph",
    "MicrogridParams",
    "MicrogridTrace",
    "NetworkState",
    "NumericalError",
    "Plant",
    "PreconditionError",
    "RegulationInfeasibleError",
    "RootConditionError",
    "Scenario",
    "SingularEquationError",
    "Spectrum",
    "SynthesisError",
    "assemble_zoh",
    "builtin_scenario",
    "certify_general_hold",
    "certify_zoh",
    "check_assumptions",
    "closed_loop_jump_matrix",
    "decompose",
    "design_zoh",
    "discretize",
    "eigenvalues",
    "error_metrics",
    "exact_mu_bound",
    "example_4_1",
    "exp_convolution",
    "flow",
    "format_matrix",
    "hold_blocks",
    "ic_consensus_step",
    "initial_dispatch",
    "jump",
    "kron",
    "mat_exp",
    "microgrid_flow",
    "paper_mu_bound",
    "parse_matrix",
    "parse_scenario_config",
    "random_initial_conditions",
    "root_reachable",
    "run_microgrid",
    "sigma_max",
    "simulate",
    "solve_discrete_sylvester",
    "solve_regulator_pair",
    "solve_sylvester",
    "spectral_radius",
    "synthesize_k1",
]
