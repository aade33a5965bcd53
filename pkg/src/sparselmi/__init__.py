"""Sparse static feedback synthesis for stochastic linear systems with
multiplicative noise, with independent mean-square stability and cost
verification."""

from .conic import (ConeBlock, ConicProgram, ConicSolution, SolverSettings,
                    check_solution, solve)
from .design import (DesignError, DesignOptions, DesignResult,
                     design_output_feedback, design_state_feedback,
                     reconstruct_gain, sweep_gamma, threshold_pattern)
from .lmi import (LmiHandle, RegularizerSpec, add_regularizer,
                  add_zero_column_constraints, build_lqrm_sdp_ct,
                  build_lqrm_sdp_dt, build_stability_lmi_ct,
                  build_stability_lmi_dt)
from .model import (ClosedLoop, ModelError, NoiseChannel, StochasticSystem,
                    close_loop, load_system, save_system, validate)
from .msstab import (MsReport, OracleError, lqrm_cost, lqrm_policy_iteration,
                     ms_generator, ms_stable)
from .powergrid import (Bus, GridNetwork, Line, build_swing_system,
                        bundled_network, laplacian, parse_network,
                        write_network)
from .sdpa import export_sdpa, read_sdpa
from .sim import CostEstimate, EnsembleStats, empirical_cost, simulate

__version__ = "0.1.0"

__all__ = [
    "Bus", "ClosedLoop", "ConeBlock", "ConicProgram", "ConicSolution",
    "CostEstimate", "DesignError", "DesignOptions", "DesignResult",
    "EnsembleStats", "GridNetwork", "Line", "LmiHandle", "ModelError",
    "MsReport", "NoiseChannel", "OracleError", "RegularizerSpec",
    "SolverSettings", "StochasticSystem", "add_regularizer",
    "add_zero_column_constraints", "build_lqrm_sdp_ct", "build_lqrm_sdp_dt",
    "build_stability_lmi_ct", "build_stability_lmi_dt", "build_swing_system",
    "bundled_network", "check_solution", "close_loop", "design_output_feedback",
    "design_state_feedback", "empirical_cost", "export_sdpa", "laplacian",
    "load_system", "lqrm_cost", "lqrm_policy_iteration", "ms_generator",
    "ms_stable", "parse_network", "read_sdpa", "reconstruct_gain",
    "save_system", "simulate", "solve", "sweep_gamma", "threshold_pattern",
    "validate", "write_network",
]
