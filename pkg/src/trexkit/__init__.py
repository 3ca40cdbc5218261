"""Exact global minimisation of the TREX regression objective, its q-TREX
heuristic, and knockoff-based variable selection built on both."""

__version__ = "0.1.0"

from .conic import ConeSpec, ConicProblem, ConicSolution, SolverSettings, Status, solve
from .knockoff import (KnockoffAugmentation, KnockoffStats, SelectionResult, bhq_select,
                       construct_knockoffs, knockoff_threshold, stat_lasso_signed_max,
                       stat_trex_fvalue, stat_trex_phi_path, swap_rotation)
from .lasso import LassoPath, lasso_path
from .qtrex import QtrexParams, QtrexResult, qtrex_multistart, qtrex_solve
from .simlab import (SimConfig, SimReport, estimation_error, gen_linear_data, run_fdr_experiment,
                     run_heuristic_study)
from .trex import (RegressionProblem, TrexParams, TrexSolution, ctrex, ctrex_path, topology_report,
                   trex_objective)

__all__ = [
    "ConeSpec", "ConicProblem", "ConicSolution", "SolverSettings", "Status", "solve",
    "KnockoffAugmentation", "KnockoffStats", "SelectionResult", "bhq_select", "construct_knockoffs",
    "knockoff_threshold", "stat_lasso_signed_max", "stat_trex_fvalue", "stat_trex_phi_path",
    "swap_rotation", "LassoPath", "lasso_path", "QtrexParams", "QtrexResult", "qtrex_multistart",
    "qtrex_solve", "SimConfig", "SimReport", "estimation_error", "gen_linear_data",
    "run_fdr_experiment", "run_heuristic_study", "RegressionProblem", "TrexParams", "TrexSolution",
    "ctrex", "ctrex_path", "topology_report", "trex_objective",
]
