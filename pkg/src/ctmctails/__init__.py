"""Tail asymptotics of stationary and quasi-stationary laws of jump CTMCs on the integers."""

from .analysis import (
    fit_tail,
    sharp_bdp_prediction,
    sharp_drift_prediction,
    theta_from_dist,
    verify_identity_qsd,
    verify_identity_stationary,
    verify_tail_identity,
)
from .asymptotics import AsymptoticParams, JumpStructure, compute_params, jump_structure, lemma_consistency
from .classifier import classify_qsd, classify_stationary, ergodicity_check, support_obstruction
from .model import DecayBound, DistVector, JumpModel, Regime, TailClassification, normalize
from .parser import format_model, parse_file, parse_model, parse_reactions
from .rates import aplh_extract, evaluate
from .simulate import Trajectory, empirical_qsd, empirical_stationary, simulate_ssa
from .solver import (
    SolverConfig,
    bdp_stationary,
    qsd_from_theta,
    reference_dist,
    solve_qsd,
    solve_stationary,
    solve_stationary_recursive,
    solve_stationary_truncated,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticParams", "DecayBound", "DistVector", "JumpModel", "JumpStructure", "Regime", "SolverConfig",
    "TailClassification", "Trajectory", "aplh_extract", "bdp_stationary", "classify_qsd", "classify_stationary",
    "compute_params", "empirical_qsd", "empirical_stationary", "ergodicity_check", "evaluate", "fit_tail",
    "format_model", "jump_structure", "lemma_consistency", "normalize", "parse_file", "parse_model",
    "parse_reactions", "qsd_from_theta", "reference_dist", "sharp_bdp_prediction", "sharp_drift_prediction",
    "simulate_ssa", "solve_qsd", "solve_stationary", "solve_stationary_recursive", "solve_stationary_truncated",
    "support_obstruction", "theta_from_dist", "verify_identity_qsd", "verify_identity_stationary",
    "verify_tail_identity",
]
