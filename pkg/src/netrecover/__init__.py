"""Recover steady states of network dynamics from a sampled subgraph via a mean-field boundary."""

__version__ = "0.1.0"

from .dynamics import (
    DEFAULT_OPTIONS, ECOLOGICAL, EPIDEMIC, GENE, DynamicsModel, IntegratorOptions, SteadyStateResult,
    available_models, find_attractors, get_model, integrate_to_steady_state, register_model,
)
from .estimators import DegreeEstimate, ResilienceEstimate, estimate_beta, estimate_degrees
from .graph import (
    Graph, TopoStats, degree_vector, generate, heterogeneity, load_edge_list, resilience, rewire,
    save_edge_list, topo_stats,
)
from .meanfield import (
    MeanFieldContext, RecoveryResult, averaging_operator, iterate_mean_field, solve_augmented_subgraph,
    solve_boundary_clamped, solve_full, solve_naive, solve_uncoupled, solve_x_eff,
)
from .sampling import SampledSubgraph, draw, sample_degree_biased, sample_rw, sample_vs

__all__ = [
    "DEFAULT_OPTIONS", "ECOLOGICAL", "EPIDEMIC", "GENE", "DegreeEstimate", "DynamicsModel", "Graph",
    "IntegratorOptions", "MeanFieldContext", "RecoveryResult", "ResilienceEstimate", "SampledSubgraph",
    "SteadyStateResult", "TopoStats", "available_models", "averaging_operator", "degree_vector", "draw",
    "estimate_beta", "estimate_degrees", "find_attractors", "generate", "get_model", "heterogeneity",
    "integrate_to_steady_state", "iterate_mean_field", "load_edge_list", "register_model", "resilience",
    "rewire", "sample_degree_biased", "sample_rw", "sample_vs", "save_edge_list", "solve_augmented_subgraph",
    "solve_boundary_clamped", "solve_full", "solve_naive", "solve_uncoupled", "solve_x_eff", "topo_stats",
]
