"""Change-point detection for piecewise GINAR count series.

Modules
-------
sim       simulation of thinning-based integer autoregressions and scenarios
estimate  Poisson quasi-maximum likelihood fits with sandwich covariances
mdl       minimum description length of a segmentation
search    island genetic algorithm with annealing moves
evaluate  replication harness and change-point accuracy metrics
cli       ``ginarcp`` command-line entry point
"""

__version__ = "0.1.0"

from ._accel import backend_name
from .estimate import SegmentFit, SegmentWindow, Theta, fit_pqml, quasi_loglik, sandwich_covariance
from .mdl import FitCache, MdlScore, Segmentation, exhaustive_minimize, mdl_score, min_span
from .search import GaConfig, SearchResult, decode, encode, run_auto_pginarm_sa
from .sim import McpGinarSpec, SegmentSpec, get_scenario, simulate_mcp

__all__ = [
    "FitCache", "GaConfig", "McpGinarSpec", "MdlScore", "SearchResult", "SegmentFit",
    "SegmentSpec", "SegmentWindow", "Segmentation", "Theta", "backend_name", "decode",
    "encode", "exhaustive_minimize", "fit_pqml", "get_scenario", "mdl_score", "min_span",
    "quasi_loglik", "run_auto_pginarm_sa", "sandwich_covariance", "simulate_mcp",
]
