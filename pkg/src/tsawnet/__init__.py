"""Multi-agent true self-avoiding walks with influence-field jumps on complex networks."""

__version__ = "0.1.0"

from .graph import Graph, GraphError, bfs_distances, build_graph, largest_component, load_edge_list, load_graph, save_edge_list
from .generators import GeneratorError, GeneratorSpec, generate
from .dynamics import DistanceShells, DynamicsError, DynamicsParams, ExplorationRecord, simulate
from .metrics import MetricsError, accessibility, chebyshev_center_distance, epsilon_total, make_regions, region_exploration
from .experiments import ConfigError, RegionSpec, SweepConfig, SweepError, SweepResult, export_results, load_config, run_sweep

__all__ = [
    "Graph", "GraphError", "bfs_distances", "build_graph", "largest_component", "load_edge_list",
    "load_graph", "save_edge_list", "GeneratorError", "GeneratorSpec", "generate", "DistanceShells",
    "DynamicsError", "DynamicsParams", "ExplorationRecord", "simulate", "MetricsError", "accessibility",
    "chebyshev_center_distance", "epsilon_total", "make_regions", "region_exploration", "ConfigError",
    "RegionSpec", "SweepConfig", "SweepError", "SweepResult", "export_results", "load_config", "run_sweep",
]
