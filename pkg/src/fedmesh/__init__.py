"""Multigraph topology design and simulation for cross-silo federated learning."""
from .multigraph import (GraphState, Multigraph, StateSchedule, construct_multigraph,
                         isolated_nodes, parse_states)
from .net_model import (LinkParams, NetworkError, NetworkSpec, SiloParams, connectivity_graph,
                        load_network, save_network)
from .overlay import OverlayGraph, build_mst, build_ring, build_star
from .sim import ExperimentConfig, compare_topologies, run_experiment, sweep_t
from .timing import DelayLedger, mean_cycle_time, static_delay, traffic_capacity

__version__ = "0.1.0"

__all__ = [
    "DelayLedger", "ExperimentConfig", "GraphState", "LinkParams", "Multigraph", "NetworkError",
    "NetworkSpec", "OverlayGraph", "SiloParams", "StateSchedule", "build_mst", "build_ring",
    "build_star", "compare_topologies", "connectivity_graph", "construct_multigraph",
    "isolated_nodes", "load_network", "mean_cycle_time", "parse_states", "run_experiment",
    "save_network", "static_delay", "sweep_t", "traffic_capacity",
]
