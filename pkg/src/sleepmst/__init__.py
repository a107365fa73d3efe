"""Sleeping-model CONGEST simulator and awake-efficient distributed MST."""

from .engine import (CongestionViolation, EngineConfig, EngineError, Message,
                     NonTermination, run)
from .graph import (EdgeSet, GraphError, WeightedGraph, diameter, gen_grc,
                    gen_path, gen_random_connected, gen_ring, mst_oracle,
                    read_graph, validate, write_graph)
from .ldt import LdtState, transmission_schedule
from .metrics import Metrics, export
from .mst_deterministic import run_deterministic_mst
from .mst_randomized import run_randomized_mst
from .mst_tradeoff import run_tradeoff_mst

__all__ = [
    "CongestionViolation", "EdgeSet", "EngineConfig", "EngineError",
    "GraphError", "LdtState", "Message", "Metrics", "NonTermination",
    "WeightedGraph", "diameter", "export", "gen_grc", "gen_path",
    "gen_random_connected", "gen_ring", "mst_oracle", "read_graph", "run",
    "run_deterministic_mst", "run_randomized_mst", "run_tradeoff_mst",
    "transmission_schedule", "validate", "write_graph",
]
