"""Competitive influence maximisation on signed networks under voter dynamics."""

__version__ = "0.1.0"

from .graph import SignedGraph, from_edge_list, read_edge_csv, write_edge_csv  # noqa: E402
from .dynamics import steady_state, simulate_voter  # noqa: E402
from .optimize import OptimizerOptions, gradient_ascent, relative_gain  # noqa: E402

__all__ = [
    "SignedGraph", "from_edge_list", "read_edge_csv", "write_edge_csv",
    "steady_state", "simulate_voter", "OptimizerOptions", "gradient_ascent", "relative_gain",
]
