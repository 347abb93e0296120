"""Load-curve cleansing and imputation with centralized and distributed PCP."""

__version__ = "0.1.0"

from .central import PcpConfig, PcpSolution, solve as solve_pcp
from .datagen import MeterGraph, ObservationSet, SynthConfig, random_geometric_graph, synthesize
from .errors import (
    DivergedError,
    DpcpError,
    GraphGenerationError,
    NumericalError,
    ParseError,
    ProtocolError,
    ValidationError,
)
from .network import DpcpConfig, run as run_dpcp

__all__ = [
    "DivergedError",
    "DpcpConfig",
    "DpcpError",
    "GraphGenerationError",
    "MeterGraph",
    "NumericalError",
    "ObservationSet",
    "ParseError",
    "PcpConfig",
    "PcpSolution",
    "ProtocolError",
    "SynthConfig",
    "ValidationError",
    "random_geometric_graph",
    "run_dpcp",
    "solve_pcp",
    "synthesize",
]
