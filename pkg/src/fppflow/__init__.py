"""Maximal flows through cylinders in first-passage percolation on Z^d."""
__version__ = "0.1.0"

from .capacity import (Bernoulli, CapacityField, Constant, Exponential, PointMassMixture, SeedSpec,
                       Uniform, choose_eta, parse_distribution, sample_capacities, truncate)
from .flow import (FlowResult, Stream, brute_force_min_cut, count_disjoint_open_paths, max_flow,
                   min_cut, validate_stream)
from .lattice import CylinderSpec, LatticeGraph, build_cylinder, diamond_adjacent, diamond_connected, \
    is_cut, is_separating, plaquette_of

__all__ = [
    "Bernoulli", "CapacityField", "Constant", "Exponential", "PointMassMixture", "SeedSpec", "Uniform",
    "choose_eta", "parse_distribution", "sample_capacities", "truncate",
    "FlowResult", "Stream", "brute_force_min_cut", "count_disjoint_open_paths", "max_flow", "min_cut",
    "validate_stream",
    "CylinderSpec", "LatticeGraph", "build_cylinder", "diamond_adjacent", "diamond_connected", "is_cut",
    "is_separating", "plaquette_of",
]
