"""Lazy perfect sampling of two-dimensional lattice spin systems.

The sampler draws finite windows of an infinite-volume Gibbs measure on Z^2
by resolving mesh spins recursively from uniform draws and lower bounds on
local conditional marginals, then filling mesh cells exactly.
"""

from .errors import BudgetExhausted, CapExceeded, InfeasibleError
from .geometry import (
    Box,
    Frame,
    bisected_boundary,
    cell_of,
    frame_of,
    graph_boundary,
    on_mesh,
)
from .inference import (
    InferenceProblem,
    log_partition_brute,
    log_partition_transfer,
    marginal_brute,
    marginal_transfer,
    sample_exact,
)
from .lazy import (
    STRATEGIES,
    LazySampler,
    PVector,
    RecursionTrace,
    lower_bounds,
    sample_window,
)
from .models import (
    bracket_bounds,
    branching_stats,
    chi_square_gof,
    ising,
    potts,
    potts_critical_beta,
    tv_distance,
    wsm_probe,
)
from .rng import stream
from .spins import SpinSystem, log_weight, new_spin_system

__all__ = [
    "BudgetExhausted", "CapExceeded", "InfeasibleError",
    "Box", "Frame", "bisected_boundary", "cell_of", "frame_of", "graph_boundary", "on_mesh",
    "InferenceProblem", "log_partition_brute", "log_partition_transfer",
    "marginal_brute", "marginal_transfer", "sample_exact",
    "STRATEGIES", "LazySampler", "PVector", "RecursionTrace", "lower_bounds", "sample_window",
    "bracket_bounds", "branching_stats", "chi_square_gof", "ising", "potts",
    "potts_critical_beta", "tv_distance", "wsm_probe",
    "stream", "SpinSystem", "log_weight", "new_spin_system",
]
