"""Random walk on the symmetric exclusion process: simulation, multiscale block
diagnostics, block percolation and independent-walker comparisons."""
from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    ArrowField,
    Configuration,
    Trajectory,
    Window,
    evolve,
    hole_complement,
    make_trajectory,
    sample_arrows,
    sample_config,
    swap,
    trace_path,
)
from .errors import (
    DomainError,
    InvalidArgumentError,
    OutOfWindowError,
    ResourceLimitError,
    ScheduleInfeasibleError,
)
from .walker import RateSet, WalkPath, jump_counts, sandwich_walks, simulate_walk, speed_functionals, verify_representation

__all__ = [
    "ArrowField", "Configuration", "Trajectory", "Window", "evolve", "hole_complement", "make_trajectory",
    "sample_arrows", "sample_config", "swap", "trace_path",
    "DomainError", "InvalidArgumentError", "OutOfWindowError", "ResourceLimitError", "ScheduleInfeasibleError",
    "RateSet", "WalkPath", "jump_counts", "sandwich_walks", "simulate_walk", "speed_functionals",
    "verify_representation",
]
