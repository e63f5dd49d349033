"""Mean waiting times in cyclic gated polling networks with customer routing."""

from .asymptotics import (
    cycle_time_law,
    ht_coefficients,
    interpolate_wait,
    lt_limits,
    queue_length_law,
)
from .model import DistributionSpec, NetworkModel, scale_to_load, solve_traffic, validate
from .modelfile import load_model
from .simulator import SimConfig, run

__version__ = "0.1.0"
