"""Stroboscopically monitored quantum walks with power-law hopping on a ring."""

from lrwalk.errors import (
    ConfigError,
    NoConvergenceError,
    NotReachedError,
    NumericalError,
)
from lrwalk.lattice import LatticeConfig, dispersion, hamiltonian_dense
from lrwalk.walk import ProtocolConfig, SurvivalTrace, run_monitored

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "LatticeConfig",
    "NoConvergenceError",
    "NotReachedError",
    "NumericalError",
    "ProtocolConfig",
    "SurvivalTrace",
    "dispersion",
    "hamiltonian_dense",
    "run_monitored",
]
