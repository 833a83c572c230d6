"""Resistive-memory Markov chain Monte Carlo simulator."""

__version__ = "0.1.0"

from .crossbar import CrossbarArray
from .device import DeviceCell, DeviceLaw, ProgrammingLut
from .mcmc import McmcConfig, RunRecord, StuckChainError, infer, train

__all__ = [
    "CrossbarArray",
    "DeviceCell",
    "DeviceLaw",
    "McmcConfig",
    "ProgrammingLut",
    "RunRecord",
    "StuckChainError",
    "__version__",
    "infer",
    "train",
]
