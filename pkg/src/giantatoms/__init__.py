"""Simulating open two-level systems with giant atoms coupled to a waveguide."""
from .core import DensityMatrix, product_state, population, propagate
from .layout import GiantAtomLayout, preset_braided_pair, preset_chain_all_to_all, preset_chain_nearest_neighbor
from .models import SpinChainModel, TwoQubitModel

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "GiantAtomLayout",
    "SpinChainModel",
    "TwoQubitModel",
    "population",
    "preset_braided_pair",
    "preset_chain_all_to_all",
    "preset_chain_nearest_neighbor",
    "product_state",
    "propagate",
]
