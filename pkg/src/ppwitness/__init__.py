"""Pump-probe witnessing of excitonic quantum coherence in a vibronic dimer."""

from .core import DimerParams, UnitSystem, apc_preset, coupling_ratio
from .model import HilbertSpace, VibronicHamiltonian, assemble, build_space, exciton_structure
from .process import ReducedChi, WitnessPoint, theoretical_chi, witness_wb

__version__ = "0.1.0"

__all__ = [
    "DimerParams",
    "UnitSystem",
    "apc_preset",
    "coupling_ratio",
    "HilbertSpace",
    "VibronicHamiltonian",
    "assemble",
    "build_space",
    "exciton_structure",
    "ReducedChi",
    "WitnessPoint",
    "theoretical_chi",
    "witness_wb",
]
