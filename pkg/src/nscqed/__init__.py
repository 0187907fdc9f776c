"""Dissipative nonstationary circuit QED: one qubit, one cavity mode, fast parameter modulation."""

from .hilbert import HilbertSpace, build_space, bare_operators, coherent_state, expectation
from .model import ModulationSchedule, ModulationTone, SystemParams, derived_frequencies
from .dressed import build_dressed_basis, transition_tables
from .effective import RegimeSpec

__all__ = [
    "HilbertSpace", "build_space", "bare_operators", "coherent_state", "expectation",
    "ModulationSchedule", "ModulationTone", "SystemParams", "derived_frequencies",
    "build_dressed_basis", "transition_tables", "RegimeSpec",
]
