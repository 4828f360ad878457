"""Classical simulation of kicked-Ising circuits on heavy-hexagon lattices.

Three engines compute ``<0| U^dag O U |0>``:

* :mod:`.pepo` - Heisenberg-picture PEPO evolution with simple-update truncation,
* :mod:`.pauli` - exact (or truncated) Pauli-string back-propagation,
* :mod:`.oracle` - brute-force statevector simulation of small lattices.
"""

from .lattice import CircuitSpec, Lattice, build_ibm127, build_patch, edge_layers, extract_lightcone
from .pauli import (
    CoeffThreshold,
    MaxOrder,
    MaxTerms,
    NoTruncation,
    PauliSum,
    PauliTerm,
    back_propagate,
    layerwise_conjugate,
    observable_library,
    zero_state_expectation,
)
from .pepo import Pepo, close_and_contract, evolve, init_pepo
from .oracle import statevector_expectation
from .analysis import FitResult, error_report, fit_chi_extrapolation

__version__ = "0.1.0"

__all__ = [
    "CircuitSpec",
    "CoeffThreshold",
    "FitResult",
    "Lattice",
    "MaxOrder",
    "MaxTerms",
    "NoTruncation",
    "PauliSum",
    "PauliTerm",
    "Pepo",
    "back_propagate",
    "build_ibm127",
    "build_patch",
    "close_and_contract",
    "edge_layers",
    "error_report",
    "evolve",
    "extract_lightcone",
    "fit_chi_extrapolation",
    "init_pepo",
    "layerwise_conjugate",
    "observable_library",
    "statevector_expectation",
    "zero_state_expectation",
]
