"""Brute-force statevector reference for small kicked-Ising circuits.

Qubit ``q`` is bit ``q`` of the basis-state index. The state starts in
``|0...0>`` and each Trotter step applies R_X(theta) on every qubit, then
R_ZZ on every edge (``U = R_ZZ R_X``); with ``extra_rx`` one more R_X layer
follows the last step.
"""

from __future__ import annotations

import numpy as np

from .gates import gate_unitary, rx_unitary
from .lattice import CircuitSpec, Lattice
from .pauli import PauliSum

__all__ = ["gate_unitary", "QubitCapError", "StateVector", "statevector_expectation"]

DEFAULT_QUBIT_CAP = 24
NORM_TOL = 1e-12


class QubitCapError(MemoryError):
    """The requested simulation exceeds the qubit cap."""


class StateVector:
    def __init__(self, num_qubits: int, qubit_cap: int = DEFAULT_QUBIT_CAP, check_norm: bool = True) -> None:
        if num_qubits > qubit_cap:
            raise QubitCapError(f"{num_qubits} qubits exceeds the cap of {qubit_cap}")
        self.num_qubits = num_qubits
        self.amplitudes = np.zeros(2**num_qubits, dtype=complex)
        self.amplitudes[0] = 1.0
        self.check_norm = check_norm

    def _checked(self) -> None:
        if self.check_norm:
            norm = np.vdot(self.amplitudes, self.amplitudes).real
            if abs(norm - 1.0) > NORM_TOL:
                raise AssertionError(f"state norm drifted to {norm!r}")

    def apply_1q(self, u: np.ndarray, qubit: int) -> None:
        n = self.num_qubits
        # Reshaped C-order axes run from the highest bit down to bit 0.
        psi = self.amplitudes.reshape([2] * n)
        axis = n - 1 - qubit
        psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [axis])), 0, axis)
        self.amplitudes = np.ascontiguousarray(psi).reshape(-1)
        self._checked()

    def apply_diagonal(self, diag: np.ndarray) -> None:
        self.amplitudes = self.amplitudes * diag
        self._checked()

    def apply_rx_layer(self, theta: float) -> None:
        u = rx_unitary(theta)
        for q in range(self.num_qubits):
            self.apply_1q(u, q)

    def apply_rzz_layer(self, edges) -> None:
        """R_ZZ on every edge at once: a diagonal phase ``exp(i pi/4 sum z_a z_b)``."""
        idx = np.arange(2**self.num_qubits, dtype=np.int64)
        total = np.zeros(idx.shape, dtype=np.int64)
        for a, b in edges:
            parity = ((idx >> a) ^ (idx >> b)) & 1
            total += 1 - 2 * parity
        self.apply_diagonal(np.exp(1j * np.pi / 4 * total))

    def pauli_expectation(self, x: int, z: int) -> complex:
        """``<psi| P |psi>`` for the Pauli string with X-mask ``x`` and Z-mask ``z``."""
        idx = np.arange(2**self.num_qubits, dtype=np.int64)
        ny = bin(x & z).count("1")
        parity = (np.bitwise_count(idx & z) & 1).astype(np.int64)
        sign = 1 - 2 * parity
        p_psi_at_flipped = (1j**ny) * sign * self.amplitudes
        return np.vdot(self.amplitudes[idx ^ x], p_psi_at_flipped)

    def expectation(self, obs: PauliSum) -> float:
        total = 0j
        for (x, z), (coeff, _) in obs.terms.items():
            total += coeff * self.pauli_expectation(x, z)
        if abs(total.imag) > 1e-10:
            raise AssertionError(f"expectation has imaginary part {total.imag!r}")
        return float(total.real)


def evolve_state(lattice: Lattice, circuit: CircuitSpec, qubit_cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    state = StateVector(lattice.num_sites, qubit_cap)
    for _ in range(circuit.steps):
        state.apply_rx_layer(circuit.theta_h)
        state.apply_rzz_layer(lattice.edges)
    if circuit.extra_rx:
        state.apply_rx_layer(circuit.theta_h)
    return state


def statevector_expectation(
    lattice: Lattice, circuit: CircuitSpec, obs: PauliSum, qubit_cap: int = DEFAULT_QUBIT_CAP
) -> float:
    """``<0| U^dag O U |0>`` by explicit state evolution."""
    if obs.max_site() >= lattice.num_sites:
        raise ValueError("observable support exceeds lattice")
    return evolve_state(lattice, circuit, qubit_cap).expectation(obs)
