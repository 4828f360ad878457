from __future__ import annotations

import functools
import itertools

import numpy as np
import pytest
import scipy.linalg

from heavyhex_pepo import CircuitSpec, build_ibm127, build_patch, extract_lightcone
from heavyhex_pepo.lattice import Lattice
from heavyhex_pepo.oracle import QubitCapError, StateVector, gate_unitary, statevector_expectation
from heavyhex_pepo.pauli import PauliSum, key_from_ops, observable_library, relabel

from helpers import random_state, z62_t3, z62_t4

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
LETTERS = {"I": np.eye(2), "X": X, "Y": Y, "Z": Z}


def _dense(letters: str) -> np.ndarray:
    """Dense operator with ``letters[q]`` on qubit q (qubit 0 is the lowest bit)."""
    return functools.reduce(np.kron, [LETTERS[c] for c in reversed(letters)])


@pytest.fixture(scope="module")
def ibm127():
    return build_ibm127()


def test_rx_zero_identity():
    np.testing.assert_allclose(gate_unitary("RX", 0.0), np.eye(2))


def test_t0_expectation():
    lat = build_patch(1, 1)
    assert statevector_expectation(lat, CircuitSpec(0.7, 0), PauliSum.single({4: "Z"})) == 1.0


def test_pauli_expectation_dense():
    rng = np.random.default_rng(7)
    n = 4
    sv = StateVector(n)
    sv.amplitudes = random_state(n, rng)
    for letters in itertools.product("IXYZ", repeat=n):
        ops = {q: c for q, c in enumerate(letters) if c != "I"}
        x, z = key_from_ops(ops)
        want = np.vdot(sv.amplitudes, _dense("".join(letters)) @ sv.amplitudes)
        assert sv.pauli_expectation(x, z) == pytest.approx(want, abs=1e-12)


def test_gates_dense():
    rng = np.random.default_rng(8)
    n = 3
    psi = random_state(n, rng)
    sv = StateVector(n)
    sv.amplitudes = psi.copy()
    sv.apply_1q(gate_unitary("RX", 0.4), 1)
    u = np.kron(np.eye(2), np.kron(scipy.linalg.expm(-0.2j * X), np.eye(2)))
    np.testing.assert_allclose(sv.amplitudes, u @ psi, atol=1e-13)

    sv.amplitudes = psi.copy()
    sv.apply_rzz_layer([(0, 2), (1, 2)])
    h = _dense("ZIZ") + _dense("IZZ")
    np.testing.assert_allclose(sv.amplitudes, scipy.linalg.expm(0.25j * np.pi * h) @ psi, atol=1e-13)


def test_norm_guard():
    sv = StateVector(2)
    with pytest.raises(AssertionError):
        sv.apply_1q(np.array([[2.0, 0.0], [0.0, 1.0]]), 0)


def test_qubit_cap():
    with pytest.raises(QubitCapError):
        StateVector(30)
    with pytest.raises(QubitCapError):
        statevector_expectation(build_patch(2, 2), CircuitSpec(0.1, 1), PauliSum.single({0: "Z"}), qubit_cap=20)


def test_support_outside_lattice():
    with pytest.raises(ValueError):
        statevector_expectation(Lattice(2, ((0, 1),)), CircuitSpec(0.1, 1), PauliSum.single({5: "Z"}))


def test_circuit_order_on_two_qubits():
    # U = R_ZZ R_X: compare a full dense evolution
    theta = 0.9
    lat = Lattice(2, ((0, 1),))
    rx = np.kron(gate_unitary("RX", theta), gate_unitary("RX", theta))
    u_step = gate_unitary("RZZ") @ rx
    psi = np.linalg.matrix_power(u_step, 2) @ rx @ np.array([1, 0, 0, 0], dtype=complex)
    want = np.vdot(psi, _dense("XY") @ psi).real
    got = statevector_expectation(lat, CircuitSpec(theta, 2, extra_rx=True), PauliSum.single({0: "X", 1: "Y"}))
    assert got == pytest.approx(want, abs=1e-13)


@pytest.mark.parametrize("theta", np.linspace(0.0, np.pi / 2, 7))
def test_closed_forms_on_light_cones(ibm127, theta):
    for steps, formula in ((3, z62_t3), (4, z62_t4)):
        sub, mapping = extract_lightcone(ibm127, [62], steps)
        obs = relabel(observable_library("Z62"), mapping)
        assert statevector_expectation(sub, CircuitSpec(theta, steps), obs) == pytest.approx(formula(theta), abs=1e-12)
