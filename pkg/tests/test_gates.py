from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from heavyhex_pepo.gates import (
    PAULI_MATRICES,
    conjugation_superoperator,
    gate_unitary,
    rx_rule_table,
    rx_superoperator,
    rzz_rule_table,
    rzz_superoperator,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])
BASIS = [I2, X, Y, Z]


def _expm_rx(theta):
    return scipy.linalg.expm(-0.5j * theta * X)


def _expm_rzz():
    return scipy.linalg.expm(0.25j * np.pi * np.kron(Z, Z))


def test_pauli_matrices_match():
    for ours, ref in zip(PAULI_MATRICES, BASIS):
        np.testing.assert_array_equal(ours, ref)


def test_unitaries_against_expm():
    for theta in (0.0, 0.3, np.pi / 2, 2.5):
        np.testing.assert_allclose(gate_unitary("RX", theta), _expm_rx(theta), atol=1e-14)
    np.testing.assert_allclose(gate_unitary("RZZ"), _expm_rzz(), atol=1e-14)


def test_rx_zero_is_identity():
    np.testing.assert_allclose(gate_unitary("RX", 0.0), np.eye(2), atol=0)


def test_unknown_gate():
    with pytest.raises(ValueError):
        gate_unitary("CNOT")


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.1, np.pi / 2, np.pi, -0.7])
def test_rx_superoperator_dense(theta):
    u = _expm_rx(theta)
    m = rx_superoperator(theta)
    for a in range(4):
        conj = u.conj().T @ BASIS[a] @ u
        for b in range(4):
            assert m[b, a] == pytest.approx(np.trace(BASIS[b] @ conj).real / 2, abs=1e-14)
    np.testing.assert_allclose(m @ m.T, np.eye(4), atol=1e-14)


def test_rzz_superoperator_dense():
    u = _expm_rzz()
    m = rzz_superoperator()
    for a in range(16):
        pa = np.kron(BASIS[a // 4], BASIS[a % 4])
        conj = u.conj().T @ pa @ u
        for b in range(16):
            pb = np.kron(BASIS[b // 4], BASIS[b % 4])
            assert m[b, a] == pytest.approx(np.trace(pb @ conj).real / 4, abs=1e-14)


def test_rzz_rules_are_single_signed_strings():
    table = rzz_rule_table()
    assert len(table) == 16
    m = rzz_superoperator()
    for (a, b), (a2, b2, sign) in table.items():
        assert sign in (1.0, -1.0)
        col = np.zeros(16)
        col[4 * a2 + b2] = sign
        np.testing.assert_array_equal(m[:, 4 * a + b], col)


def test_x_on_first_site_maps_to_y_z():
    # conjugating X (x) I by the ZZ rotation gives +Y (x) Z
    assert rzz_rule_table()[(1, 0)] == (2, 3, 1.0)


def test_clifford_angle_rules_are_exact():
    table = rx_rule_table(np.pi / 2)
    assert table[3] == [(2, 1.0)]
    assert table[2] == [(3, -1.0)]
    assert table[1] == [(1, 1.0)]
    np.testing.assert_array_equal(np.abs(rx_superoperator(np.pi / 2)) % 1, np.zeros((4, 4)))


def test_generic_superoperator_two_qubits():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u = scipy.linalg.expm(1j * (h + h.conj().T))
    m = conjugation_superoperator(u)
    assert m.shape == (16, 16)
    np.testing.assert_allclose(m @ m.T, np.eye(16), atol=1e-12)


def test_yy_identity_and_bell_state():
    rx = np.kron(gate_unitary("RX", np.pi / 2), gate_unitary("RX", np.pi / 2))
    ryy = gate_unitary("RYY")
    np.testing.assert_allclose(rx @ gate_unitary("RZZ"), ryy @ rx, atol=1e-12)
    np.testing.assert_allclose(ryy, scipy.linalg.expm(0.25j * np.pi * np.kron(Y, Y)), atol=1e-12)
    out = ryy @ np.array([1, 0, 0, 0], dtype=complex)
    np.testing.assert_allclose(out, np.array([1, 0, 0, -1j]) / np.sqrt(2), atol=1e-12)
