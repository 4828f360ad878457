"""Gate conventions shared by every engine.

Circuit order: one Trotter step is ``U = R_ZZ @ R_X(theta)``, so R_X acts on
the state first. The Heisenberg engines conjugate the observable in the
mirrored order, innermost first: ``O -> R_ZZ^dag O R_ZZ`` and then
``O -> R_X^dag O R_X``. With ``extra_rx`` the trailing R_X layer, applied last
to the state, is the first conjugation.

Pauli basis order is ``(I, X, Y, Z)``. Superoperators act on real coefficient
vectors in that basis: ``M[b, a] = Tr(P_b G^dag P_a G) / d``. They are
computed once from the dense unitaries below, never hand-coded.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PAULI_LABELS = "IXYZ"

PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Superoperator entries closer than this to 0 or +-1 are rounding noise from
# the dense derivation and are snapped, so Clifford angles stay exact.
SNAP_TOL = 1e-15


def rx_unitary(theta: float) -> np.ndarray:
    """``exp(-i theta/2 X)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rzz_unitary() -> np.ndarray:
    """``exp(i pi/4 Z (x) Z)``."""
    phase = np.exp(1j * np.pi / 4)
    return np.diag([phase, phase.conjugate(), phase.conjugate(), phase])


def ryy_unitary() -> np.ndarray:
    """The two-qubit gate with ``R_X(pi/2) R_ZZ = R_YY R_X(pi/2)``.

    Solved directly from the identity, ``R_YY = R_X(pi/2) R_ZZ R_X(pi/2)^dag``
    with R_X(pi/2) on both qubits; it equals ``exp(i pi/4 Y (x) Y)``.
    """
    rx2 = np.kron(rx_unitary(np.pi / 2), rx_unitary(np.pi / 2))
    return rx2 @ rzz_unitary() @ rx2.conj().T


def gate_unitary(kind: str, theta: float | None = None) -> np.ndarray:
    """Dense unitary for ``"RX"`` (needs ``theta``), ``"RZZ"`` or ``"RYY"``."""
    kind = kind.upper()
    if kind == "RX":
        if theta is None:
            raise ValueError("RX needs an angle")
        return rx_unitary(theta)
    if kind == "RZZ":
        return rzz_unitary()
    if kind == "RYY":
        return ryy_unitary()
    raise ValueError(f"unknown gate kind {kind!r}")


def _snap(m: np.ndarray) -> np.ndarray:
    out = m.copy()
    for target in (0.0, 1.0, -1.0):
        out[np.abs(out - target) < SNAP_TOL] = target
    return out


def conjugation_superoperator(u: np.ndarray) -> np.ndarray:
    """Real Pauli-basis matrix of ``O -> u^dag O u`` for a 1- or 2-qubit ``u``."""
    nq = int(round(np.log2(u.shape[0])))
    if nq == 1:
        basis = PAULI_MATRICES
    elif nq == 2:
        basis = np.einsum("aij,bkl->abikjl", PAULI_MATRICES, PAULI_MATRICES).reshape(16, 4, 4)
    else:
        raise ValueError("only one- and two-qubit gates are supported")
    rotated = np.einsum("ij,ajk,kl->ail", u.conj().T, basis, u)
    m = np.einsum("bij,aji->ba", basis, rotated) / u.shape[0]
    if np.max(np.abs(m.imag)) > 1e-12:
        raise AssertionError("conjugation superoperator is not real")
    return _snap(m.real)


@lru_cache(maxsize=None)
def _rzz_superop() -> np.ndarray:
    m = conjugation_superoperator(rzz_unitary())
    m.setflags(write=False)
    return m


def rzz_superoperator() -> np.ndarray:
    """16x16 matrix, two-site index ``4*a + b`` with ``a`` on the first site."""
    return _rzz_superop()


def rx_superoperator(theta: float) -> np.ndarray:
    """4x4 matrix of ``O -> R_X(theta)^dag O R_X(theta)``."""
    return conjugation_superoperator(rx_unitary(theta))


@lru_cache(maxsize=None)
def rzz_rule_table() -> dict[tuple[int, int], tuple[int, int, float]]:
    """Map ``(a, b) -> (a', b', sign)`` for conjugation by R_ZZ on one edge.

    R_ZZ is Clifford, so every column of its superoperator holds a single
    signed unit entry; anything else is a derivation error.
    """
    m = rzz_superoperator()
    table = {}
    for col in range(16):
        nz = np.flatnonzero(m[:, col])
        if len(nz) != 1 or abs(abs(m[nz[0], col]) - 1.0) > 0:
            raise AssertionError(f"R_ZZ rule for column {col} is not a signed Pauli")
        out = int(nz[0])
        table[divmod(col, 4)] = (out // 4, out % 4, float(m[out, col]))
    return table


def rx_rule_table(theta: float) -> dict[int, list[tuple[int, float]]]:
    """Map input letter -> ``[(output letter, coefficient), ...]`` for R_X(theta).

    Exactly-zero coefficients are omitted, so at ``theta = k pi/2`` every
    letter maps to a single output.
    """
    m = rx_superoperator(theta)
    return {a: [(b, float(m[b, a])) for b in range(4) if m[b, a] != 0.0] for a in range(4)}
