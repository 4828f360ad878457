"""Shared fixtures for the test suite: closed forms and compact Pauli notation."""

from __future__ import annotations

import itertools
import math

import numpy as np

from heavyhex_pepo.pauli import PauliSum, key_from_ops

LIGHTCONE_TOL = 1e-8


def z62_t3(theta: float) -> float:
    c, s = math.cos(theta), math.sin(theta)
    return c**3 * (1 + s**2)


def z62_t4(theta: float) -> float:
    c, s = math.cos(theta), math.sin(theta)
    return c**4 * (1 + 2 * s**2 - 3 * c**2 * s**10)


def ops(text: str) -> dict[int, str]:
    """``"X61,62 Z60"`` -> ``{61: 'X', 62: 'X', 60: 'Z'}``."""
    out: dict[int, str] = {}
    for block in text.split():
        letter = block[0]
        for tok in block[1:].split(","):
            site = int(tok)
            assert site not in out, f"site {site} repeated in {text!r}"
            out[site] = letter
    return out


def pauli_sum(terms) -> PauliSum:
    """Build a PauliSum from ``(coeff, "X1,2 Z3")`` pairs, merging repeats."""
    out = PauliSum()
    for coeff, text in terms:
        out.add(key_from_ops(ops(text)), coeff)
    return out.prune()


def disjoint_product(*factors) -> list[tuple[float, str]]:
    """Expand a product of sums acting on disjoint sites.

    Each factor is a list of ``(coeff, text)``; strings on disjoint sites
    multiply by concatenation.
    """
    out = []
    for combo in itertools.product(*factors):
        coeff = math.prod(c for c, _ in combo)
        out.append((coeff, " ".join(t for _, t in combo if t)))
    return out


def assert_sums_close(actual: PauliSum, expected: PauliSum, tol: float) -> None:
    missing = set(expected.terms) - set(actual.terms)
    extra = set(actual.terms) - set(expected.terms)
    assert not missing and not extra, f"{len(missing)} missing and {len(extra)} unexpected strings"
    worst = max(abs(actual.terms[k][0] - expected.terms[k][0]) for k in expected.terms)
    assert worst <= tol, f"largest coefficient mismatch {worst:.3e}"


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)
