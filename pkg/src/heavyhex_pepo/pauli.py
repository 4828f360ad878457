"""Sparse Pauli-string algebra and exact Heisenberg back-propagation.

Observables are real linear combinations of Pauli strings. Conjugating by the
Clifford R_ZZ layer maps each string to one signed string; conjugating by
R_X(theta) splits every string at each site carrying Y or Z into a cosine
branch (same letter) and a sine branch (letter changed). Sine-branch picks are
counted in each term's ``order``, which the ``MaxOrder`` policy truncates on.

Internally a string is a pair of bit masks ``(x, z)``: bit ``s`` of ``x`` is
set for X or Y on site ``s`` and bit ``s`` of ``z`` for Z or Y.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .gates import PAULI_LABELS, rx_rule_table, rzz_rule_table
from .lattice import CircuitSpec, Lattice

# Coefficients below this after merging are float noise, not physics.
MERGE_TOL = 1e-15
DEFAULT_MAX_TERMS = 10**7

Key = tuple[int, int]

_LETTER_BITS = {0: (0, 0), 1: (1, 0), 2: (1, 1), 3: (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


class ResourceLimitError(RuntimeError):
    """Raised when a Pauli sum would exceed the live-term cap."""


def _letter(key: Key, site: int) -> int:
    x, z = key
    return _BITS_LETTER[((x >> site) & 1, (z >> site) & 1)]


def _set_letter(key: Key, site: int, letter: int) -> Key:
    x, z = key
    bx, bz = _LETTER_BITS[letter]
    mask = ~(1 << site)
    return (x & mask) | (bx << site), (z & mask) | (bz << site)


def _sites(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def key_from_ops(ops: Mapping[int, str]) -> Key:
    x = z = 0
    for site, letter in ops.items():
        letter = letter.upper()
        if letter == "I":
            continue
        bx, bz = _LETTER_BITS[PAULI_LABELS.index(letter)]
        x |= bx << site
        z |= bz << site
    return x, z


def ops_from_key(key: Key) -> dict[int, str]:
    x, z = key
    return {s: PAULI_LABELS[_letter(key, s)] for s in sorted(_sites(x | z))}


@dataclass(frozen=True)
class PauliTerm:
    """``coeff * P`` with ``P`` given as a site -> letter map (identity elsewhere)."""

    coeff: float
    ops: Mapping[int, str]
    order: int = 0

    @property
    def key(self) -> Key:
        return key_from_ops(self.ops)

    def label(self) -> str:
        return format_pauli_string(self.ops)


def format_pauli_string(ops: Mapping[int, str]) -> str:
    """``{13: 'X', 9: 'Y', 8: 'Z'} -> 'X13 Y9 Z8'`` (letters X, Y, Z; sites ascending)."""
    parts = []
    for letter in "XYZ":
        parts.extend(f"{letter}{s}" for s in sorted(ops) if ops[s] == letter)
    return " ".join(parts) if parts else "I"


def parse_pauli_string(text: str) -> dict[int, str]:
    """Inverse of :func:`format_pauli_string`; ``'I'`` or ``''`` is the identity."""
    ops: dict[int, str] = {}
    for tok in text.split():
        if tok == "I":
            continue
        m = re.fullmatch(r"([XYZ])(\d+)", tok)
        if not m:
            raise ValueError(f"bad Pauli token {tok!r}")
        site = int(m.group(2))
        if site in ops:
            raise ValueError(f"site {site} repeated in {text!r}")
        ops[site] = m.group(1)
    return ops


class PauliSum:
    """Real linear combination of distinct Pauli strings.

    ``terms`` maps ``(x, z)`` masks to ``[coeff, order]``. When strings merge
    the coefficients add and the smaller order is kept.
    """

    def __init__(self, terms: dict[Key, list] | None = None) -> None:
        self.terms: dict[Key, list] = terms if terms is not None else {}

    @classmethod
    def from_terms(cls, terms: Iterable[PauliTerm]) -> PauliSum:
        out = cls()
        for t in terms:
            out.add(t.key, t.coeff, t.order)
        out.prune()
        return out

    @classmethod
    def single(cls, ops: Mapping[int, str], coeff: float = 1.0) -> PauliSum:
        return cls({key_from_ops(ops): [float(coeff), 0]})

    def add(self, key: Key, coeff: float, order: int = 0) -> None:
        entry = self.terms.get(key)
        if entry is None:
            self.terms[key] = [coeff, order]
        else:
            entry[0] += coeff
            if order < entry[1]:
                entry[1] = order

    def prune(self, tol: float = MERGE_TOL) -> PauliSum:
        self.terms = {k: v for k, v in self.terms.items() if abs(v[0]) >= tol}
        return self

    def copy(self) -> PauliSum:
        return PauliSum({k: list(v) for k, v in self.terms.items()})

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        for key in self.sorted_keys():
            coeff, order = self.terms[key]
            yield PauliTerm(coeff, ops_from_key(key), order)

    def sorted_keys(self) -> list[Key]:
        return sorted(self.terms, key=_canonical_key)

    def coeff(self, ops: Mapping[int, str]) -> float:
        entry = self.terms.get(key_from_ops(ops))
        return entry[0] if entry else 0.0

    def norm_squared(self) -> float:
        return math.fsum(v[0] * v[0] for v in self.terms.values())

    def support(self) -> set[int]:
        mask = 0
        for x, z in self.terms:
            mask |= x | z
        return set(_sites(mask))

    def max_site(self) -> int:
        s = self.support()
        return max(s) if s else -1

    def to_dict(self) -> dict[str, float]:
        return {format_pauli_string(ops_from_key(k)): self.terms[k][0] for k in self.sorted_keys()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["coeff", "order", "string"])
        for t in self:
            writer.writerow([f"{t.coeff:.17g}", t.order, t.label()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> PauliSum:
        out = cls()
        for row in csv.DictReader(io.StringIO(text)):
            out.add(key_from_ops(parse_pauli_string(row["string"])), float(row["coeff"]), int(row["order"]))
        return out

    def __repr__(self) -> str:
        return f"PauliSum({len(self)} terms)"


def _canonical_key(key: Key) -> tuple:
    ops = ops_from_key(key)
    return tuple((s, PAULI_LABELS.index(ops[s])) for s in ops)


# -- truncation policies ---------------------------------------------------


@dataclass(frozen=True)
class NoTruncation:
    def apply(self, psum: PauliSum) -> PauliSum:
        return psum


@dataclass(frozen=True)
class MaxOrder:
    """Drop terms whose sine-branch count exceeds ``k``."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("MaxOrder needs k >= 0")

    def apply(self, psum: PauliSum) -> PauliSum:
        psum.terms = {key: v for key, v in psum.terms.items() if v[1] <= self.k}
        return psum


@dataclass(frozen=True)
class CoeffThreshold:
    """Drop terms with ``|coeff| < eps``."""

    eps: float

    def __post_init__(self) -> None:
        if not self.eps >= 0:
            raise ValueError("CoeffThreshold needs eps >= 0")

    def apply(self, psum: PauliSum) -> PauliSum:
        return psum.prune(self.eps)


@dataclass(frozen=True)
class MaxTerms:
    """Keep the ``m`` largest-magnitude terms (ties broken canonically)."""

    m: int

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError("MaxTerms needs m >= 0")

    def apply(self, psum: PauliSum) -> PauliSum:
        if len(psum) <= self.m:
            return psum
        ranked = sorted(psum.terms, key=lambda k: (-abs(psum.terms[k][0]), _canonical_key(k)))
        psum.terms = {k: psum.terms[k] for k in ranked[: self.m]}
        return psum


TruncationPolicy = NoTruncation | MaxOrder | CoeffThreshold | MaxTerms


# -- single-term rules -----------------------------------------------------


def conjugate_rzz(term: PauliTerm, edge: tuple[int, int]) -> PauliTerm:
    """``R_ZZ^dag P R_ZZ`` on one edge; always a single signed string."""
    i, j = edge
    key = term.key
    a, b = _letter(key, i), _letter(key, j)
    a2, b2, sign = rzz_rule_table()[(a, b)]
    key = _set_letter(_set_letter(key, i, a2), j, b2)
    return PauliTerm(sign * term.coeff, ops_from_key(key), term.order)


def conjugate_rx(term: PauliTerm, theta: float, sites: Iterable[int] | None = None) -> PauliSum:
    """``R_X(theta)^dag P R_X(theta)`` with R_X on every site (or only ``sites``)."""
    single = PauliSum({term.key: [term.coeff, term.order]})
    out = _rx_layer(single, theta, None if sites is None else set(sites))
    return out.prune()


# -- layer application -----------------------------------------------------


def _rzz_layer(psum: PauliSum, lattice: Lattice) -> PauliSum:
    table = rzz_rule_table()
    incident = [[] for _ in range(lattice.num_sites)]
    for a, b in lattice.edges:
        incident[a].append((a, b))
        incident[b].append((a, b))
    out: dict[Key, list] = {}
    for key, (coeff, order) in psum.terms.items():
        x = key[0]
        # Only edges whose endpoints disagree in the X bit anticommute with Z Z.
        edges = {e for s in _sites(x) for e in incident[s]}
        for i, j in sorted(edges):
            if ((x >> i) ^ (x >> j)) & 1 == 0:
                continue
            a2, b2, sign = table[(_letter(key, i), _letter(key, j))]
            key = _set_letter(_set_letter(key, i, a2), j, b2)
            coeff *= sign
        # R_ZZ is a bijection on strings, so no merging is possible here.
        out[key] = [coeff, order]
    return PauliSum(out)


def _rx_layer(
    psum: PauliSum, theta: float, sites: set[int] | None = None, max_terms: int = DEFAULT_MAX_TERMS
) -> PauliSum:
    rules = rx_rule_table(theta)
    out = PauliSum()
    for key, (coeff, order) in psum.terms.items():
        z = key[1]
        active = [s for s in _sites(z) if sites is None or s in sites]
        choices = []
        for s in active:
            letter = _letter(key, s)
            choices.append([(s, b, c, b != letter) for b, c in rules[letter]])
        for combo in itertools.product(*choices):
            k2, c2, o2 = key, coeff, order
            for s, b, c, branched in combo:
                k2 = _set_letter(k2, s, b)
                c2 *= c
                o2 += branched
            out.add(k2, c2, o2)
        if len(out) > max_terms:
            raise ResourceLimitError(f"Pauli sum exceeded {max_terms} live terms")
    return out.prune()


Layer = str | tuple


def _normalize_layer(layer: Layer) -> tuple[str, float | None]:
    if isinstance(layer, str):
        name, theta = layer.upper(), None
    else:
        name, theta = str(layer[0]).upper(), (float(layer[1]) if len(layer) > 1 else None)
    if name == "RZZ":
        return name, None
    if name == "RX" and theta is not None:
        return name, theta
    raise ValueError(f"bad layer {layer!r}; expected 'RZZ' or ('RX', theta)")


def layerwise_conjugate(
    obs: PauliSum,
    layers: Sequence[Layer],
    lattice: Lattice,
    policy: TruncationPolicy | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
    callback: Callable[[int, str, PauliSum], None] | None = None,
) -> PauliSum:
    """Conjugate ``obs`` by the given layers, first layer innermost.

    ``"RZZ"`` is the full R_ZZ layer over every lattice edge and
    ``("RX", theta)`` is R_X(theta) on every site. ``policy`` is applied
    after each layer and ``callback(index, name, psum)`` sees every
    intermediate sum.
    """
    policy = policy or NoTruncation()
    if obs.max_site() >= lattice.num_sites:
        raise ValueError("observable support exceeds lattice")
    current = obs.copy()
    for idx, layer in enumerate(layers):
        name, theta = _normalize_layer(layer)
        if name == "RZZ":
            current = _rzz_layer(current, lattice)
        else:
            current = _rx_layer(current, theta, max_terms=max_terms)
        current = policy.apply(current)
        if len(current) > max_terms:
            raise ResourceLimitError(f"Pauli sum exceeded {max_terms} live terms")
        if callback is not None:
            callback(idx, name, current)
    return current


def circuit_layers(circuit: CircuitSpec) -> list[Layer]:
    """Heisenberg conjugation order for a circuit, innermost first."""
    layers: list[Layer] = [("RX", circuit.theta_h)] if circuit.extra_rx else []
    for _ in range(circuit.steps):
        layers.append("RZZ")
        layers.append(("RX", circuit.theta_h))
    return layers


def back_propagate(
    obs: PauliSum,
    circuit: CircuitSpec,
    lattice: Lattice,
    policy: TruncationPolicy | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
    callback: Callable[[int, str, PauliSum], None] | None = None,
) -> PauliSum:
    """Heisenberg operator ``U^dag O U`` of the kicked-Ising circuit."""
    return layerwise_conjugate(obs, circuit_layers(circuit), lattice, policy, max_terms, callback)


def zero_state_expectation(psum: PauliSum) -> float:
    """``<0...0| O |0...0>``: the sum of coefficients of I/Z-only strings."""
    return math.fsum(v[0] for (x, _), v in psum.terms.items() if x == 0)


# -- observables -------------------------------------------------------------

_LIBRARY = {
    "Z62": {"Z": [62]},
    "W10": {"X": [13, 29, 31], "Y": [9, 30], "Z": [8, 12, 17, 28, 32]},
    "W17": {"X": [37, 41, 52, 56, 57, 58, 62, 79], "Y": [75], "Z": [38, 40, 42, 63, 72, 80, 90, 91]},
    "W17tilde": {"X": [37, 41, 52, 56, 57, 58, 62, 79], "Y": [38, 40, 42, 63, 72, 80, 90, 91], "Z": [75]},
}


def observable_library(name: str) -> PauliSum:
    """Named device observables on the 127-qubit numbering."""
    try:
        spec = _LIBRARY[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; known: {sorted(_LIBRARY)}") from None
    return PauliSum.single({s: letter for letter, sites in spec.items() for s in sites})


def parse_observable(text: str) -> PauliSum:
    """Library name or blocks like ``"X13,29,31;Y9,30;Z8,12,17,28,32"``."""
    text = text.strip()
    if text in _LIBRARY:
        return observable_library(text)
    ops: dict[int, str] = {}
    for block in filter(None, (b.strip() for b in text.split(";"))):
        letter, rest = block[0].upper(), block[1:]
        if letter not in "XYZ" or not rest:
            raise ValueError(f"bad observable block {block!r}")
        for tok in rest.split(","):
            site = int(tok)
            if site in ops:
                raise ValueError(f"site {site} appears twice in observable")
            ops[site] = letter
    if not ops:
        raise ValueError(f"empty observable {text!r}")
    return PauliSum.single(ops)


def relabel(psum: PauliSum, mapping: Mapping[int, int]) -> PauliSum:
    """Move every term onto new site indices (sites missing from ``mapping`` raise)."""
    out = PauliSum()
    for t in psum:
        ops = {mapping[s]: letter for s, letter in t.ops.items()}
        out.add(key_from_ops(ops), t.coeff, t.order)
    return out
