"""Heisenberg-picture PEPO evolution with simple-update truncation.

The observable is stored as a projected entangled pair operator: one real
tensor per site with a 4-dimensional physical leg in the Pauli basis
``(I, X, Y, Z)`` followed by one virtual leg per incident edge, in increasing
edge-index order. Each edge carries a weight vector ``lambda`` (Vidal gauge),
so the operator is the contraction of all site tensors with every bond's
weights inserted once, times ``exp(log_scale)``.

Gates act as real superoperators on the physical legs. An R_ZZ gate on an
edge is applied with the standard simple update: the weights of the other
bonds are absorbed as the environment, the two tensors are QR-reduced,
the gate is applied to the reduced pair, and a truncated SVD splits it back
at bond dimension ``chi``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gates import rx_superoperator, rzz_superoperator
from .lattice import CircuitSpec, Lattice
from .pauli import PauliSum, ops_from_key
from .tensor import DEFAULT_MEM_CAP, contract_network, greedy_order, plan_cost, svd_truncate

log = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-12
CLOSURE = np.array([1.0, 0.0, 0.0, 1.0])  # <0|P|0> for P in (I, X, Y, Z)
CHECKPOINT_VERSION = 1
_LETTER_INDEX = {"I": 0, "X": 1, "Y": 2, "Z": 3}


@dataclass
class Pepo:
    lattice: Lattice
    tensors: list[np.ndarray]
    weights: list[np.ndarray]
    log_scale: float = 0.0
    _legs: list[list[int]] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self._legs:
            legs: list[list[int]] = [[] for _ in range(self.lattice.num_sites)]
            for k, (a, b) in enumerate(self.lattice.edges):
                legs[a].append(k)
                legs[b].append(k)
            self._legs = legs

    def leg_edges(self, site: int) -> list[int]:
        """Edge indices of the virtual legs of ``site`` (leg ``1 + k`` is entry ``k``)."""
        return self._legs[site]

    def bond_dims(self) -> list[int]:
        return [len(w) for w in self.weights]

    def max_bond(self) -> int:
        return max(self.bond_dims(), default=1)

    def copy(self) -> Pepo:
        return Pepo(
            self.lattice,
            [t.copy() for t in self.tensors],
            [w.copy() for w in self.weights],
            self.log_scale,
            [list(l) for l in self._legs],
        )

    def check(self) -> None:
        """Assert the structural invariants (dimensions, weight ordering)."""
        for site, t in enumerate(self.tensors):
            legs = self._legs[site]
            assert t.shape[0] == 4 and t.ndim == 1 + len(legs), f"bad tensor shape at site {site}"
            for k, e in enumerate(legs):
                assert t.shape[1 + k] == len(self.weights[e]), f"leg/weight mismatch on edge {e}"
        for w in self.weights:
            assert np.all(w >= 0) and np.all(np.diff(w) <= 0) and w[0] == 1.0

    def save(self, path: str | Path) -> None:
        """Write a versioned checkpoint (``.npz``)."""
        arrays = {f"t{k}": t for k, t in enumerate(self.tensors)}
        arrays.update({f"w{k}": w for k, w in enumerate(self.weights)})
        meta = {"version": CHECKPOINT_VERSION, "log_scale": self.log_scale, "lattice": self.lattice.to_json()}
        np.savez(path, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> Pepo:
        from .lattice import lattice_from_json

        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
            lattice = lattice_from_json(meta["lattice"])
            tensors = [data[f"t{k}"] for k in range(lattice.num_sites)]
            weights = [data[f"w{k}"] for k in range(len(lattice.edges))]
        return cls(lattice, tensors, weights, float(meta["log_scale"]))


@dataclass
class LayerRecord:
    name: str
    max_discarded: float
    sum_discarded: float
    seconds: float


@dataclass
class EvolutionReport:
    layers: list[LayerRecord] = field(default_factory=list)
    final_bond_dims: list[int] = field(default_factory=list)

    @property
    def max_discarded(self) -> float:
        return max((r.max_discarded for r in self.layers), default=0.0)

    @property
    def total_discarded(self) -> float:
        return math.fsum(r.sum_discarded for r in self.layers)


def init_pepo(lattice: Lattice, obs: PauliSum) -> Pepo:
    """Product PEPO of a single unit-coefficient Pauli string."""
    if len(obs) != 1:
        raise ValueError(f"PEPO start needs a single Pauli string, got {len(obs)} terms")
    (key, (coeff, _)), = obs.terms.items()
    if coeff != 1.0:
        raise ValueError("PEPO start needs a unit coefficient")
    ops = ops_from_key(key)
    if ops and max(ops) >= lattice.num_sites:
        raise ValueError("observable support exceeds lattice")
    pepo = Pepo(lattice, [], [np.ones(1) for _ in lattice.edges])
    for site in range(lattice.num_sites):
        vec = np.zeros(4)
        vec[_LETTER_INDEX[ops.get(site, "I")]] = 1.0
        pepo.tensors.append(vec.reshape((4,) + (1,) * len(pepo.leg_edges(site))))
    return pepo


def apply_rx_layer(pepo: Pepo, theta: float) -> Pepo:
    """Conjugate every site by R_X(theta); bond dimensions are unchanged."""
    m = rx_superoperator(theta)
    pepo.tensors = [np.tensordot(m, t, axes=([1], [0])) for t in pepo.tensors]
    return pepo


def _inverse_weights(w: np.ndarray) -> np.ndarray:
    small = w <= LAMBDA_FLOOR
    if np.any(small):
        log.debug("bond weight below floor %.1e; using pseudo-inverse", LAMBDA_FLOOR)
    return np.where(small, 0.0, 1.0 / np.where(small, 1.0, w))


def _scale_legs(t: np.ndarray, pepo: Pepo, site: int, skip: int, inverse: bool) -> np.ndarray:
    """Multiply every virtual leg of ``t`` except edge ``skip`` by its weights."""
    for k, e in enumerate(pepo.leg_edges(site)):
        if e == skip:
            continue
        w = _inverse_weights(pepo.weights[e]) if inverse else pepo.weights[e]
        shape = [1] * t.ndim
        shape[1 + k] = len(w)
        t = t * w.reshape(shape)
    return t


def _reduce(pepo: Pepo, site: int, edge: int) -> tuple[np.ndarray | None, np.ndarray, list[int]]:
    """Split the environment-weighted site tensor into ``Q`` and ``R[r, p, bond]``.

    Returns ``(Q, R, perm)`` where ``perm`` moved the tensor to
    ``(other legs..., p, bond)``. ``Q`` is None when QR would not shrink
    anything.
    """
    t = _scale_legs(pepo.tensors[site], pepo, site, edge, inverse=False)
    k = pepo.leg_edges(site).index(edge)
    others = [1 + j for j in range(t.ndim - 1) if j != k]
    perm = others + [0, 1 + k]
    t = np.transpose(t, perm)
    n_env = int(np.prod(t.shape[:-2], dtype=np.int64))
    n_loc = t.shape[-2] * t.shape[-1]
    mat = t.reshape(n_env, n_loc)
    if n_env <= n_loc:
        return None, mat.reshape(n_env, t.shape[-2], t.shape[-1]), perm
    q, r = np.linalg.qr(mat)
    return q, r.reshape(r.shape[0], t.shape[-2], t.shape[-1]), perm


def _restore(pepo: Pepo, site: int, edge: int, q: np.ndarray | None, factor: np.ndarray, perm: list[int]) -> None:
    """Rebuild the site tensor from ``Q @ factor[r, (p, new)]`` and undo the environment."""
    old = pepo.tensors[site]
    new_dim = factor.shape[-1]
    mat = factor.reshape(factor.shape[0], -1)
    full = mat if q is None else q @ mat
    env_shape = [old.shape[p] for p in perm[:-2]]
    t = full.reshape(env_shape + [4, new_dim])
    t = np.transpose(t, np.argsort(perm))
    pepo.tensors[site] = _scale_legs(np.ascontiguousarray(t), pepo, site, edge, inverse=True)


def _update_edge(pepo: Pepo, edge: int, gate: np.ndarray, chi: int, eps: float) -> float:
    i, j = pepo.lattice.edges[edge]
    qi, ri, pi = _reduce(pepo, i, edge)
    qj, rj, pj = _reduce(pepo, j, edge)
    lam = pepo.weights[edge]
    theta = np.einsum("ape,e,bqe->apqb", ri, lam, rj, optimize=True)
    theta = np.einsum("xypq,apqb->axyb", gate, theta, optimize=True)
    a, b = theta.shape[0], theta.shape[3]
    svd = svd_truncate(theta.reshape(a * 4, 4 * b), chi, eps)
    s0 = svd.s[0]
    if not s0 > 0:
        raise FloatingPointError(f"operator vanished on edge {edge}")
    k = len(svd.s)
    pepo.weights[edge] = svd.s / s0
    pepo.weights[edge][0] = 1.0
    pepo.log_scale += math.log(s0)
    _restore(pepo, i, edge, qi, svd.u.reshape(a, 4, k), pi)
    _restore(pepo, j, edge, qj, svd.vh.reshape(k, 4, b).transpose(2, 1, 0), pj)
    return svd.discarded_weight


def apply_rzz_layer(
    pepo: Pepo, layer: list[int] | tuple[int, ...], chi: int, eps: float = 0.0
) -> tuple[Pepo, list[float]]:
    """Apply R_ZZ on a vertex-disjoint set of edges (given by edge index).

    Returns the PEPO and the discarded weight of each edge update.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    touched: set[int] = set()
    for e in layer:
        a, b = pepo.lattice.edges[e]
        if a in touched or b in touched:
            raise ValueError("R_ZZ layer edges must be vertex-disjoint")
        touched.update((a, b))
    gate = rzz_superoperator().reshape(4, 4, 4, 4)
    discarded = [_update_edge(pepo, e, gate, chi, eps) for e in layer]
    return pepo, discarded


def evolve(pepo: Pepo, circuit: CircuitSpec, chi: int, eps: float = 0.0) -> tuple[Pepo, EvolutionReport]:
    """Heisenberg evolution through the whole circuit, innermost layer first.

    Per Trotter step the R_ZZ edge layers are applied (in lattice layer
    order), then R_X; with ``extra_rx`` one R_X layer comes first.
    """
    report = EvolutionReport()

    def rx() -> None:
        t0 = time.perf_counter()
        apply_rx_layer(pepo, circuit.theta_h)
        report.layers.append(LayerRecord("RX", 0.0, 0.0, time.perf_counter() - t0))

    if circuit.extra_rx:
        rx()
    for _ in range(circuit.steps):
        for k, layer in enumerate(pepo.lattice.layers):
            t0 = time.perf_counter()
            _, dw = apply_rzz_layer(pepo, layer, chi, eps)
            report.layers.append(
                LayerRecord(f"RZZ[{k}]", max(dw, default=0.0), math.fsum(dw), time.perf_counter() - t0)
            )
        rx()
    report.final_bond_dims = pepo.bond_dims()
    return pepo, report


def closed_network(pepo: Pepo) -> tuple[list[np.ndarray], list[tuple[int, ...]]]:
    """Scalar network of ``<0...0| O |0...0>``; labels are edge indices.

    Each bond's weights are absorbed into its lower-numbered endpoint.
    """
    tensors, labels = [], []
    for site, t in enumerate(pepo.tensors):
        v = np.tensordot(CLOSURE, t, axes=([0], [0]))
        for k, e in enumerate(pepo.leg_edges(site)):
            if pepo.lattice.edges[e][0] == site:
                shape = [1] * v.ndim
                shape[k] = len(pepo.weights[e])
                v = v * pepo.weights[e].reshape(shape)
        tensors.append(v)
        labels.append(tuple(pepo.leg_edges(site)))
    return tensors, labels


def close_and_contract(pepo: Pepo, mem_cap: int = DEFAULT_MEM_CAP) -> float:
    """Exact expectation value in the all-zeros state."""
    tensors, labels = closed_network(pepo)
    value = contract_network(tensors, labels, mem_cap=mem_cap)
    return float(value) * math.exp(pepo.log_scale)


def contraction_cost(pepo: Pepo) -> tuple[int, float]:
    """Peak intermediate size and multiply-add count of the closing contraction."""
    tensors, labels = closed_network(pepo)
    dims = {e: len(w) for e, w in enumerate(pepo.weights)}
    return plan_cost(labels, dims, greedy_order(labels, dims))
