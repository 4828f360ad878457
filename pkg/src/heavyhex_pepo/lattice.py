"""Qubit interaction graphs for kicked-Ising circuits.

A :class:`Lattice` is an undirected graph of maximum degree three whose edges
are partitioned into vertex-disjoint gate layers, so that all two-qubit gates
of one layer can be applied in parallel. The 127-qubit heavy-hexagon device
layout ships as a JSON data file; small heavy-hexagon patches are generated
on the fly for testing.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

Edge = tuple[int, int]

MAX_DEGREE = 3

# Ground truth for the bundled device numbering: neighbors of qubit 62 and the
# shells added by the radius-2 and radius-3 balls around it.
_IBM127_CHECKS = {
    "neighbors_62": {61, 63, 72},
    "shell_2": {60, 64, 81},
    "shell_3": {53, 54, 59, 65, 80, 82},
}


class LatticeError(ValueError):
    """Raised for malformed lattices or lattice data files."""


@dataclass(frozen=True)
class CircuitSpec:
    """Parameters of a kicked-Ising circuit ``[R_ZZ R_X(theta_h)]^steps``.

    ``extra_rx`` appends one more R_X(theta_h) layer after the last step
    (the "5+1" circuit).
    """

    theta_h: float
    steps: int
    extra_rx: bool = False

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")
        if not (self.theta_h == self.theta_h and abs(self.theta_h) != float("inf")):
            raise ValueError(f"theta_h must be finite, got {self.theta_h}")


@dataclass(frozen=True)
class Lattice:
    """Undirected degree-<=3 graph with a partition of its edges into layers.

    Attributes:
        num_sites: Number of sites; sites are ``0..num_sites-1``.
        edges: Edges as ``(a, b)`` with ``a < b``.
        layers: Tuple of layers, each a tuple of indices into ``edges``.
        site_labels: Optional external labels (e.g. device qubit numbers).
    """

    num_sites: int
    edges: tuple[Edge, ...]
    layers: tuple[tuple[int, ...], ...] = ()
    site_labels: tuple[int, ...] | None = None
    _adjacency: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        edges = tuple((min(a, b), max(a, b)) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        adjacency: list[list[int]] = [[] for _ in range(self.num_sites)]
        seen: set[Edge] = set()
        for a, b in edges:
            if not (0 <= a < self.num_sites and 0 <= b < self.num_sites):
                raise LatticeError(f"edge {(a, b)} out of range for {self.num_sites} sites")
            if a == b:
                raise LatticeError(f"self-loop on site {a}")
            if (a, b) in seen:
                raise LatticeError(f"duplicate edge {(a, b)}")
            seen.add((a, b))
            adjacency[a].append(b)
            adjacency[b].append(a)
        for site, nbrs in enumerate(adjacency):
            if len(nbrs) > MAX_DEGREE:
                raise LatticeError(f"site {site} has degree {len(nbrs)} > {MAX_DEGREE}")
        object.__setattr__(self, "_adjacency", tuple(tuple(sorted(n)) for n in adjacency))
        if self.site_labels is not None and len(self.site_labels) != self.num_sites:
            raise LatticeError("site_labels length does not match num_sites")

        if not self.layers:
            object.__setattr__(self, "layers", _greedy_edge_coloring(edges, self.num_sites))
        else:
            layers = tuple(tuple(layer) for layer in self.layers)
            _check_layers(edges, layers)
            object.__setattr__(self, "layers", layers)

    def neighbors(self, site: int) -> tuple[int, ...]:
        return self._adjacency[site]

    def degree(self, site: int) -> int:
        return len(self._adjacency[site])

    def edge_index(self, a: int, b: int) -> int:
        return self.edges.index((min(a, b), max(a, b)))

    def incident_edges(self, site: int) -> list[int]:
        return [k for k, e in enumerate(self.edges) if site in e]

    def layer_edges(self, k: int) -> list[Edge]:
        return [self.edges[i] for i in self.layers[k]]

    def ball(self, support: Iterable[int], radius: int) -> set[int]:
        """Sites within graph distance ``radius`` of ``support``."""
        dist = {s: 0 for s in support}
        queue = deque(dist)
        while queue:
            s = queue.popleft()
            if dist[s] == radius:
                continue
            for n in self._adjacency[s]:
                if n not in dist:
                    dist[n] = dist[s] + 1
                    queue.append(n)
        return set(dist)

    def to_json(self) -> dict:
        return {
            "sites": self.num_sites,
            "edges": [list(e) for e in self.edges],
            "layers": [list(layer) for layer in self.layers],
        }


def _greedy_edge_coloring(edges: Sequence[Edge], num_sites: int) -> tuple[tuple[int, ...], ...]:
    used: list[set[int]] = [set() for _ in range(num_sites)]
    layers: list[list[int]] = []
    for k, (a, b) in enumerate(edges):
        color = 0
        while color in used[a] or color in used[b]:
            color += 1
        if color == len(layers):
            layers.append([])
        layers[color].append(k)
        used[a].add(color)
        used[b].add(color)
    return tuple(tuple(layer) for layer in layers)


def _check_layers(edges: Sequence[Edge], layers: Sequence[Sequence[int]]) -> None:
    covered: list[int] = []
    for layer in layers:
        touched: set[int] = set()
        for k in layer:
            if not 0 <= k < len(edges):
                raise LatticeError(f"layer refers to unknown edge index {k}")
            a, b = edges[k]
            if a in touched or b in touched:
                raise LatticeError(f"layer {list(layer)} is not vertex-disjoint")
            touched.update((a, b))
        covered.extend(layer)
    if sorted(covered) != list(range(len(edges))):
        raise LatticeError("layers do not cover every edge exactly once")


def edge_layers(lattice: Lattice) -> tuple[tuple[int, ...], ...]:
    """Greedy edge coloring in edge order.

    Uses at most four layers on heavy-hexagon graphs, where every edge joins
    a degree-<=3 site to a degree-2 site.
    """
    return _greedy_edge_coloring(lattice.edges, lattice.num_sites)


def lattice_from_json(doc: dict) -> Lattice:
    try:
        n = int(doc["sites"])
        edges = tuple((int(a), int(b)) for a, b in doc["edges"])
        layers = tuple(tuple(int(k) for k in layer) for layer in doc.get("layers") or ())
    except (KeyError, TypeError, ValueError) as exc:
        raise LatticeError(f"malformed lattice document: {exc}") from exc
    labels = doc.get("site_labels")
    return Lattice(n, edges, layers, tuple(labels) if labels is not None else None)


def load_lattice(path: str | Path) -> Lattice:
    with open(path, encoding="utf-8") as fh:
        return lattice_from_json(json.load(fh))


def build_ibm127() -> Lattice:
    """The 127-qubit heavy-hexagon device lattice.

    Loaded from the bundled JSON coupling map and validated against known
    facts about the device numbering; any mismatch is a hard error.
    """
    try:
        text = resources.files("heavyhex_pepo").joinpath("data/ibm127.json").read_text("utf-8")
        lattice = lattice_from_json(json.loads(text))
    except (OSError, json.JSONDecodeError) as exc:
        raise LatticeError(f"cannot load bundled ibm127 lattice: {exc}") from exc

    if lattice.num_sites != 127 or len(lattice.edges) != 144:
        raise LatticeError("bundled ibm127 lattice must have 127 sites and 144 edges")
    if set(lattice.neighbors(62)) != _IBM127_CHECKS["neighbors_62"]:
        raise LatticeError("bundled ibm127 lattice: wrong neighbors of site 62")
    b1, b2, b3 = (lattice.ball([62], r) for r in (1, 2, 3))
    if b2 - b1 != _IBM127_CHECKS["shell_2"] or b3 - b2 != _IBM127_CHECKS["shell_3"]:
        raise LatticeError("bundled ibm127 lattice: wrong distance shells around site 62")
    if any(lattice.degree(s) == 0 for s in range(127)):
        raise LatticeError("bundled ibm127 lattice has isolated sites")
    return lattice


def patch_size(rows: int, cols: int) -> tuple[int, int]:
    """Site and edge count of ``build_patch(rows, cols)``.

    With ``V = 2(2c+1) + (r-1)(2c+2)`` corner sites and
    ``E = 4c + (r-1)(2c+1) + r(c+1)`` honeycomb edges, the patch has
    ``V + E`` sites and ``2E`` edges.
    """
    corners = 2 * (2 * cols + 1) + (rows - 1) * (2 * cols + 2)
    hex_edges = 4 * cols + (rows - 1) * (2 * cols + 1) + rows * (cols + 1)
    return corners + hex_edges, 2 * hex_edges


def build_patch(rows: int, cols: int) -> Lattice:
    """Heavy-hexagon patch of ``rows x cols`` hexagonal plaquettes.

    Plaquettes sit in a brick-wall layout: plaquette ``(r, c)`` spans corner
    rows ``r`` and ``r+1`` and columns ``2c + r%2 .. 2c + r%2 + 2``. Every
    honeycomb edge is then bisected by an extra site. Corner sites are
    numbered first, in (row, column) order, followed by the bisecting sites
    in sorted honeycomb-edge order. See :func:`patch_size` for the counts.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be >= 1, got {rows}x{cols}")
    hex_edges: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for r in range(rows):
        for c in range(cols):
            x0 = 2 * c + r % 2
            for y in (r, r + 1):
                hex_edges.add(((y, x0), (y, x0 + 1)))
                hex_edges.add(((y, x0 + 1), (y, x0 + 2)))
            hex_edges.add(((r, x0), (r + 1, x0)))
            hex_edges.add(((r, x0 + 2), (r + 1, x0 + 2)))
    corners = sorted({v for e in hex_edges for v in e})
    index = {v: k for k, v in enumerate(corners)}
    edges: list[Edge] = []
    for k, (u, v) in enumerate(sorted(hex_edges)):
        mid = len(corners) + k
        edges.append((index[u], mid))
        edges.append((index[v], mid))
    return Lattice(len(corners) + len(hex_edges), tuple(sorted(edges)))


def extract_lightcone(
    lattice: Lattice, support: Iterable[int], t: int
) -> tuple[Lattice, dict[int, int]]:
    """Induced subgraph on the radius-``t`` ball around ``support``.

    One R_ZZ layer can grow an operator's support by at most one edge, so
    evolving an observable on ``support`` for ``t`` steps on the returned
    lattice gives the same Heisenberg operator as on the full lattice.

    Returns:
        The sublattice (site labels hold the original indices) and the map
        from original site index to sublattice index.
    """
    support = list(support)
    if not support:
        raise ValueError("support must be non-empty")
    for s in support:
        if not 0 <= s < lattice.num_sites:
            raise ValueError(f"site {s} not in lattice")
    sites = sorted(lattice.ball(support, t))
    relabel = {s: k for k, s in enumerate(sites)}
    edges = tuple(
        (relabel[a], relabel[b]) for a, b in lattice.edges if a in relabel and b in relabel
    )
    labels = tuple(lattice.site_labels[s] for s in sites) if lattice.site_labels else tuple(sites)
    return Lattice(len(sites), edges, site_labels=labels), relabel
