"""Dense tensor primitives: pairwise contraction, truncated SVD, network contraction.

Tensors are plain ``numpy.ndarray`` objects (C order). Networks are described
einsum-style: each tensor carries one integer label per leg, a label shared by
two tensors is a bond, and a label appearing once is an open leg.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

DEFAULT_MEM_CAP = 8 * 2**30  # bytes per intermediate


class MemoryCapError(MemoryError):
    """An intermediate tensor would exceed the configured memory cap."""


def contract(a: np.ndarray, b: np.ndarray, axis_pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired legs; result legs are a's free legs then b's free legs."""
    axes_a = [p[0] for p in axis_pairs]
    axes_b = [p[1] for p in axis_pairs]
    for i, j in axis_pairs:
        if a.shape[i] != b.shape[j]:
            raise ValueError(f"cannot pair leg {i} (dim {a.shape[i]}) with leg {j} (dim {b.shape[j]})")
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass(frozen=True)
class TruncatedSvd:
    """``m ~= u @ diag(s) @ vh``.

    ``s`` is descending and non-negative. ``discarded_weight`` is the dropped
    share of ``sum(s**2)``. The right factor is stored as ``vh`` (rows are the
    right singular vectors); ``v`` gives it with orthonormal columns.
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    discarded_weight: float

    @property
    def v(self) -> np.ndarray:
        return self.vh.conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vh


def _full_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        log.warning("gesdd did not converge on %s matrix, retrying with gesvd", m.shape)
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(m: np.ndarray, chi: int, eps: float = 0.0) -> TruncatedSvd:
    """Truncated SVD keeping at most ``chi`` singular values.

    Values below numerical rank (``s_i <= s_0 * max(shape) * machine eps``)
    are always dropped and do not count towards ``discarded_weight``; then
    trailing values with ``s_i**2 / sum(s**2) < eps`` are dropped too.
    At least one value is kept. Each singular pair is sign-fixed so the
    largest-magnitude entry of its left vector is positive.
    """
    if m.ndim != 2:
        raise ValueError("svd_truncate needs a matrix")
    if chi < 1 or eps < 0:
        raise ValueError(f"need chi >= 1 and eps >= 0, got chi={chi}, eps={eps}")
    if not np.all(np.isfinite(m)):
        raise ValueError("svd_truncate input has non-finite entries")

    u, s, vh = _full_svd(m)
    total = float(np.sum(s * s))
    keep = min(chi, len(s))
    rank = 1
    if total > 0:
        rank = max(1, int(np.sum(s > s[0] * max(m.shape) * np.finfo(m.dtype).eps)))
        keep = min(keep, rank)
        if eps > 0:
            rel = s[:keep] ** 2 / total
            keep = max(1, min(keep, int(np.sum(rel >= eps))))
    else:
        keep = 1
    # values below numerical rank are rounding noise, not discarded weight
    discarded = float(np.sum(s[keep:rank] ** 2)) / total if total > 0 else 0.0

    u, s, vh = u[:, :keep], s[:keep], vh[:keep, :]
    pivots = np.argmax(np.abs(u), axis=0)
    phase = u[pivots, np.arange(keep)]
    phase = phase / np.where(np.abs(phase) > 0, np.abs(phase), 1.0)
    phase = np.where(phase == 0, 1.0, phase)
    u = u / phase
    vh = vh * phase[:, None]
    return TruncatedSvd(np.ascontiguousarray(u), s.copy(), np.ascontiguousarray(vh), min(max(discarded, 0.0), 1.0))


# -- networks --------------------------------------------------------------


def _validate_network(tensors: Sequence[np.ndarray], labels: Sequence[Sequence[int]]) -> dict[int, int]:
    if len(tensors) != len(labels):
        raise ValueError("need one label tuple per tensor")
    dims: dict[int, int] = {}
    count: dict[int, int] = {}
    for t, labs in zip(tensors, labels):
        if t.ndim != len(labs):
            raise ValueError(f"tensor of rank {t.ndim} given {len(labs)} labels")
        if len(set(labs)) != len(labs):
            raise ValueError("repeated label within one tensor (traces are not supported)")
        for lab, d in zip(labs, t.shape):
            if dims.setdefault(lab, d) != d:
                raise ValueError(f"bond {lab} has inconsistent dimensions {dims[lab]} and {d}")
            count[lab] = count.get(lab, 0) + 1
    for lab, c in count.items():
        if c > 2:
            raise ValueError(f"label {lab} appears on {c} tensors")
    return dims


def _pair_result(la: tuple, lb: tuple) -> tuple:
    shared = set(la) & set(lb)
    return tuple(x for x in la if x not in shared) + tuple(x for x in lb if x not in shared)


def _size(labs: Sequence[int], dims: dict[int, int]) -> int:
    n = 1
    for lab in labs:
        n *= dims[lab]
    return n


def greedy_order(labels: Sequence[Sequence[int]], dims: dict[int, int]) -> list[tuple[int, int]]:
    """Contraction path by repeatedly merging the bonded pair with the smallest result.

    The path uses the opt_einsum convention: each step names two positions in
    the current list, which are removed and the result appended. Ties go to
    the pair with the smallest original tensor ids; unconnected leftovers are
    merged smallest-first at the end.
    """
    live: dict[int, tuple] = {k: tuple(l) for k, l in enumerate(labels)}
    owners: dict[int, set[int]] = {}
    for k, labs in live.items():
        for lab in labs:
            owners.setdefault(lab, set()).add(k)
    next_id = len(live)
    ssa_path: list[tuple[int, int]] = []
    while len(live) > 1:
        best = None
        seen = set()
        for lab, own in owners.items():
            if len(own) != 2:
                continue
            i, j = sorted(own)
            if (i, j) in seen:
                continue
            seen.add((i, j))
            cost = (_size(_pair_result(live[i], live[j]), dims), i, j)
            if best is None or cost < best:
                best = cost
        if best is None:
            i, j = sorted(live, key=lambda k: (_size(live[k], dims), k))[:2]
            i, j = min(i, j), max(i, j)
        else:
            _, i, j = best
        res = _pair_result(live[i], live[j])
        for lab in set(live[i] + live[j]):
            owners[lab] -= {i, j}
            if not owners[lab]:
                del owners[lab]
        del live[i], live[j]
        live[next_id] = res
        for lab in res:
            owners.setdefault(lab, set()).add(next_id)
        ssa_path.append((i, j))
        next_id += 1
    return _ssa_to_linear(ssa_path, len(labels))


def _ssa_to_linear(ssa_path: list[tuple[int, int]], n: int) -> list[tuple[int, int]]:
    ids = list(range(n))
    out = []
    nxt = n
    for i, j in ssa_path:
        pi, pj = ids.index(i), ids.index(j)
        out.append((min(pi, pj), max(pi, pj)))
        for p in sorted((pi, pj), reverse=True):
            ids.pop(p)
        ids.append(nxt)
        nxt += 1
    return out


def plan_cost(
    labels: Sequence[Sequence[int]], dims: dict[int, int], order: Sequence[tuple[int, int]]
) -> tuple[int, float]:
    """Largest intermediate (entries) and total multiply-add count of a path."""
    live = [tuple(l) for l in labels]
    peak = max((_size(l, dims) for l in live), default=1)
    flops = 0.0
    for i, j in order:
        la, lb = live[i], live[j]
        res = _pair_result(la, lb)
        flops += float(_size(tuple(set(la) | set(lb)), dims))
        peak = max(peak, _size(res, dims))
        for p in sorted((i, j), reverse=True):
            live.pop(p)
        live.append(res)
    return peak, flops


def contract_network(
    tensors: Sequence[np.ndarray],
    labels: Sequence[Sequence[int]],
    output: Sequence[int] | None = None,
    order: Sequence[tuple[int, int]] | None = None,
    mem_cap: int = DEFAULT_MEM_CAP,
) -> np.ndarray | complex | float:
    """Contract a tensor network exactly.

    Args:
        tensors: The tensors.
        labels: One integer label per leg of each tensor; shared labels are bonds.
        output: Order of the open legs in the result (default: sorted labels).
        order: Optional path of position pairs (see :func:`greedy_order`);
            the greedy heuristic is used when absent.
        mem_cap: Byte limit on any intermediate; the whole plan is checked
            before any work is done.

    Returns:
        A scalar for closed networks, otherwise an array over ``output``.
    """
    if not tensors:
        raise ValueError("empty network")
    dims = _validate_network(tensors, labels)
    open_labels = sorted(lab for lab in dims if sum(lab in l for l in labels) == 1)
    if output is None:
        output = open_labels
    elif sorted(output) != open_labels:
        raise ValueError(f"output {list(output)} does not match open legs {open_labels}")
    if order is None:
        order = greedy_order(labels, dims)
    elif len(order) != len(tensors) - 1:
        raise ValueError(f"path needs {len(tensors) - 1} steps, got {len(order)}")

    itemsize = np.result_type(*tensors).itemsize
    peak, _ = plan_cost(labels, dims, order)
    if peak * itemsize > mem_cap:
        raise MemoryCapError(f"contraction needs a {peak * itemsize / 2**30:.2f} GiB intermediate")

    live = list(zip(tensors, (tuple(l) for l in labels)))
    for i, j in order:
        (ta, la), (tb, lb) = live[i], live[j]
        shared = [x for x in la if x in lb]
        pairs = [(la.index(x), lb.index(x)) for x in shared]
        res = contract(ta, tb, pairs)
        for p in sorted((i, j), reverse=True):
            live.pop(p)
        live.append((res, _pair_result(la, lb)))
    (result, labs), = live
    if not labs:
        return result[()]
    return np.transpose(result, [labs.index(x) for x in output])
