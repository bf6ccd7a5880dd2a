"""Digraph construction and elementary-cycle analysis.

``enumerate_cycles`` dispatches to the Johnson-algorithm kernel (see
``_kernels``); ``brute_force_cycles`` is an independent exhaustive DFS
oracle for small digraphs, kept free of any shared code so the two can
check each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    Arc,
    DirectedCycle,
    MassFlowDigraph,
    MassFlowMatrix,
)


class CycleBudgetExceededError(RuntimeError):
    def __init__(self, max_cycles: int):
        self.max_cycles = max_cycles
        super().__init__(
            f"digraph has more than {max_cycles} elementary cycles; "
            "raise max_cycles to enumerate them all"
        )


class TooLargeForOracleError(ValueError):
    def __init__(self, n_v: int, limit: int):
        super().__init__(
            f"brute-force oracle is limited to {limit} vertices, got {n_v}"
        )


@dataclass(frozen=True)
class CycleAnalysis:
    """Cycles plus the two derived arc sets: ``q_arcs`` are arcs lying on
    no cycle, ``s_arcs`` are arcs shared by two or more cycles."""

    cycles: tuple[DirectedCycle, ...]
    q_arcs: tuple[Arc, ...]
    s_arcs: tuple[Arc, ...]

    @property
    def n_phi(self) -> int:
        return len(self.cycles)

    def q_weight_total(self) -> float:
        return float(sum(a.weight for a in self.q_arcs))

    def s_weight_total(self) -> float:
        return float(sum(a.weight for a in self.s_arcs))


def build_digraph(
    gamma: MassFlowMatrix, eps_flow: float = DEFAULT_EPS_FLOW
) -> MassFlowDigraph:
    """Arcs are exactly the off-diagonal entries above ``eps_flow``,
    weights copied verbatim; diagonal entries never become arcs."""
    values = gamma.values
    n_v = gamma.n_v
    arcs = []
    deg_in = [0] * n_v
    deg_out = [0] * n_v
    for i in range(n_v):
        for j in range(n_v):
            if i != j and values[i, j] > eps_flow:
                arcs.append(Arc(i + 1, j + 1, float(values[i, j])))
                deg_out[i] += 1
                deg_in[j] += 1
    return MassFlowDigraph(
        n_v=n_v,
        arcs=tuple(arcs),
        in_degrees=tuple(deg_in),
        out_degrees=tuple(deg_out),
    )


def _digraph_csr(d: MassFlowDigraph) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(d.n_v + 1, dtype=np.int64)
    heads = np.empty(d.n_a, dtype=np.int64)
    # arcs are already sorted by (tail, head) from the row-major builder
    pos = 0
    for arc in d.arcs:
        heads[pos] = arc.head - 1
        pos += 1
        indptr[arc.tail] += 1
    np.cumsum(indptr, out=indptr)
    return indptr, heads


def enumerate_cycles(
    d: MassFlowDigraph, max_cycles: int = DEFAULT_MAX_CYCLES
) -> CycleAnalysis:
    """Enumerate every elementary directed cycle exactly once.

    Cycles identical up to rotation of the start vertex are one cycle;
    the canonical form starts at the smallest vertex, and the result is
    sorted lexicographically by that form.  Raises
    :class:`CycleBudgetExceededError` if the digraph holds more than
    ``max_cycles`` cycles.
    """
    if max_cycles < 1:
        raise ValueError("max_cycles must be positive")
    indptr, heads = _digraph_csr(d)
    verts, offsets, status = _kernels.find_cycles(indptr, heads, d.n_v, max_cycles)
    if status != 0:
        raise CycleBudgetExceededError(max_cycles)
    weight = {(a.tail, a.head): a.weight for a in d.arcs}
    cycles = []
    for k in range(len(offsets) - 1):
        seq = [int(v) + 1 for v in verts[offsets[k] : offsets[k + 1]]]
        seq.append(seq[0])
        cycles.append(
            DirectedCycle(
                vertices=tuple(seq),
                weights=tuple(weight[(a, b)] for a, b in zip(seq, seq[1:])),
            )
        )
    cycles.sort(key=lambda c: c.vertices)
    return _analyse(d, tuple(cycles))


def brute_force_cycles(d: MassFlowDigraph, limit: int = 12) -> tuple[DirectedCycle, ...]:
    """Test oracle: exhaustive simple-path DFS, one search per start
    vertex using only larger vertices in between.  Small digraphs only."""
    if d.n_v > limit:
        raise TooLargeForOracleError(d.n_v, limit)
    adjacency: dict[int, list[int]] = {v: [] for v in range(1, d.n_v + 1)}
    weight = {}
    for a in d.arcs:
        adjacency[a.tail].append(a.head)
        weight[(a.tail, a.head)] = a.weight
    for heads in adjacency.values():
        heads.sort()

    found: list[tuple[int, ...]] = []

    def extend(path: list[int], seen: set[int]) -> None:
        for w in adjacency[path[-1]]:
            if w == path[0] and len(path) >= 2:
                found.append(tuple(path) + (w,))
            elif w > path[0] and w not in seen:
                seen.add(w)
                path.append(w)
                extend(path, seen)
                path.pop()
                seen.remove(w)

    for s in range(1, d.n_v + 1):
        extend([s], {s})

    found.sort()
    return tuple(
        DirectedCycle(
            vertices=seq,
            weights=tuple(weight[(a, b)] for a, b in zip(seq, seq[1:])),
        )
        for seq in found
    )


def _analyse(d: MassFlowDigraph, cycles: tuple[DirectedCycle, ...]) -> CycleAnalysis:
    usage: dict[tuple[int, int], int] = {(a.tail, a.head): 0 for a in d.arcs}
    for cyc in cycles:
        for arc in cyc.arcs:
            usage[arc] += 1
    q_arcs = tuple(a for a in d.arcs if usage[(a.tail, a.head)] == 0)
    s_arcs = tuple(a for a in d.arcs if usage[(a.tail, a.head)] >= 2)
    return CycleAnalysis(cycles=cycles, q_arcs=q_arcs, s_arcs=s_arcs)
