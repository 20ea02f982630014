"""Minimum s-t cut on capacitated graphs.

Capacities are floats; the solve quantizes them onto an integer budget that
keeps every intermediate value inside int32 (the backend overflows silently
past that), runs Dinic's algorithm via scipy, and recovers the cut side of
each node by residual-graph reachability from the source. The reported cut
value is the exact float capacity of the returned partition, so cut/flow
duality holds by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

_INT_BUDGET = 1 << 29


@dataclass(frozen=True)
class MinCutResult:
    flow_value: float
    source_side: np.ndarray  # (num_nodes,) bool; True = source/foreground side


def solve_min_cut(num_nodes: int, source: int, sink: int,
                  tail: np.ndarray, head: np.ndarray, capacity: np.ndarray,
                  uncuttable: np.ndarray | None = None) -> MinCutResult:
    """Minimum cut between source and sink over directed arcs.

    `uncuttable` marks arcs that receive the infinite-capacity sentinel
    (1 + sum of all finite capacities), which no minimum cut can sever.
    Nodes unreachable from the source in the final residual graph land on the
    sink side, making the tie convention deterministic.
    """
    tail = np.asarray(tail, dtype=np.int64)
    head = np.asarray(head, dtype=np.int64)
    capacity = np.asarray(capacity, dtype=np.float64)
    if tail.shape != head.shape or tail.shape != capacity.shape:
        raise ValueError("tail, head and capacity arrays must have equal length")
    if (capacity < 0).any():
        raise ValueError("capacities must be nonnegative")
    if uncuttable is None:
        uncuttable = np.zeros(tail.shape, dtype=bool)
    else:
        uncuttable = np.asarray(uncuttable, dtype=bool)

    finite = ~uncuttable
    total = float(capacity[finite].sum())
    scale = _INT_BUDGET / (1.0 + total)
    q = np.rint(capacity * scale).astype(np.int64)
    q[uncuttable] = 0
    sentinel_q = int(q.sum()) + 1
    q[uncuttable] = sentinel_q

    graph = csr_matrix((q, (tail, head)), shape=(num_nodes, num_nodes))
    result = maximum_flow(graph, source, sink)

    residual = graph - result.flow
    residual.data = np.where(residual.data > 0, 1, 0)
    residual.eliminate_zeros()
    reached = breadth_first_order(residual, source, directed=True,
                                  return_predecessors=False)
    source_side = np.zeros(num_nodes, dtype=bool)
    source_side[reached] = True
    if source_side[sink]:
        raise RuntimeError("max-flow backend left the sink reachable from the source")

    crossing = source_side[tail] & ~source_side[head]
    if (crossing & uncuttable).any():
        raise RuntimeError("minimum cut severed an uncuttable arc")
    flow_value = math.fsum(capacity[crossing & finite])
    return MinCutResult(flow_value, source_side)
