"""Reduce-all (RA) synchronization.

Every iteration the local deltas are summed and the sum is added to every
replica. Messages are counted for a star: each non-root node sends its
delta to node 0 and node 0 broadcasts the sum back, 2(c-1) in total.
Each message carries only the rows shared between blocks.
"""

from typing import Sequence

import numpy as np

from .base import BaseProtocol
from .node import NodeState

ROOT = 0


def ra_synchronize(nodes: Sequence[NodeState], deltas: Sequence[np.ndarray], payload: int = 0) -> np.ndarray:
    """g_l += sum_l' delta g_{k,l'} on every node; returns the sum.

    The sum is accumulated in node order once and the same array is added to
    each replica, so replicas stay bitwise identical.
    """
    total = np.array(deltas[0], dtype=float, copy=True)
    for delta in deltas[1:]:
        total += delta

    c = len(nodes)
    for node in nodes:
        node.g += total
        node.counters.reduce_participations += 1
        if node.node_id == ROOT:
            node.counters.received += c - 1
            node.counters.sent += c - 1
            node.counters.floats_sent += (c - 1) * payload
        else:
            node.counters.sent += 1
            node.counters.floats_sent += payload
            node.counters.received += 1
    return total


class ReduceAllProtocol(BaseProtocol):
    """Global sum of residual deltas, replicated to all nodes."""

    def get_protocol_name(self) -> str:
        return "ra"

    def messages_per_iteration(self) -> int:
        return 2 * (self.c - 1)

    @property
    def has_exact_residual(self) -> bool:
        return True

    def synchronize(self, nodes, deltas, k):
        ra_synchronize(nodes, deltas, self.payload)
