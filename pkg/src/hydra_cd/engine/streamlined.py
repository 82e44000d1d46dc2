"""Asynchronous streamlined (ASL) ring synchronization.

Nodes form a ring; node l only sends to l+ = (l+1) mod c and only receives
from l- = (l-1) mod c. At the end of iteration k node l sends

    dG_{k,l} = dG_{k-1,l-} - dg_{k-c,l} + dg_{k,l}

and updates its replica with

    g_{k+1,l} = g_{k,l} + dg_{k,l} + dG_{k,l-} - dg_{k-c+1,l}.

Unrolled, dG_{k,l} is the sum of the last c deltas along the ring diagonal
ending at (k, l), so an update made by node j reaches node l after
(l - j) mod c iterations. All deltas with t <= 0 are zero.
"""

from collections import deque
from typing import Sequence

import numpy as np

from .base import BaseProtocol
from .node import NodeState


def ring_distance(src: int, dst: int, c: int) -> int:
    """Hops from src forward to dst."""
    return (dst - src) % c


def asl_prepare(nodes: Sequence[NodeState]) -> None:
    c = len(nodes)
    for node in nodes:
        node.history = deque((np.zeros(node.n) for _ in range(c + 1)), maxlen=c + 1)
        node.inbox = np.zeros(node.n)
        node.outbox = np.zeros(node.n)


def asl_step(nodes: Sequence[NodeState], deltas: Sequence[np.ndarray], k: int, payload: int = 0) -> None:
    """One ring exchange closing iteration k."""
    c = len(nodes)
    for node, delta in zip(nodes, deltas):
        node.history.append(delta)
        # history[0] = dg_{k-c,l}, history[-1] = dg_{k,l}
        node.outbox = node.inbox - node.history[0] + node.history[-1]
        node.counters.sent += 1
        node.counters.floats_sent += payload

    received = [nodes[(l - 1) % c].outbox for l in range(c)]
    for node, incoming in zip(nodes, received):
        node.counters.received += 1
        # history[1] = dg_{k-c+1,l}, already folded in c-1 iterations ago
        node.g += node.history[-1] + incoming - node.history[1]
        node.inbox = incoming


class StreamlinedRingProtocol(BaseProtocol):
    """One cumulative message per node per iteration around a ring."""

    def get_protocol_name(self) -> str:
        return "asl"

    def messages_per_iteration(self) -> int:
        return self.c

    @property
    def has_exact_residual(self) -> bool:
        return False

    def prepare(self, nodes):
        super().prepare(nodes)
        asl_prepare(nodes)

    def synchronize(self, nodes, deltas, k):
        asl_step(nodes, deltas, k, self.payload)
