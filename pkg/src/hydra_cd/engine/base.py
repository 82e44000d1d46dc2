"""Abstract base class for residual synchronization protocols."""

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

from ..errors import ConfigError
from .node import NodeState


def shared_rows(nodes: Sequence[NodeState]) -> np.ndarray:
    """Rows touched by more than one node.

    A delta entry in any other row only matters to the node that wrote it, so
    a message needs to carry these rows and nothing else.
    """
    counts = np.zeros(nodes[0].n, dtype=np.int64)
    for node in nodes:
        counts[node.touched_rows()] += 1
    return np.flatnonzero(counts > 1)


class BaseProtocol(ABC):
    """Keeps the residual replicas g_l in step with the distributed x."""

    def __init__(self, c: int):
        """Initialize the protocol.

        Args:
            c: Number of nodes taking part
        """
        self.c = c
        self.payload = 0
        self._validate_config()

    def _validate_config(self):
        """Validate the configuration. Raise ConfigError if invalid."""
        if self.c < 1:
            raise ConfigError(f"{self.get_protocol_name()} needs at least one node")

    @abstractmethod
    def get_protocol_name(self) -> str:
        """Return the protocol name (e.g., 'ra', 'asl')."""
        pass

    @abstractmethod
    def messages_per_iteration(self) -> int:
        """Point-to-point messages sent in one iteration under this protocol."""
        pass

    @property
    @abstractmethod
    def has_exact_residual(self) -> bool:
        """Whether every replica equals the true residual after synchronization."""
        pass

    def prepare(self, nodes: Sequence[NodeState]) -> None:
        """Set the message payload and allocate buffers before the first iteration."""
        self.payload = shared_rows(nodes).size

    @abstractmethod
    def synchronize(self, nodes: Sequence[NodeState], deltas: Sequence[np.ndarray], k: int) -> None:
        """Fold this iteration's local deltas into the replicas.

        Args:
            nodes: All node states, in node order
            deltas: delta g_{k,l} for every node l
            k: Iteration number
        """
        pass
