"""Per-node state of the simulated cluster."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..errors import NonFiniteError
from ..loss import LossKind, column_delta, column_derivative
from ..regularizer import SeparableReg, prox_step


@dataclass
class MessageCounters:
    sent: int = 0
    received: int = 0
    reduce_participations: int = 0
    floats_sent: int = 0


@dataclass(eq=False)
class NodeState:
    """One node: its coordinates, its columns of A and its residual replica.

    The node only ever writes ``x`` (its own block). ``history`` holds
    delta g_{t,l} for t in [k-c, k] and ``inbox`` the last cumulative delta
    received from the ring predecessor; both are used by the ring protocol only.
    """

    node_id: int
    block: np.ndarray
    x: np.ndarray
    A_local: sp.csc_array
    m_local: np.ndarray
    g: np.ndarray
    counters: MessageCounters = field(default_factory=MessageCounters)
    history: Optional[deque] = None
    inbox: Optional[np.ndarray] = None
    outbox: Optional[np.ndarray] = None
    last_delta: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.g.size

    def touched_rows(self) -> np.ndarray:
        """Rows with a nonzero in any of this node's columns."""
        return np.unique(self.A_local.indices)

    def column(self, pos: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.A_local.indptr[pos], self.A_local.indptr[pos + 1]
        return self.A_local.indices[lo:hi], self.A_local.data[lo:hi]

    def local_update(
        self,
        positions: np.ndarray,
        beta: float,
        y: np.ndarray,
        kind: LossKind,
        reg: SeparableReg,
    ) -> np.ndarray:
        """Steps 4-6 of one iteration on this node; returns delta g_{k,l}.

        All derivatives are taken at the current residual before any of the
        sampled coordinates moves.
        """
        steps = np.empty(positions.size)
        for j, pos in enumerate(positions):
            rows, vals = self.column(pos)
            fprime = column_derivative(rows, vals, self.g, y, kind)
            i = int(self.block[pos])
            h = prox_step(i, fprime, self.m_local[pos], beta, self.x[pos], reg)
            if not math.isfinite(h):
                raise NonFiniteError("nonfinite coordinate step", coordinate=i)
            steps[j] = h

        delta = np.zeros(self.n)
        for pos, h in zip(positions, steps):
            if h == 0.0:
                continue
            self.x[pos] += h
            rows, vals = self.column(pos)
            column_delta(rows, vals, h, y, kind, delta)
        self.last_delta = delta
        return delta
