"""tau-distributed sampling: every node draws a uniform tau-subset of its own block.

Each draw is a pure function of (seed, node, iteration). The Philox
generator is keyed by (seed, node) and its counter starts at the iteration
number, so any iteration can be replayed in isolation and concurrent nodes
never share state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .matrix import Partition

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SamplingPlan:
    partition: Partition
    tau: int
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.tau <= self.partition.s:
            raise ConfigError(f"tau must lie in [1, {self.partition.s}], got {self.tau}")
        if self.seed < 0 or self.seed > MASK64:
            raise ConfigError("seed must be a 64-bit unsigned value")

    @property
    def s(self) -> int:
        return self.partition.s

    @property
    def c(self) -> int:
        return self.partition.c


def stream(plan: SamplingPlan, node: int, iteration: int) -> np.random.Generator:
    """Independent generator for (seed, node, iteration)."""
    bit_gen = np.random.Philox(
        key=np.array([plan.seed, node], dtype=np.uint64),
        counter=np.array([0, 0, iteration, 0], dtype=np.uint64),
    )
    return np.random.Generator(bit_gen)


def draw(plan: SamplingPlan, node: int, iteration: int) -> np.ndarray:
    """Sorted global coordinates of S_l for iteration k; always tau of them."""
    if not 0 <= node < plan.c:
        raise ConfigError(f"node must lie in [0, {plan.c}), got {node}")
    block = plan.partition.blocks[node]
    if plan.tau == plan.s:
        return block.copy()
    rng = stream(plan, node, iteration)
    # partial Fisher-Yates (no replacement, unordered)
    picked = rng.choice(plan.s, size=plan.tau, replace=False, shuffle=False)
    return block[np.sort(picked)]


def draw_local(plan: SamplingPlan, node: int, iteration: int) -> np.ndarray:
    """Like :func:`draw` but returns positions inside the node's block."""
    return plan.partition.position[draw(plan, node, iteration)]


def inclusion_prob(plan: SamplingPlan, i: int, j: int) -> float:
    """P(i in S and j in S)."""
    s, tau = plan.s, plan.tau
    block_of = plan.partition.block_of
    if i == j:
        return tau / s
    if block_of[i] == block_of[j]:
        return tau * (tau - 1) / (s * (s - 1))
    return (tau / s) ** 2
