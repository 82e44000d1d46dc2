"""The Hydra iteration over c simulated nodes."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from ..errors import ConfigError, DimensionError, DivergenceError, HydraError, ProtocolError
from ..loss import init_residual, loss_value
from ..matrix import Partition
from ..problem import ProblemInstance
from ..regularizer import RegKind, SeparableReg, reg_value
from ..sampling import SamplingPlan, draw_local
from .base import BaseProtocol
from .node import NodeState
from .reduce_all import ReduceAllProtocol
from .streamlined import StreamlinedRingProtocol

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e3


class Protocol(str, Enum):
    RA = "ra"
    ASL = "asl"


class Execution(str, Enum):
    LOCKSTEP = "lockstep"
    THREADED = "threaded"


PROTOCOLS: dict[Protocol, type[BaseProtocol]] = {
    Protocol.RA: ReduceAllProtocol,
    Protocol.ASL: StreamlinedRingProtocol,
}


def get_protocol(name: Union[str, Protocol], c: int) -> BaseProtocol:
    try:
        return PROTOCOLS[Protocol(name)](c)
    except ValueError:
        raise ConfigError(f"unknown protocol '{name}'") from None


@dataclass
class RunConfig:
    tau: int
    beta: float
    protocol: Protocol = Protocol.RA
    execution: Execution = Execution.LOCKSTEP
    beta_source: str = "user"
    t_max: int = 1000
    eval_every: int = 10
    seed: int = 0
    target_gap: Optional[float] = None

    def __post_init__(self):
        try:
            self.protocol = Protocol(self.protocol)
            self.execution = Execution(self.execution)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.tau < 1:
            raise ConfigError("tau must be >= 1")
        if not np.isfinite(self.beta) or self.beta < 1:
            raise ConfigError(f"beta must be >= 1, got {self.beta}")
        if self.t_max < 0:
            raise ConfigError("iteration cap must be >= 0")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.target_gap is not None and self.target_gap < 0:
            raise ConfigError("target gap must be >= 0")


@dataclass
class TraceRecord:
    iteration: int
    loss: float
    gap: Optional[float]
    messages: int
    elapsed: float
    floats: int = 0


@dataclass
class RunTrace:
    seed: int
    beta: float
    beta_source: str
    protocol: str
    L_star: Optional[float] = None
    records: list[TraceRecord] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None

    @property
    def iterations(self) -> list[int]:
        return [r.iteration for r in self.records]

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss

    @property
    def final_gap(self) -> Optional[float]:
        return self.records[-1].gap


def start_point(reg: SeparableReg, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Feasible x0: zero clipped into any box, or a user point checked against it."""
    box = reg.kinds == RegKind.BOX
    if x0 is None:
        x0 = np.zeros(reg.d)
        x0[box] = np.clip(0.0, reg.lower[box], reg.upper[box])
        return x0

    x0 = np.array(x0, dtype=float)
    if x0.shape != (reg.d,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({reg.d},)")
    outside = box & ((x0 < reg.lower) | (x0 > reg.upper))
    if np.any(outside):
        i = int(np.flatnonzero(outside)[0])
        raise ConfigError(
            f"x0[{i}]={x0[i]:g} lies outside the box [{reg.lower[i]:g}, {reg.upper[i]:g}]"
        )
    return x0


class HydraSolver:
    """Simulated cluster running the Hydra iteration with RA or ASL synchronization."""

    def __init__(
        self,
        problem: ProblemInstance,
        partition: Partition,
        config: RunConfig,
        x0: Optional[np.ndarray] = None,
    ):
        problem.validate()
        if partition.d != problem.d:
            raise DimensionError(f"partition covers {partition.d} coordinates, problem has {problem.d}")
        if config.tau > partition.s:
            raise ConfigError(f"tau={config.tau} exceeds block size s={partition.s}")

        self.problem = problem
        self.partition = partition
        self.config = config
        self.plan = SamplingPlan(partition, config.tau, config.seed)
        self.protocol = get_protocol(config.protocol, partition.c)
        self.m = problem.curvature()
        self.iteration = 0
        self._executor: Optional[ThreadPoolExecutor] = None

        x0 = start_point(problem.reg, x0)
        g0 = init_residual(problem.A, x0, problem.y, problem.kind).g

        self.nodes = [
            NodeState(
                node_id=l,
                block=blk,
                x=x0[blk].copy(),
                A_local=problem.A.submatrix(blk),
                m_local=self.m[blk],
                g=g0.copy(),
            )
            for l, blk in enumerate(partition.blocks)
        ]
        self.protocol.prepare(self.nodes)

    # -------------------- ITERATION --------------------
    def _node_work(self, node: NodeState, k: int) -> np.ndarray:
        positions = draw_local(self.plan, node.node_id, k)
        p = self.problem
        return node.local_update(positions, self.config.beta, p.y, p.kind, p.reg)

    def hydra_iteration(self) -> None:
        """Sample, update owned coordinates, synchronize, advance k."""
        k = self.iteration
        if self.config.execution is Execution.THREADED:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(
                    max_workers=self.partition.c, thread_name_prefix="hydra-node"
                )
            futures = [self._executor.submit(self._node_work, node, k) for node in self.nodes]
            try:
                deltas = [f.result() for f in futures]
            except HydraError:
                raise
            except Exception as e:
                raise ProtocolError(f"node work failed in iteration {k}: {e}") from e
        else:
            deltas = [self._node_work(node, k) for node in self.nodes]

        self.protocol.synchronize(self.nodes, deltas, k)
        self.iteration += 1

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -------------------- OBSERVATION --------------------
    def gather_x(self) -> np.ndarray:
        x = np.empty(self.problem.d)
        for node in self.nodes:
            x[node.block] = node.x
        return x

    def messages_sent(self) -> int:
        return sum(node.counters.sent for node in self.nodes)

    def floats_sent(self) -> int:
        """Delta entries the messages so far needed to carry, counting shared rows only."""
        return sum(node.counters.floats_sent for node in self.nodes)

    def evaluate_loss_global(self) -> float:
        """L(x_k): loss from a residual plus the sum of the nodes' local regularizer values.

        Under RA node 0's replica is the true residual; under ASL no node holds
        it, so x is gathered and the residual recomputed out of band.
        """
        p = self.problem
        if self.protocol.has_exact_residual:
            g = self.nodes[0].g
        else:
            g = init_residual(p.A, self.gather_x(), p.y, p.kind).g
        total = loss_value(g, p.kind)
        for node in self.nodes:
            total += reg_value(node.x, p.reg, node.block)
        return total

    # -------------------- RUN --------------------
    def run(self) -> RunTrace:
        cfg = self.config
        L_star = self.problem.L_star
        trace = RunTrace(
            seed=cfg.seed,
            beta=cfg.beta,
            beta_source=cfg.beta_source,
            protocol=self.protocol.get_protocol_name(),
            L_star=L_star,
        )
        start = time.perf_counter()

        def record() -> TraceRecord:
            loss = self.evaluate_loss_global()
            rec = TraceRecord(
                iteration=self.iteration,
                loss=loss,
                gap=None if L_star is None else loss - L_star,
                messages=self.messages_sent(),
                elapsed=time.perf_counter() - start,
                floats=self.floats_sent(),
            )
            trace.records.append(rec)
            logger.debug(
                "k=%d loss=%.12g gap=%s msgs=%d floats=%d",
                rec.iteration, rec.loss, rec.gap, rec.messages, rec.floats,
            )
            return rec

        def reached(rec: TraceRecord) -> bool:
            return cfg.target_gap is not None and rec.gap is not None and rec.gap <= cfg.target_gap

        logger.info(
            "Running Hydra: c=%d s=%d tau=%d beta=%.6g (%s) protocol=%s seed=%d",
            self.partition.c, self.partition.s, cfg.tau, cfg.beta, cfg.beta_source,
            trace.protocol, cfg.seed,
        )
        try:
            first = record()
            limit = DIVERGENCE_FACTOR * max(first.loss, np.finfo(float).tiny)
            if not reached(first):
                while self.iteration < cfg.t_max:
                    self.hydra_iteration()
                    if self.iteration % cfg.eval_every and self.iteration != cfg.t_max:
                        continue
                    rec = record()
                    if not np.isfinite(rec.loss) or rec.loss > limit:
                        trace.final_x = self.gather_x()
                        raise DivergenceError(
                            f"loss {rec.loss:.6g} at iteration {rec.iteration} exceeds "
                            f"{DIVERGENCE_FACTOR:g} x initial loss {first.loss:.6g}; beta={cfg.beta:.6g} is likely too small",
                            trace=trace,
                        )
                    if reached(rec):
                        break
        finally:
            self.close()

        trace.final_x = self.gather_x()
        logger.info("Finished after %d iterations, loss=%.12g", self.iteration, trace.final_loss)
        return trace


def run(
    problem: ProblemInstance,
    partition: Partition,
    config: RunConfig,
    x0: Optional[np.ndarray] = None,
) -> RunTrace:
    """Build a solver and run it to T_max or the target gap."""
    return HydraSolver(problem, partition, config, x0).run()
