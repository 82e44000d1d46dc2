"""Simulated cluster: node state, synchronization protocols and the Hydra loop."""

from .base import BaseProtocol, shared_rows
from .node import MessageCounters, NodeState
from .reduce_all import ReduceAllProtocol, ra_synchronize
from .solver import (
    PROTOCOLS,
    Execution,
    HydraSolver,
    Protocol,
    RunConfig,
    RunTrace,
    TraceRecord,
    get_protocol,
    run,
    start_point,
)
from .streamlined import StreamlinedRingProtocol, asl_prepare, asl_step, ring_distance


def available_protocols() -> list[str]:
    """Names accepted by :func:`get_protocol`."""
    return [p.value for p in PROTOCOLS]


__all__ = [
    "BaseProtocol",
    "shared_rows",
    "MessageCounters",
    "NodeState",
    "ReduceAllProtocol",
    "StreamlinedRingProtocol",
    "ra_synchronize",
    "asl_prepare",
    "asl_step",
    "ring_distance",
    "PROTOCOLS",
    "Protocol",
    "Execution",
    "RunConfig",
    "RunTrace",
    "TraceRecord",
    "HydraSolver",
    "get_protocol",
    "available_protocols",
    "run",
    "start_point",
]
