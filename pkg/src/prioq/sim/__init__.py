"""Slot-exact simulator of the priority queue and its replication driver."""

from .engine import DISCIPLINES
from .reference import EngineState, SlotEvents, SlotModel
from .runner import (
    METRICS,
    ReplicationStats,
    SimConfig,
    SimEstimate,
    estimate,
    estimate_all,
    run_replication,
    run_replications,
    summarize,
)

__all__ = [
    "DISCIPLINES",
    "METRICS",
    "EngineState",
    "ReplicationStats",
    "SimConfig",
    "SimEstimate",
    "SlotEvents",
    "SlotModel",
    "estimate",
    "estimate_all",
    "run_replication",
    "run_replications",
    "summarize",
]
