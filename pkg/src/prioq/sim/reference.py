"""Readable pure-Python engine with the same slot semantics as the kernel.

It consumes random numbers in exactly the kernel's order, so for equal seeds
both produce identical sample paths.  Far too slow for estimation; it exists
for unit tests and as a second implementation to diff the kernel against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..model import SystemSpec
from .engine import DISCIPLINES, FCFS, PREEMPTIVE_RESUME
from .tables import SamplingTables, build_tables


@dataclass
class Customer:
    cls: int
    arrival: int
    service: int
    remaining: int
    start: int = -1


@dataclass
class EngineState:
    """Everything the next slot depends on, apart from the random streams."""

    chains: list[int]
    queues: list[deque]
    in_service: Customer | None = None
    slot: int = 0
    X: int = 0

    @classmethod
    def empty(cls, K: int) -> EngineState:
        return cls([0] * K, [deque() for _ in range(K)])

    def work_present(self) -> int:
        return sum(c.remaining for q in self.queues for c in q)


@dataclass
class SlotEvents:
    slot: int
    served: Customer | None = None
    started: Customer | None = None
    departed: Customer | None = None
    arrivals: list[Customer] = field(default_factory=list)
    X: int = 0


def _pick(cdf: np.ndarray, u: float) -> int:
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


class SlotModel:
    """Sampling tables plus the discipline; shared by every slot of a run."""

    def __init__(self, system: SystemSpec, discipline: str | int):
        self.tables: SamplingTables = build_tables(system)
        self.discipline = DISCIPLINES.get(discipline, discipline)
        self.K = system.K

    def _select(self, state: EngineState) -> Customer:
        if self.discipline != PREEMPTIVE_RESUME and state.in_service is not None:
            return state.in_service
        present = [k for k in range(self.K) if state.queues[k]]
        if self.discipline == FCFS:
            k = min(present, key=lambda k: (state.queues[k][0].arrival, k))
        else:
            k = present[0]
        return state.queues[k][0]

    def advance_slot(self, state: EngineState, rngs) -> SlotEvents:
        """Serve one unit, move every arrival chain, admit the new batches."""
        t = self.tables
        state.slot += 1
        n = state.slot
        ev = SlotEvents(n)
        if state.X > 0:
            c = self._select(state)
            ev.served = c
            if c.start < 0:
                c.start = n
                ev.started = c
            c.remaining -= 1
            state.X -= 1
            if c.remaining == 0:
                state.queues[c.cls].popleft()
                state.in_service = None
                ev.departed = c
            elif self.discipline != PREEMPTIVE_RESUME:
                state.in_service = c
        for k in range(self.K):
            m1 = int(t.n_states[k])
            row = int(t.trans_off[k]) + state.chains[k] * m1
            j = _pick(t.trans_cdf[row : row + m1], rngs[k].random())
            if j > 0:
                e = row + j
                b0, bl = int(t.batch_idx[e]), int(t.batch_len[e])
                b = int(t.batch_val[b0 + _pick(t.batch_cdf[b0 : b0 + bl], rngs[k].random())])
                s0, sl = int(t.svc_off[k]), int(t.svc_len[k])
                for _ in range(b):
                    h = int(t.svc_val[s0 + _pick(t.svc_cdf[s0 : s0 + sl], rngs[k].random())])
                    cust = Customer(k, n, h, h)
                    state.queues[k].append(cust)
                    ev.arrivals.append(cust)
                    state.X += h
            state.chains[k] = j
        ev.X = state.X
        return ev
