"""Random valid models for property tests and cross-validation runs."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .analytic import active_period_moments
from .errors import ContractError
from .model import (
    ArrivalStreamSpec,
    Pmf,
    ServiceSpec,
    SystemSpec,
    TransitionEntry,
    build_iid_active_stream,
    build_iid_stream,
)


def random_pmf(rng: np.random.Generator, lo: int, hi: int) -> Pmf:
    values = tuple(range(lo, hi + 1))
    w = rng.random(len(values)) + 0.05
    w /= w.sum()
    return Pmf(values, tuple(w))


def random_stream(
    rng: np.random.Generator,
    M: int,
    max_batch: int = 3,
    uniform_batch: bool = False,
    geometric_active: bool = False,
) -> ArrivalStreamSpec:
    """Random irreducible stream; ``p`` is a placeholder to be fixed by :func:`with_rate`.

    ``geometric_active`` gives a single active state, so active periods are
    geometric.
    """
    if geometric_active:
        M = 1
    a = rng.random(M) + 0.05
    a /= a.sum()
    T = rng.random((M, M)) + 0.05
    T /= T.sum(axis=1, keepdims=True)
    T *= rng.uniform(0.1, 0.85, size=(M, 1))
    if uniform_batch:
        return build_iid_active_stream(0.5, a, T, random_pmf(rng, 1, max_batch))

    def batch():
        return random_pmf(rng, 1, max_batch)

    return ArrivalStreamSpec(
        0.5,
        tuple(TransitionEntry(float(x), batch()) for x in a),
        tuple(tuple(TransitionEntry(float(x), batch()) for x in row) for row in T),
    )


def max_rate(stream: ArrivalStreamSpec) -> float:
    """Arrival rate in the limit ``p -> 0``."""
    ap = active_period_moments(stream)
    return ap.ELam / (1.0 + ap.EC)


def with_rate(stream: ArrivalStreamSpec, lam: float) -> ArrivalStreamSpec:
    """Same active-period structure, idle persistence chosen to give rate ``lam``."""
    ap = active_period_moments(stream)
    idle_mean = ap.ELam / lam - ap.EC
    if idle_mean < 1.0:
        raise ContractError(f"rate {lam} unreachable; maximum is {max_rate(stream)}")
    return replace(stream, p=1.0 - 1.0 / idle_mean)


def random_system(
    rng: np.random.Generator,
    K: int,
    max_states: int = 3,
    load: tuple[float, float] = (0.3, 0.85),
    max_service: int = 4,
    max_batch: int = 3,
    unit_service: bool = False,
    uniform_batch: bool = False,
    geometric_active: bool = False,
) -> SystemSpec:
    """Random stable system whose total load lies in ``load``."""
    while True:
        target = rng.uniform(*load)
        shares = rng.dirichlet(np.ones(K))
        classes = []
        for k in range(K):
            stream = random_stream(
                rng,
                int(rng.integers(1, max_states + 1)),
                max_batch=max_batch,
                uniform_batch=uniform_batch,
                geometric_active=geometric_active,
            )
            service = ServiceSpec(Pmf.point(1) if unit_service else random_pmf(rng, 1, max_service))
            lam = target * shares[k] / service.mean
            if not 0 < lam < max_rate(stream):
                break
            classes.append((with_rate(stream, lam), service))
        else:
            return SystemSpec(tuple(classes))


def random_iid_system(
    rng: np.random.Generator,
    K: int,
    load: tuple[float, float] = (0.3, 0.85),
    max_service: int = 4,
    max_batch: int = 3,
) -> SystemSpec:
    """Random system of i.i.d. per-slot arrival streams."""
    while True:
        target = rng.uniform(*load)
        shares = rng.dirichlet(np.ones(K))
        classes = []
        for k in range(K):
            service = ServiceSpec(random_pmf(rng, 1, max_service))
            lam = target * shares[k] / service.mean
            cond = random_pmf(rng, 1, max_batch)
            q = lam / cond.mean
            if not 0 < q < 1:
                break
            law = Pmf((0,) + cond.values, (1.0 - q,) + tuple(q * x for x in cond.probs))
            classes.append((build_iid_stream(law), service))
        else:
            return SystemSpec(tuple(classes))
