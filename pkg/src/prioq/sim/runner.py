"""Independent replications, per-metric estimates and confidence intervals."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as st

from ..errors import ContractError, UnsupportedMetricError
from ..model import SystemSpec, require_valid
from .engine import ALIASES, DISCIPLINES, simulate
from .tables import build_tables

PER_CLASS_METRICS = ("W", "U_k", "H_pr", "Lq")
AGGREGATE_METRICS = ("U", "busy_mean", "busy_fact2")
METRICS = PER_CLASS_METRICS + AGGREGATE_METRICS


@dataclass(frozen=True)
class SimConfig:
    slots_per_replication: int = 1_000_000
    warmup_slots: int = 10_000
    replications: int = 20
    seed: int = 0
    discipline: str = "np"

    def __post_init__(self):
        object.__setattr__(self, "discipline", ALIASES.get(self.discipline, self.discipline))
        if self.discipline not in DISCIPLINES:
            raise ContractError(f"discipline must be one of {sorted(DISCIPLINES)}")
        if not self.slots_per_replication > self.warmup_slots >= 0:
            raise ContractError("need slots_per_replication > warmup_slots >= 0")
        if self.replications < 1:
            raise ContractError("need at least one replication")
        if not 0 <= self.seed < 2**64:
            raise ContractError("seed must be an unsigned 64-bit integer")


def class_generators(seed: int, rep: int, K: int) -> list[np.random.PCG64]:
    """One PCG64 stream per (replication, class), split from the root seed."""
    return [np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(rep, k))) for k in range(K)]


@dataclass
class ReplicationStats:
    """Raw sums from one replication over its post-warmup window."""

    window: int
    wait_sum: np.ndarray
    wait_n: np.ndarray
    queue_time: np.ndarray
    work_time: np.ndarray
    comp_sum: np.ndarray
    comp_n: np.ndarray
    x_time: float
    busy_n: int
    busy_sum: float
    busy_fact2: float
    invariant_violations: int
    waits: np.ndarray  # rows (class, arrival slot, wait) in service-start order, if recorded

    def metric(self, name: str, k: int | None = None) -> float:
        """Point value of a metric; ``k`` is the 1-based class for per-class metrics."""
        with np.errstate(invalid="ignore", divide="ignore"):
            if name == "U":
                return self.x_time / self.window
            if name == "busy_mean":
                return self.busy_sum / self.busy_n if self.busy_n else math.nan
            if name == "busy_fact2":
                return self.busy_fact2 / self.busy_n if self.busy_n else math.nan
            i = k - 1
            if name == "W":
                return float(self.wait_sum[i] / self.wait_n[i]) if self.wait_n[i] else math.nan
            if name == "U_k":
                return float(self.work_time[i] / self.window)
            if name == "Lq":
                return float(self.queue_time[i] / self.window)
            if name == "H_pr":
                return float(self.comp_sum[i] / self.comp_n[i]) if self.comp_n[i] else math.nan
        raise ContractError(f"unknown metric {name!r}")

    def served_rate(self, k: int) -> float:
        return float(self.wait_n[k - 1] / self.window)


def run_replication(
    system: SystemSpec,
    config: SimConfig,
    rep_index: int,
    record_waits: bool = False,
    check_invariant: bool = False,
    tables=None,
) -> ReplicationStats:
    tables = tables or build_tables(system)
    gens = class_generators(config.seed, rep_index, system.K)
    states = np.array([g.ctypes.state_address for g in gens], dtype=np.intp)
    out = simulate(
        DISCIPLINES[config.discipline],
        config.slots_per_replication,
        config.warmup_slots,
        states,
        tables,
        record_waits,
        check_invariant,
    )
    del gens  # states must outlive the kernel call
    return ReplicationStats(config.slots_per_replication - config.warmup_slots, **out)


def thread_count() -> int:
    env = os.environ.get("PRIOQ_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_replications(
    system: SystemSpec, config: SimConfig, threads: int | None = None, **kwargs
) -> list[ReplicationStats]:
    """All replications of ``config``, in replication order whatever the thread count."""
    require_valid(system)
    tables = build_tables(system)
    threads = threads or thread_count()
    job = lambda r: run_replication(system, config, r, tables=tables, **kwargs)  # noqa: E731
    if threads == 1 or config.replications == 1:
        return [job(r) for r in range(config.replications)]
    with ThreadPoolExecutor(max_workers=min(threads, config.replications)) as pool:
        return list(pool.map(job, range(config.replications)))


@dataclass
class SimEstimate:
    mean: float
    half_width_95: float | None
    replications: int
    values: list[float]

    @property
    def std_error(self) -> float | None:
        if self.replications < 2:
            return None
        return float(np.std(self.values, ddof=1) / math.sqrt(self.replications))

    def covers(self, value: float, n_se: float = 3.0) -> bool:
        se = self.std_error
        if se is None:
            return False
        return abs(self.mean - value) <= n_se * se

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "half_width_95": self.half_width_95,
            "std_error": self.std_error,
            "replications": self.replications,
            "values": list(self.values),
        }


def summarize(values) -> SimEstimate:
    """Between-replication mean with a Student-t 95% half-width."""
    v = [float(x) for x in values]
    n = len(v)
    mean = float(np.mean(v))
    if n < 2:
        return SimEstimate(mean, None, n, v)
    half = float(st.t.ppf(0.975, n - 1) * np.std(v, ddof=1) / math.sqrt(n))
    return SimEstimate(mean, half, n, v)


def check_metric(metric: str, discipline: str, k: int | None, K: int) -> None:
    if metric not in METRICS:
        raise ContractError(f"unknown metric {metric!r}; choose from {METRICS}")
    if metric == "H_pr" and discipline != "pr":
        raise UnsupportedMetricError("service completion time is only defined under 'pr'")
    if metric in PER_CLASS_METRICS and not (k is not None and 1 <= k <= K):
        raise ContractError(f"metric {metric!r} needs a class index in 1..{K}")


def estimate_from(reps, config: SimConfig, metric: str, k: int | None = None, K: int = 0):
    check_metric(metric, config.discipline, k, K or len(reps[0].wait_sum))
    return summarize(r.metric(metric, k) for r in reps)


def estimate(system: SystemSpec, config: SimConfig, metric: str, k: int | None = None) -> SimEstimate:
    """Run ``config`` and estimate one metric."""
    check_metric(metric, config.discipline, k, system.K)
    return estimate_from(run_replications(system, config), config, metric, k, system.K)


def estimate_all(system: SystemSpec, config: SimConfig, reps=None) -> dict[str, object]:
    """Every metric defined for the discipline, keyed ``"W[1]"``, ``"U"``, ..."""
    reps = reps if reps is not None else run_replications(system, config)
    out: dict[str, object] = {}
    for metric in PER_CLASS_METRICS:
        if metric == "H_pr" and config.discipline != "pr":
            continue
        for k in range(1, system.K + 1):
            out[f"{metric}[{k}]"] = estimate_from(reps, config, metric, k, system.K)
    for metric in AGGREGATE_METRICS:
        out[metric] = estimate_from(reps, config, metric, None, system.K)
    return out
