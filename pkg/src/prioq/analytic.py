"""Per-stream and system-wide moments: rates, active periods, unfinished work, busy cycles.

Everything here is a closed-form evaluation at ``z = 1``; no generating
function is ever represented as a function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ContractError, InstabilityError, ModelError
from .model import ArrivalStreamSpec, ServiceSpec, SystemSpec, require_valid

STABILITY_MARGIN = 1e-9


class _Resolvent:
    """LU factorization of ``I - T`` reused for left and right solves."""

    def __init__(self, T: np.ndarray):
        A = np.eye(T.shape[0]) - T
        with np.errstate(all="ignore"):
            self._lu = lu_factor(A, check_finite=True)
        if np.any(np.abs(np.diag(self._lu[0])) < 1e-300):
            raise ModelError("I - T is singular; the active period never ends")

    def right(self, b: np.ndarray) -> np.ndarray:
        """``(I - T)^{-1} b``"""
        return lu_solve(self._lu, b)

    def left(self, a: np.ndarray) -> np.ndarray:
        """``a (I - T)^{-1}``"""
        return lu_solve(self._lu, a, trans=1)


@lru_cache(maxsize=256)
def _resolvent(stream: ArrivalStreamSpec) -> _Resolvent:
    return _Resolvent(stream.T_probs)


def stationary_split(stream: ArrivalStreamSpec) -> tuple[float, np.ndarray]:
    """Stationary probability of the idle state and of each active state."""
    N = _resolvent(stream)
    aN = N.left(stream.alpha_probs)
    denom = 1.0 / (1.0 - stream.p) + aN.sum()
    return (1.0 / (1.0 - stream.p)) / denom, aN / denom


def arrival_rate(stream: ArrivalStreamSpec) -> float:
    """Mean number of customers per slot."""
    N = _resolvent(stream)
    aN = N.left(stream.alpha_probs)
    denom = 1.0 / (1.0 - stream.p) + aN.sum()
    T1e = stream.T_moment(1).sum(axis=1)
    return float((stream.alpha_moment(1).sum() + aN @ T1e) / denom)


@dataclass(frozen=True)
class ActivePeriodMoments:
    EC: float
    ELam: float
    ECLam: float
    EtC: float
    ELamTC: float
    EtLam: float


def active_period_moments(stream: ArrivalStreamSpec) -> ActivePeriodMoments:
    """Moments of the active-period length ``C`` and of its arrivals ``Lambda``.

    ``EtC`` and ``EtLam`` are equilibrium means; ``ELamTC`` is the mean number
    of arrivals during the forward recurrence time of an active period.
    """
    N = _resolvent(stream)
    e = np.ones(stream.M)
    T = stream.T_probs
    a1 = stream.alpha_moment(1)
    a2 = stream.alpha_moment(2)
    T1 = stream.T_moment(1)
    T2 = stream.T_moment(2)

    aN = N.left(stream.alpha_probs)
    Ne = N.right(e)
    T1e = T1 @ e
    NT1e = N.right(T1e)

    EC = aN @ e
    ELam = a1 @ e + aN @ T1e
    ECLam = a1 @ Ne + aN @ T1 @ Ne + aN @ NT1e
    EtC = aN @ N.right(T @ e) / EC
    ELamTC = aN @ NT1e / EC
    EtLam = (a2 @ e + 2.0 * a1 @ NT1e + 2.0 * aN @ T1 @ NT1e + aN @ T2 @ e) / (2.0 * ELam)
    return ActivePeriodMoments(
        float(EC), float(ELam), float(ECLam), float(EtC), float(ELamTC), float(EtLam)
    )


@dataclass(frozen=True)
class StreamMoments:
    """Every per-class scalar the mean-value formulas consume."""

    pi0: float
    pi1: tuple[float, ...]
    pi_on: float
    lam: float
    rho: float
    mean_H: float
    eq_mean_H: float
    EC: float
    ELam: float
    ECLam: float
    EtC: float
    ELamTC: float
    EtLam: float
    delta2: float
    v0p: float

    @property
    def burst_excess(self) -> float:
        """``E[tilde Lambda] - pi_on E[C Lambda] / E[C]``, recurring in every waiting formula."""
        return self.EtLam - self.pi_on * self.ECLam / self.EC


@lru_cache(maxsize=256)
def stream_moments(stream: ArrivalStreamSpec, service: ServiceSpec) -> StreamMoments:
    pi0, pi1 = stationary_split(stream)
    ap = active_period_moments(stream)
    pi_on = float(pi1.sum())
    lam = arrival_rate(stream)
    mean_H = service.mean
    delta2 = (
        2.0 * lam * ap.EtLam
        - 2.0 * lam * pi_on * ap.ECLam / ap.EC
        + 2.0 * lam**2 * pi_on * (1.0 + ap.EtC)
    )
    v0p = lam * pi_on * (1.0 + ap.EtC) - pi_on * ap.ELamTC
    return StreamMoments(
        pi0=float(pi0),
        pi1=tuple(float(x) for x in pi1),
        pi_on=pi_on,
        lam=lam,
        rho=lam * mean_H,
        mean_H=mean_H,
        eq_mean_H=service.eq_mean,
        EC=ap.EC,
        ELam=ap.ELam,
        ECLam=ap.ECLam,
        EtC=ap.EtC,
        ELamTC=ap.ELamTC,
        EtLam=ap.EtLam,
        delta2=float(delta2),
        v0p=float(v0p),
    )


@dataclass(frozen=True)
class SystemMoments:
    rho_total: float
    rho_plus: tuple[float, ...]
    EU: float
    conservation_rhs: float
    f1: float
    f2: float
    per_class: tuple[StreamMoments, ...]


def check_stable(rho: float, what: str = "system") -> None:
    if not rho < 1.0 - STABILITY_MARGIN:
        raise InstabilityError(f"{what} is unstable: rho = {rho:.12g} is not below 1", rho)


def class_moments(system: SystemSpec) -> tuple[StreamMoments, ...]:
    require_valid(system)
    return tuple(stream_moments(s, h) for s, h in system.classes)


def cumulative_rho(moments) -> tuple[float, ...]:
    """``(rho_0^+, rho_1^+, ..., rho_K^+)`` with ``rho_0^+ = 0``."""
    out = [0.0]
    for m in moments:
        out.append(out[-1] + m.rho)
    return tuple(out)


def _unfinished(moments) -> float:
    rho = math.fsum(m.rho for m in moments)
    check_stable(rho)
    s = 1.0 - rho
    return (
        rho
        + sum(m.rho * m.eq_mean_H for m in moments) / s
        + sum(m.rho * (rho - m.rho) for m in moments) / (2.0 * s)
        + sum(m.mean_H**2 * m.delta2 for m in moments) / (2.0 * s)
        + sum(m.mean_H * m.v0p for m in moments)
    )


def total_unfinished_mean(system: SystemSpec) -> float:
    """Mean stationary unfinished work, for any work-conserving discipline."""
    return _unfinished(class_moments(system))


def _conservation(moments) -> float:
    rho = math.fsum(m.rho for m in moments)
    check_stable(rho)
    s = 1.0 - rho
    return (
        rho * sum(m.rho * m.eq_mean_H for m in moments) / s
        + sum(m.rho * (rho - m.rho) for m in moments) / (2.0 * s)
        + sum(m.rho * m.mean_H * m.burst_excess for m in moments) / s
        + sum(m.pi_on * m.rho * (1.0 + m.rho / s) * (1.0 + m.EtC) for m in moments)
        - sum(m.pi_on * m.mean_H * m.ELamTC for m in moments)
    )


def conservation_rhs(system: SystemSpec) -> float:
    """``sum_k rho_k E[W_k]``, identical for every nonpreemptive work-conserving discipline."""
    return _conservation(class_moments(system))


def _busy_cycle(moments) -> tuple[float, float]:
    rho = math.fsum(m.rho for m in moments)
    check_stable(rho, "subsystem")
    s = 1.0 - rho
    spread = sum(
        2.0 * m.rho * m.eq_mean_H + m.rho * (rho - m.rho) + m.mean_H**2 * m.delta2
        for m in moments
    )
    return 1.0 / s, 2.0 * rho / s**2 + spread / s**3


def busy_cycle_moments(system: SystemSpec, top_k: int | None = None) -> tuple[float, float]:
    """First two factorial moments of the busy cycle of the system fed by classes ``1..top_k``."""
    top_k = system.K if top_k is None else top_k
    if not 1 <= top_k <= system.K:
        raise ContractError(f"top_k must lie in 1..{system.K}, got {top_k}")
    return _busy_cycle(class_moments(system)[:top_k])


def single_class_unfinished(stream: ArrivalStreamSpec, service: ServiceSpec) -> float:
    """Mean unfinished work of a queue fed by one stream, evaluated from its own display."""
    m = class_moments(SystemSpec.of((stream, service)))[0]
    rho = m.rho
    check_stable(rho)
    s = 1.0 - rho
    return (
        rho
        + rho * m.mean_H / s * (m.eq_mean_H / m.mean_H + m.burst_excess)
        + rho * m.pi_on * ((1.0 + m.EtC) / s - m.ELamTC / m.lam)
    )


def single_class_wait(stream: ArrivalStreamSpec, service: ServiceSpec) -> float:
    """Mean waiting time of a queue fed by one stream."""
    m = class_moments(SystemSpec.of((stream, service)))[0]
    rho = m.rho
    check_stable(rho)
    s = 1.0 - rho
    return m.mean_H / s * (m.lam * m.eq_mean_H + m.burst_excess) + m.pi_on * (
        (1.0 + m.EtC) / s - m.ELamTC / m.lam
    )


@lru_cache(maxsize=128)
def system_moments(system: SystemSpec) -> SystemMoments:
    per_class = class_moments(system)
    rho = math.fsum(m.rho for m in per_class)
    check_stable(rho)
    f1, f2 = _busy_cycle(per_class)
    return SystemMoments(
        rho_total=rho,
        rho_plus=cumulative_rho(per_class),
        EU=_unfinished(per_class),
        conservation_rhs=_conservation(per_class),
        f1=f1,
        f2=f2,
        per_class=per_class,
    )
