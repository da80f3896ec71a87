"""Mean-value results for the preemptive-resume and nonpreemptive priority queues.

Classes are indexed ``1..K`` in these functions, class 1 having the highest
priority.  ``rho_plus[k]`` is the load of classes ``1..k`` with
``rho_plus[0] = 0``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .analytic import (
    check_stable,
    class_moments,
    cumulative_rho,
    system_moments,
)
from .errors import ContractError
from .model import SystemSpec


def _setup(system: SystemSpec, k: int):
    if not 1 <= k <= system.K:
        raise ContractError(f"class index must lie in 1..{system.K}, got {k}")
    moments = class_moments(system)
    return moments, cumulative_rho(moments)


def completion_time_mean(system: SystemSpec, k: int) -> float:
    """Mean span from the start of a class-k service to its completion under PR."""
    moments, rp = _setup(system, k)
    check_stable(rp[k - 1], f"classes 1..{k - 1}")
    h = moments[k - 1].mean_H
    return (h - rp[k - 1]) / (1.0 - rp[k - 1])


def remaining_service_mean(system: SystemSpec, k: int) -> float:
    """Mean remaining work of a class-k customer whose PR service is under way."""
    moments, rp = _setup(system, k)
    m = moments[k - 1]
    return m.mean_H / completion_time_mean(system, k) * (1.0 + m.eq_mean_H / (1.0 - rp[k - 1]))


def w_pr_mean(system: SystemSpec, k: int) -> float:
    """Mean waiting time of class k under preemptive-resume priority."""
    moments, rp = _setup(system, k)
    check_stable(rp[k], f"classes 1..{k}")
    hi, lo = rp[k], rp[k - 1]
    den = (1.0 - hi) * (1.0 - lo)
    top = moments[:k]
    m = moments[k - 1]
    return (
        sum(x.rho * x.eq_mean_H for x in top) / den
        + sum(x.rho * (hi - x.rho) for x in top) / (2.0 * den)
        + lo / (1.0 - lo)
        + sum(
            x.rho * (x.pi_on * x.rho * (1.0 + x.EtC) + x.mean_H * x.burst_excess) for x in top
        )
        / den
        + m.mean_H / (1.0 - lo) * m.burst_excess
        + m.pi_on * ((1.0 + m.rho / (1.0 - lo)) * (1.0 + m.EtC) - m.ELamTC / m.lam)
    )


def d_pr_mean(system: SystemSpec, k: int) -> float:
    """Mean sojourn time of class k under preemptive-resume priority."""
    return w_pr_mean(system, k) + completion_time_mean(system, k)


def u_pr_mean(system: SystemSpec, k: int) -> float:
    """Mean class-k unfinished work under preemptive-resume priority."""
    moments, rp = _setup(system, k)
    check_stable(rp[k], f"classes 1..{k}")
    hi, lo = rp[k], rp[k - 1]
    den = (1.0 - hi) * (1.0 - lo)
    top = moments[:k]
    m = moments[k - 1]
    r = m.rho
    return (
        r
        + r * sum(x.rho * x.eq_mean_H for x in top) / den
        + r * m.eq_mean_H / (1.0 - lo)
        + r * sum(x.rho * (hi - x.rho) for x in top) / (2.0 * den)
        + r * lo / (1.0 - lo)
        + r * sum(x.mean_H**2 * x.delta2 for x in top) / (2.0 * den)
        + m.mean_H**2 * m.delta2 / (2.0 * (1.0 - lo))
        + m.v0p * m.mean_H
    )


def u_pr_from_wait(system: SystemSpec, k: int) -> float:
    """Class-k PR unfinished work recovered from the mean wait through Little's law."""
    moments, rp = _setup(system, k)
    m = moments[k - 1]
    return m.rho * w_pr_mean(system, k) + m.rho * (1.0 + m.eq_mean_H / (1.0 - rp[k - 1]))


def _np_correction(moments, rp, k: int) -> float:
    """``sum_{l>k} rho_l E[tilde H_l] / ((1 - rho_k^+)(1 - rho_{k-1}^+))``"""
    lower = sum(x.rho * x.eq_mean_H for x in moments[k:])
    return lower / ((1.0 - rp[k]) * (1.0 - rp[k - 1]))


def w_np_mean(system: SystemSpec, k: int) -> float:
    """Mean waiting time of class k under nonpreemptive priority."""
    moments, rp = _setup(system, k)
    check_stable(rp[-1])
    return w_pr_mean(system, k) + _np_correction(moments, rp, k)


def u_np_mean(system: SystemSpec, k: int) -> float:
    """Mean class-k unfinished work under nonpreemptive priority.

    The lowest class takes whatever work the higher classes leave, since total
    unfinished work does not depend on the discipline.
    """
    moments, rp = _setup(system, k)
    check_stable(rp[-1])
    if k == system.K:
        total = system_moments(system).EU
        return total - sum(u_np_mean(system, j) for j in range(1, system.K))
    m = moments[k - 1]
    lo = rp[k - 1]
    return (
        u_pr_mean(system, k)
        - lo / (1.0 - lo) * m.rho * m.eq_mean_H
        + m.rho * _np_correction(moments, rp, k)
    )


def u_np_from_wait(system: SystemSpec, k: int) -> float:
    moments, _ = _setup(system, k)
    m = moments[k - 1]
    return m.rho * w_np_mean(system, k) + m.rho * (1.0 + m.eq_mean_H)


@dataclass
class ClassReport:
    k: int
    lam: float
    rho: float
    mean_H: float
    eq_mean_H: float
    W_pr: float
    W_np: float
    D_pr: float
    U_pr: float
    U_np: float
    H_pr_mean: float
    R_pr_mean: float


@dataclass
class SystemReport:
    rho: float
    EU: float
    conservation_rhs: float
    f1: float
    f2: float
    classes: list[ClassReport]

    def to_dict(self) -> dict:
        return asdict(self)

    def field(self, name: str) -> list[float]:
        return [getattr(c, name) for c in self.classes]


def system_report(system: SystemSpec) -> SystemReport:
    """Evaluate every per-class and aggregate quantity for a stable system."""
    sm = system_moments(system)
    rows = []
    for k, m in enumerate(sm.per_class, start=1):
        rows.append(
            ClassReport(
                k=k,
                lam=m.lam,
                rho=m.rho,
                mean_H=m.mean_H,
                eq_mean_H=m.eq_mean_H,
                W_pr=w_pr_mean(system, k),
                W_np=w_np_mean(system, k),
                D_pr=d_pr_mean(system, k),
                U_pr=u_pr_mean(system, k),
                U_np=u_np_mean(system, k),
                H_pr_mean=completion_time_mean(system, k),
                R_pr_mean=remaining_service_mean(system, k),
            )
        )
    return SystemReport(sm.rho_total, sm.EU, sm.conservation_rhs, sm.f1, sm.f2, rows)
