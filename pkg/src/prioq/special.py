"""Direct evaluation of the reduced formulas for three special model shapes.

This path shares no waiting-time code with :mod:`prioq.priority`, so the two
can be checked against each other:

``unit-service``
    every service takes exactly one slot; preemption never happens.
``iid``
    each stream's per-slot arrival counts are i.i.d.
``iid-active``
    during active periods the batch law does not depend on the chain state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import check_stable, class_moments
from .errors import ContractError, ShapeMismatchError
from .model import ArrivalStreamSpec, Pmf, SystemSpec, equilibrium_mean, factorial_moment
from .priority import ClassReport, SystemReport

SHAPES = ("unit-service", "iid", "iid-active")


@dataclass(frozen=True)
class _Scalars:
    """Per-class inputs of the reduced formulas."""

    lam: float
    mean_H: float
    eq_mean_H: float
    delta2: float

    @property
    def rho(self) -> float:
        return self.lam * self.mean_H


def _uniform_batch(stream: ArrivalStreamSpec, k: int) -> Pmf:
    laws = {e.batch for _, e in stream.active_entries() if e.probability > 0}
    if len(laws) != 1:
        raise ShapeMismatchError(
            f"class {k}: batch law differs across active transitions ({len(laws)} distinct laws)"
        )
    return laws.pop()


def _check_iid(stream: ArrivalStreamSpec, k: int) -> Pmf:
    """Return the conditional law of A given A >= 1 for an i.i.d. stream."""
    batch = _uniform_batch(stream, k)
    if stream.M != 1 or not math.isclose(stream.T_probs[0, 0], 1.0 - stream.p, abs_tol=1e-12):
        raise ShapeMismatchError(
            f"class {k}: not an i.i.d. stream (needs one active state with T = 1 - p)"
        )
    return batch


def _completion(mean_H: float, lo: float) -> float:
    return (mean_H - lo) / (1.0 - lo)


def _remaining(mean_H: float, eq_mean_H: float, lo: float) -> float:
    return mean_H / _completion(mean_H, lo) * (1.0 + eq_mean_H / (1.0 - lo))


def _assemble(scalars, w_pr, rhs, np_equals_pr=False) -> SystemReport:
    rp = [0.0]
    for s in scalars:
        rp.append(rp[-1] + s.rho)
    rho = rp[-1]
    check_stable(rho)
    rows = []
    for k, s in enumerate(scalars, start=1):
        lo, hi = rp[k - 1], rp[k]
        lower = sum(x.rho * x.eq_mean_H for x in scalars[k:])
        w_np = w_pr[k - 1] if np_equals_pr else w_pr[k - 1] + lower / ((1.0 - hi) * (1.0 - lo))
        rows.append(
            ClassReport(
                k=k,
                lam=s.lam,
                rho=s.rho,
                mean_H=s.mean_H,
                eq_mean_H=s.eq_mean_H,
                W_pr=w_pr[k - 1],
                W_np=w_np,
                D_pr=w_pr[k - 1] + _completion(s.mean_H, lo),
                U_pr=s.rho * w_pr[k - 1] + s.rho * (1.0 + s.eq_mean_H / (1.0 - lo)),
                U_np=s.rho * w_np + s.rho * (1.0 + s.eq_mean_H),
                H_pr_mean=_completion(s.mean_H, lo),
                R_pr_mean=_remaining(s.mean_H, s.eq_mean_H, lo),
            )
        )
    eu = rhs + rho + sum(s.rho * s.eq_mean_H for s in scalars)
    spread = sum(
        2.0 * s.rho * s.eq_mean_H + s.rho * (rho - s.rho) + s.mean_H**2 * s.delta2
        for s in scalars
    )
    f1 = 1.0 / (1.0 - rho)
    f2 = 2.0 * rho / (1.0 - rho) ** 2 + spread / (1.0 - rho) ** 3
    return SystemReport(rho, eu, rhs, f1, f2, rows)


def _unit_service(system: SystemSpec) -> SystemReport:
    for k, (_, service) in enumerate(system.classes, start=1):
        if service.pmf.values != (1,):
            raise ShapeMismatchError(f"class {k}: service time is not the constant one slot")
    ms = class_moments(system)
    scalars = [_Scalars(m.lam, 1.0, 0.0, m.delta2) for m in ms]
    rho = math.fsum(m.rho for m in ms)
    check_stable(rho)
    s = 1.0 - rho
    rhs = (
        sum(m.rho * (rho - m.rho) for m in ms) / (2.0 * s)
        + sum(m.rho * (m.EtLam - m.pi_on * m.ECLam / m.EC) for m in ms) / s
        + sum(m.pi_on * m.rho * (1.0 + m.rho / s) * (1.0 + m.EtC) for m in ms)
        - sum(m.pi_on * m.ELamTC for m in ms)
    )
    waits = []
    rp = 0.0
    for k, m in enumerate(ms, start=1):
        lo, hi = rp, rp + m.rho
        den = (1.0 - hi) * (1.0 - lo)
        top = ms[:k]
        excess = m.EtLam - m.pi_on * m.ECLam / m.EC
        waits.append(
            sum(
                x.rho
                * (x.pi_on * x.rho * (1.0 + x.EtC) + x.EtLam - x.pi_on * x.ECLam / x.EC)
                for x in top
            )
            / den
            + sum(x.rho * (hi - x.rho) for x in top) / (2.0 * den)
            + (lo + excess) / (1.0 - lo)
            + m.pi_on * ((1.0 + m.rho / (1.0 - lo)) * (1.0 + m.EtC) - m.ELamTC / m.lam)
        )
        rp = hi
    return _assemble(scalars, waits, rhs, np_equals_pr=True)


def _iid(system: SystemSpec) -> SystemReport:
    scalars, eq_A = [], []
    for k, (stream, service) in enumerate(system.classes, start=1):
        positive = _check_iid(stream, k)
        a0 = stream.p
        lam = (1.0 - a0) * positive.mean
        second = (1.0 - a0) * factorial_moment(positive, 2)
        eq_A.append(second / (2.0 * lam))
        scalars.append(_Scalars(lam, service.mean, service.eq_mean, second))
    rho = math.fsum(s.rho for s in scalars)
    check_stable(rho)
    s1 = 1.0 - rho
    rhs = (
        rho / s1 * sum(s.rho * s.eq_mean_H for s in scalars)
        + sum(s.rho * (rho - s.rho) for s in scalars) / (2.0 * s1)
        + sum(s.rho * s.mean_H * ea for s, ea in zip(scalars, eq_A)) / s1
    )
    waits = []
    rp = 0.0
    for k, s in enumerate(scalars, start=1):
        lo, hi = rp, rp + s.rho
        den = (1.0 - hi) * (1.0 - lo)
        top = list(zip(scalars[:k], eq_A[:k]))
        waits.append(
            sum(x.rho * x.eq_mean_H for x, _ in top) / den
            + sum(x.rho * (hi - x.rho + 2.0 * x.mean_H * ea) for x, ea in top) / (2.0 * den)
            + (lo + s.mean_H * eq_A[k - 1]) / (1.0 - lo)
        )
        rp = hi
    return _assemble(scalars, waits, rhs)


def _phase_type_moments(stream: ArrivalStreamSpec) -> tuple[float, float]:
    """Mean active-period length and its equilibrium mean, from the phase-type law."""
    a = stream.alpha_probs
    T = stream.T_probs
    I = np.eye(stream.M)
    x = np.linalg.solve((I - T).T, a)  # a (I-T)^-1
    mean = x.sum()
    y = np.linalg.solve((I - T).T, x @ T)  # a T (I-T)^-2
    return float(mean), float(y.sum() / mean)


def _iid_active(system: SystemSpec) -> SystemReport:
    scalars, Ap, eq_Ap, eq_C = [], [], [], []
    for k, (stream, service) in enumerate(system.classes, start=1):
        batch = _uniform_batch(stream, k)
        EC, EtC = _phase_type_moments(stream)
        on = EC / (1.0 / (1.0 - stream.p) + EC)
        a = batch.mean
        at = equilibrium_mean(batch)
        lam = on * a
        delta2 = 2.0 * lam * (at + a * EtC) - 2.0 * lam**2 * (2.0 * EtC + 1.0) + 2.0 * lam**3 / a * (
            1.0 + EtC
        )
        scalars.append(_Scalars(lam, service.mean, service.eq_mean, delta2))
        Ap.append(a)
        eq_Ap.append(at)
        eq_C.append(EtC)
    rho = math.fsum(s.rho for s in scalars)
    check_stable(rho)
    s1 = 1.0 - rho
    rows = list(zip(scalars, Ap, eq_Ap, eq_C))
    rhs = (
        rho * sum(s.rho * s.eq_mean_H for s in scalars) / s1
        + sum(s.rho * (2.0 * s.mean_H * (at - a) + 2.0 - rho + s.rho) for s, a, at, _ in rows)
        / (2.0 * s1)
        + sum(
            s.rho * (s.mean_H * a - 1.0 + rho - s.rho) * (1.0 - s.lam / a) * (1.0 + c)
            for s, a, _, c in rows
        )
        / s1
    )
    waits = []
    rp = 0.0
    for k, (s, a, at, c) in enumerate(rows, start=1):
        lo, hi = rp, rp + s.rho
        den = (1.0 - hi) * (1.0 - lo)
        top = rows[:k]
        waits.append(
            sum(x.rho * x.eq_mean_H for x, *_ in top) / den
            + sum(x.rho * (2.0 * x.mean_H * (xt - xa) + hi + x.rho) for x, xa, xt, _ in top)
            / (2.0 * den)
            + sum(
                x.rho * (x.mean_H * xa - x.rho) * (1.0 - x.lam / xa) * (1.0 + xc)
                for x, xa, _, xc in top
            )
            / den
            + (s.mean_H * (at - a) + 1.0 + s.rho) / (1.0 - lo)
            + (s.mean_H * a - 1.0 + lo - s.rho) * (1.0 - s.lam / a) * (1.0 + c) / (1.0 - lo)
        )
        rp = hi
    return _assemble(scalars, waits, rhs)


def special_case_report(system: SystemSpec, which: str) -> SystemReport:
    """Report for a system of the named special shape, from the reduced formulas."""
    handlers = {"unit-service": _unit_service, "iid": _iid, "iid-active": _iid_active}
    if which not in handlers:
        raise ContractError(f"unknown special case {which!r}; choose from {SHAPES}")
    class_moments(system)
    return handlers[which](system)
