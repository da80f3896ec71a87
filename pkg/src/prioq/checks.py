"""Cross-validation suite: exact analytic identities and simulation coverage.

Identity checks must all pass.  Simulation checks are statistical: each one
asks whether the replication mean lies within three standard errors of the
analytic value, and the suite accepts a run when at least 95% of them do.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .analytic import single_class_unfinished, single_class_wait, system_moments
from .errors import ShapeMismatchError
from .model import SystemSpec
from .priority import (
    SystemReport,
    system_report,
    u_np_from_wait,
    u_np_mean,
    u_pr_from_wait,
    u_pr_mean,
)
from .sim.runner import SimConfig, estimate_from, run_replications, summarize
from .special import SHAPES, special_case_report

IDENTITY_TOL = 1e-10
EXACT_TOL = 1e-12
COVERAGE_SE = 3.0
MIN_PASS_FRACTION = 0.95
REPORT_FIELDS = ("W_pr", "W_np", "D_pr", "U_pr", "U_np", "H_pr_mean", "R_pr_mean")


def close(a: float, b: float, tol: float) -> bool:
    """``|a - b| <= tol``, scaled up for magnitudes above one."""
    return abs(a - b) <= tol * max(1.0, abs(b))


@dataclass
class Check:
    name: str
    kind: str  # "identity" or "simulation"
    value: float
    expected: float
    tolerance: float
    passed: bool

    @property
    def gap(self) -> float:
        return abs(self.value - self.expected)

    def to_dict(self) -> dict:
        return asdict(self) | {"gap": self.gap}


def identity(name: str, value: float, expected: float, tol: float = IDENTITY_TOL) -> Check:
    return Check(name, "identity", value, expected, tol, close(value, expected, tol))


@dataclass
class SuiteResult:
    checks: list[Check] = field(default_factory=list)

    def of_kind(self, kind: str) -> list[Check]:
        return [c for c in self.checks if c.kind == kind]

    @property
    def simulation_pass_fraction(self) -> float | None:
        sims = self.of_kind("simulation")
        return sum(c.passed for c in sims) / len(sims) if sims else None

    @property
    def passed(self) -> bool:
        if not all(c.passed for c in self.of_kind("identity")):
            return False
        frac = self.simulation_pass_fraction
        return frac is None or frac >= MIN_PASS_FRACTION

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "simulation_pass_fraction": self.simulation_pass_fraction,
            "checks": [c.to_dict() for c in self.checks],
        }


def _report_agreement(tag: str, got: SystemReport, ref: SystemReport) -> list[Check]:
    out = [
        identity(f"{tag} {name}", getattr(got, name), getattr(ref, name))
        for name in ("EU", "conservation_rhs", "f1", "f2")
    ]
    for g, r in zip(got.classes, ref.classes):
        out += [identity(f"{tag} {name}[{g.k}]", getattr(g, name), getattr(r, name)) for name in REPORT_FIELDS]
    return out


def identity_checks(system: SystemSpec) -> list[Check]:
    """Every exact relation between the analytic quantities of one system."""
    sm = system_moments(system)
    rep = system_report(system)
    K = system.K
    checks = [
        identity("conservation: sum rho_k W_np[k] = rhs", sum(c.rho * c.W_np for c in rep.classes), rep.conservation_rhs),
        identity(
            "conservation: rhs = E[U] - rho - sum rho_k E[eq H_k]",
            rep.conservation_rhs,
            rep.EU - rep.rho - sum(c.rho * c.eq_mean_H for c in rep.classes),
            EXACT_TOL,
        ),
        identity("busy cycle: f1 = 1/(1 - rho)", sm.f1, 1.0 / (1.0 - sm.rho_total), EXACT_TOL),
        identity("work: sum U_pr[k] = E[U]", sum(rep.field("U_pr")), rep.EU),
        identity("work: sum U_np[k] = E[U]", sum(rep.field("U_np")), rep.EU),
        identity("W_np[K] = W_pr[K]", rep.classes[-1].W_np, rep.classes[-1].W_pr),
    ]
    for c in rep.classes:
        k = c.k
        checks.append(identity(f"U_pr[{k}] two ways", u_pr_mean(system, k), u_pr_from_wait(system, k)))
        if k < K:
            checks.append(identity(f"U_np[{k}] two ways", u_np_mean(system, k), u_np_from_wait(system, k)))
            ok = c.W_np >= c.W_pr - IDENTITY_TOL
            checks.append(Check(f"W_np[{k}] >= W_pr[{k}]", "identity", c.W_np, c.W_pr, 0.0, ok))
    stream, service = system.classes[0]
    checks.append(identity("single-class reduction W_pr[1]", rep.classes[0].W_pr, single_class_wait(stream, service)))
    checks.append(identity("single-class reduction U_pr[1]", rep.classes[0].U_pr, single_class_unfinished(stream, service)))
    for shape in SHAPES:
        try:
            special = special_case_report(system, shape)
        except ShapeMismatchError:
            continue
        checks += _report_agreement(f"{shape} path", special, rep)
        if shape == "unit-service":
            checks += [identity(f"unit-service W_pr[{c.k}] = W_np[{c.k}]", c.W_pr, c.W_np) for c in special.classes]
    return checks


def coverage(name: str, est, expected: float) -> Check:
    se = est.std_error
    ok = se is not None and abs(est.mean - expected) <= COVERAGE_SE * se + EXACT_TOL
    return Check(name, "simulation", est.mean, expected, COVERAGE_SE * se if se is not None else math.nan, ok)


def simulation_checks(system: SystemSpec, slots: int, warmup: int, reps: int, seed: int) -> list[Check]:
    """Replication estimates under all three disciplines against the analytic means."""
    rep = system_report(system)
    checks = []
    for disc in ("pr", "np", "fcfs"):
        config = SimConfig(slots, warmup, reps, seed, disc)
        runs = run_replications(system, config)
        est = lambda metric, k=None: estimate_from(runs, config, metric, k, system.K)  # noqa: E731
        checks.append(coverage(f"sim {disc} U", est("U"), rep.EU))
        if disc == "fcfs":
            continue
        for c in rep.classes:
            checks.append(coverage(f"sim {disc} W[{c.k}]", est("W", c.k), c.W_pr if disc == "pr" else c.W_np))
            little = summarize(r.metric("Lq", c.k) - c.lam * r.metric("W", c.k) for r in runs)
            checks.append(coverage(f"sim {disc} Little[{c.k}]", little, 0.0))
        if disc == "pr":
            checks += [coverage(f"sim pr H_pr[{c.k}]", est("H_pr", c.k), c.H_pr_mean) for c in rep.classes]
            checks.append(coverage("sim busy-cycle mean", est("busy_mean"), rep.f1))
            checks.append(coverage("sim busy-cycle second factorial moment", est("busy_fact2"), rep.f2))
    return checks


def run_suite(
    system: SystemSpec,
    quick: bool = False,
    slots: int = 1_000_000,
    warmup: int = 10_000,
    reps: int = 20,
    seed: int = 0,
) -> SuiteResult:
    result = SuiteResult(identity_checks(system))
    if not quick:
        result.checks += simulation_checks(system, slots, warmup, reps, seed)
    return result
