"""Input model: mass functions, service laws, arrival streams and systems.

An arrival stream is a finite Markov chain on ``{0, 1, ..., M}`` where state
0 is the idle state.  The idle state repeats with probability ``p`` and
otherwise jumps to active state ``j`` with probability ``alpha[j]``.  Active
states move among themselves according to the substochastic matrix ``T``;
the row deficit of ``T`` is the probability of returning to idle.  Every
transition into an active state delivers a batch of at least one customer,
drawn from the batch law attached to that transition.  Transitions into the
idle state deliver nothing.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractError, DegenerateInputError, ModelError

STOCHASTIC_TOL = 1e-12
IDENTITY_TOL = 1e-10
GEOMETRIC_TAIL = 1e-14
CONDITION_WARN = 1e12


@dataclass(frozen=True)
class Pmf:
    """Probability mass function with finite support on nonnegative integers."""

    values: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        probs = tuple(float(q) for q in self.probs)
        if any(v != w for v, w in zip(values, self.values)):
            raise ContractError("pmf support values must be integers")
        if len(values) != len(probs) or not values:
            raise ContractError("pmf needs equally many values and probs (at least one)")
        if values[0] < 0:
            raise ContractError("pmf support must be nonnegative")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ContractError("pmf support values must be strictly increasing")
        if any(q < 0 or q > 1 or math.isnan(q) for q in probs):
            raise ContractError("pmf probabilities must lie in [0, 1]")
        total = math.fsum(probs)
        if abs(total - 1.0) > STOCHASTIC_TOL:
            raise ContractError(f"pmf probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, value: int) -> Pmf:
        return cls((value,), (1.0,))

    @classmethod
    def from_mapping(cls, mapping) -> Pmf:
        items = sorted(mapping.items())
        return cls(tuple(v for v, _ in items), tuple(q for _, q in items))

    @classmethod
    def bernoulli(cls, q: float) -> Pmf:
        """Mass ``q`` at 1 and ``1 - q`` at 0."""
        return cls((0, 1), (1.0 - q, q))

    @classmethod
    def geometric(cls, ratio: float, start: int = 1, tail: float = GEOMETRIC_TAIL) -> Pmf:
        """Geometric law ``(1 - r) r^(n - start)`` on ``{start, start+1, ...}``.

        The support is cut where the remaining tail mass drops below ``tail``
        and the kept mass is renormalized.
        """
        if not 0.0 <= ratio < 1.0:
            raise ContractError("geometric ratio must lie in [0, 1)")
        if ratio == 0.0:
            return cls.point(start)
        n = max(1, math.ceil(math.log(tail) / math.log(ratio)))
        weights = (1.0 - ratio) * ratio ** np.arange(n)
        weights /= weights.sum()
        return cls(tuple(range(start, start + n)), tuple(weights))

    @property
    def array_values(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    @property
    def array_probs(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @property
    def min_value(self) -> int:
        """Smallest support value carrying positive mass."""
        return next(v for v, q in zip(self.values, self.probs) if q > 0)

    def prob(self, value: int) -> float:
        try:
            return self.probs[self.values.index(value)]
        except ValueError:
            return 0.0

    @property
    def mean(self) -> float:
        return factorial_moment(self, 1)

    def conditional_positive(self) -> Pmf:
        """Law of ``V`` given ``V >= 1``."""
        keep = [(v, q) for v, q in zip(self.values, self.probs) if v >= 1]
        mass = math.fsum(q for _, q in keep)
        if mass <= 0:
            raise DegenerateInputError("no mass on positive values")
        return Pmf(tuple(v for v, _ in keep), tuple(q / mass for _, q in keep))

    def to_dict(self) -> dict:
        return {"values": list(self.values), "probs": list(self.probs)}

    @classmethod
    def from_dict(cls, data: dict) -> Pmf:
        return cls(tuple(data["values"]), tuple(data["probs"]))


def factorial_moment(pmf: Pmf, order: int) -> float:
    """``E[V]`` for order 1, ``E[V(V-1)]`` for order 2."""
    if order not in (1, 2):
        raise ContractError(f"factorial moment order must be 1 or 2, got {order!r}")
    v = pmf.array_values.astype(float)
    weights = v if order == 1 else v * (v - 1.0)
    return float(np.dot(weights, pmf.array_probs))


def equilibrium_mean(pmf: Pmf) -> float:
    """Mean of the equilibrium (forward recurrence) variable, ``E[F(F-1)] / (2 E[F])``."""
    m1 = factorial_moment(pmf, 1)
    if m1 <= 0:
        raise DegenerateInputError("equilibrium mean needs a positive mean")
    return factorial_moment(pmf, 2) / (2.0 * m1)


@dataclass(frozen=True)
class ServiceSpec:
    """Service-time law in slots; every customer needs at least one slot."""

    pmf: Pmf

    @property
    def mean(self) -> float:
        return factorial_moment(self.pmf, 1)

    @property
    def second_factorial(self) -> float:
        return factorial_moment(self.pmf, 2)

    @property
    def eq_mean(self) -> float:
        return equilibrium_mean(self.pmf)

    @classmethod
    def deterministic(cls, slots: int) -> ServiceSpec:
        return cls(Pmf.point(slots))


@dataclass(frozen=True)
class TransitionEntry:
    """One transition of an arrival chain: its probability and batch law."""

    probability: float
    batch: Pmf = field(default_factory=lambda: Pmf.point(1))


@dataclass(frozen=True)
class ArrivalStreamSpec:
    """Batch Markovian arrival stream with a geometric idle period.

    ``alpha`` is a probability vector over the active states (it already
    excludes the factor ``1 - p``).  Exit probabilities to the idle state
    are the row deficits of ``T``.
    """

    p: float
    alpha: tuple[TransitionEntry, ...]
    T: tuple[tuple[TransitionEntry, ...], ...]

    def __post_init__(self):
        alpha = tuple(self.alpha)
        T = tuple(tuple(row) for row in self.T)
        m = len(alpha)
        if len(T) != m or any(len(row) != m for row in T):
            raise ModelError(f"T must be {m}x{m} to match alpha of length {m}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", T)

    @property
    def M(self) -> int:
        return len(self.alpha)

    @cached_property
    def alpha_probs(self) -> np.ndarray:
        return np.array([e.probability for e in self.alpha], dtype=float)

    @cached_property
    def T_probs(self) -> np.ndarray:
        return np.array([[e.probability for e in row] for row in self.T], dtype=float).reshape(
            self.M, self.M
        )

    @cached_property
    def exit_probs(self) -> np.ndarray:
        return 1.0 - self.T_probs.sum(axis=1)

    def alpha_moment(self, order: int) -> np.ndarray:
        """Derivative of ``alpha(z)`` at ``z = 1``: probability times batch factorial moment."""
        return np.array([e.probability * factorial_moment(e.batch, order) for e in self.alpha])

    def T_moment(self, order: int) -> np.ndarray:
        return np.array(
            [[e.probability * factorial_moment(e.batch, order) for e in row] for row in self.T]
        ).reshape(self.M, self.M)

    def full_matrix(self) -> np.ndarray:
        """The ``(M+1) x (M+1)`` transition matrix of the underlying chain."""
        m = self.M
        P = np.empty((m + 1, m + 1))
        P[0, 0] = self.p
        P[0, 1:] = (1.0 - self.p) * self.alpha_probs
        P[1:, 0] = self.exit_probs
        P[1:, 1:] = self.T_probs
        return P

    def arrival_moment_matrix(self) -> np.ndarray:
        """Entrywise mean batch contribution of each transition."""
        m = self.M
        A1 = np.zeros((m + 1, m + 1))
        A1[0, 1:] = (1.0 - self.p) * self.alpha_moment(1)
        A1[1:, 1:] = self.T_moment(1)
        return A1

    def active_entries(self):
        """Yield ``(label, entry)`` for every transition into an active state."""
        for j, e in enumerate(self.alpha):
            yield f"alpha[{j}]", e
        for i, row in enumerate(self.T):
            for j, e in enumerate(row):
                yield f"T[{i}][{j}]", e


class TrafficClass(NamedTuple):
    stream: ArrivalStreamSpec
    service: ServiceSpec


@dataclass(frozen=True)
class SystemSpec:
    """K traffic classes; position in ``classes`` is the priority (0 = highest)."""

    classes: tuple[TrafficClass, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "classes", tuple(TrafficClass(*c) for c in self.classes)
        )

    @classmethod
    def of(cls, *pairs) -> SystemSpec:
        return cls(tuple(pairs))

    @property
    def K(self) -> int:
        return len(self.classes)

    def subsystem(self, top_k: int) -> SystemSpec:
        """System restricted to the ``top_k`` highest-priority classes."""
        if not 1 <= top_k <= self.K:
            raise ContractError(f"top_k must lie in 1..{self.K}, got {top_k}")
        return SystemSpec(self.classes[:top_k])

    def with_class(self, index: int, stream=None, service=None) -> SystemSpec:
        old = self.classes[index]
        new = TrafficClass(stream or old.stream, service or old.service)
        return SystemSpec(self.classes[:index] + (new,) + self.classes[index + 1 :])


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    findings: tuple[str, ...]
    warnings: tuple[str, ...]
    rho: float | None
    class_rho: tuple[float, ...]

    def __str__(self):
        head = "valid" if self.valid else "invalid"
        lines = [f"model {head}; rho = {self.rho!r}"]
        lines += [f"  error: {f}" for f in self.findings]
        lines += [f"  warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _reachable(adj: np.ndarray, start: int) -> set[int]:
    seen = {start}
    todo = deque([start])
    while todo:
        i = todo.popleft()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                todo.append(int(j))
    return seen


def is_irreducible(P: np.ndarray) -> bool:
    adj = P > 0
    n = P.shape[0]
    return len(_reachable(adj, 0)) == n and len(_reachable(adj.T, 0)) == n


def stream_findings(stream: ArrivalStreamSpec, tag: str = "") -> tuple[list[str], list[str]]:
    """Structural checks on one stream; returns (errors, warnings)."""
    errors: list[str] = []
    warnings: list[str] = []
    if stream.M < 1:
        return [f"{tag}stream needs at least one active state"], warnings
    if not 0.0 <= stream.p < 1.0:
        errors.append(f"{tag}idle self-probability p={stream.p!r} not in [0, 1)")
    a = stream.alpha_probs
    T = stream.T_probs
    if np.any(a < 0) or np.any(a > 1):
        errors.append(f"{tag}alpha entries must lie in [0, 1]")
    if abs(math.fsum(a) - 1.0) > STOCHASTIC_TOL:
        errors.append(f"{tag}row 0 does not sum to 1 (alpha sums to {math.fsum(a)!r})")
    if np.any(T < 0) or np.any(T > 1):
        errors.append(f"{tag}T entries must lie in [0, 1]")
    exits = stream.exit_probs
    if np.any(exits < -STOCHASTIC_TOL):
        rows = [int(i) + 1 for i in np.flatnonzero(exits < -STOCHASTIC_TOL)]
        errors.append(f"{tag}rows {rows} of T sum to more than 1")
    if np.all(np.abs(exits) <= STOCHASTIC_TOL):
        errors.append(f"{tag}(I-T)e = 0: no active state can exit to idle")
    for label, entry in stream.active_entries():
        if entry.probability > 0 and entry.batch.min_value < 1:
            errors.append(
                f"{tag}{label} targets an active state but its batch law has mass at 0 "
                "(every active slot must carry at least one arrival)"
            )
    if not errors:
        if not is_irreducible(stream.full_matrix()):
            errors.append(f"{tag}transition matrix is reducible")
        else:
            radius = float(np.max(np.abs(np.linalg.eigvals(T)))) if T.size else 0.0
            if radius >= 1.0 - STOCHASTIC_TOL:
                errors.append(f"{tag}spectral radius of T is {radius!r} (needs < 1)")
            else:
                cond = np.linalg.cond(np.eye(stream.M) - T)
                if cond > CONDITION_WARN:
                    warnings.append(f"{tag}I-T is ill-conditioned (condition number {cond:.3g})")
    return errors, warnings


@lru_cache(maxsize=256)
def validate_system(spec: SystemSpec) -> ValidationReport:
    """Check every model assumption and compute the traffic intensities.

    Never raises for a semantically invalid model; the report carries the
    findings.
    """
    from .analytic import STABILITY_MARGIN, arrival_rate

    errors: list[str] = []
    warnings: list[str] = []
    class_rho: list[float] = []
    if spec.K < 1:
        errors.append("system needs at least one class")
    for k, (stream, service) in enumerate(spec.classes, start=1):
        tag = f"class {k}: "
        e, w = stream_findings(stream, tag)
        errors += e
        warnings += w
        if service.pmf.min_value < 1:
            errors.append(f"{tag}service times must be at least one slot")
        if not e:
            class_rho.append(arrival_rate(stream) * service.mean)
    rho = math.fsum(class_rho) if len(class_rho) == spec.K and spec.K else None
    if rho is not None and rho >= 1.0 - STABILITY_MARGIN:
        errors.append(f"total traffic intensity rho = {rho:.6g} is not below 1")
    return ValidationReport(not errors, tuple(errors), tuple(warnings), rho, tuple(class_rho))


def require_valid(spec: SystemSpec) -> ValidationReport:
    report = validate_system(spec)
    if not report.valid:
        structural = [f for f in report.findings if not f.startswith("total traffic")]
        if structural:
            raise ModelError("invalid model:\n  " + "\n  ".join(report.findings), report.findings)
    return report


def build_iid_stream(batch_pmf: Pmf) -> ArrivalStreamSpec:
    """Stream whose per-slot arrival counts are i.i.d. with law ``batch_pmf``."""
    a0 = batch_pmf.prob(0)
    if not 0.0 < a0 < 1.0:
        raise DegenerateInputError(
            f"i.i.d. stream needs mass at 0 strictly between 0 and 1, got {a0!r}"
        )
    positive = batch_pmf.conditional_positive()
    return ArrivalStreamSpec(
        p=a0,
        alpha=(TransitionEntry(1.0, positive),),
        T=((TransitionEntry(1.0 - a0, positive),),),
    )


def build_iid_active_stream(
    p: float, alpha_probs: Sequence[float], T_probs, batch_pmf: Pmf
) -> ArrivalStreamSpec:
    """Stream whose batch law is the same on every transition into an active state."""
    if batch_pmf.min_value < 1:
        raise ModelError("batch law has mass at 0, but every active slot must carry at least one arrival")
    a = np.asarray(alpha_probs, dtype=float)
    T = np.asarray(T_probs, dtype=float)
    if a.ndim != 1 or T.shape != (a.size, a.size):
        raise ContractError(f"alpha of length {a.size} needs a {a.size}x{a.size} T")
    return ArrivalStreamSpec(
        p=float(p),
        alpha=tuple(TransitionEntry(float(q), batch_pmf) for q in a),
        T=tuple(tuple(TransitionEntry(float(q), batch_pmf) for q in row) for row in T),
    )


# -- model file (JSON) -------------------------------------------------------


def _entry_from_dict(data: dict) -> TransitionEntry:
    prob = float(data["prob"])
    if "batch" in data:
        return TransitionEntry(prob, Pmf.from_dict(data["batch"]))
    if prob > 0:
        raise ModelError("transition into an active state with positive probability needs a batch")
    return TransitionEntry(prob)


def _entry_to_dict(entry: TransitionEntry) -> dict:
    return {"prob": entry.probability, "batch": entry.batch.to_dict()}


def system_from_dict(data: dict) -> SystemSpec:
    try:
        classes = data["classes"]
        if not isinstance(classes, list) or not classes:
            raise ModelError('"classes" must be a nonempty array')
        out = []
        for c in classes:
            stream = ArrivalStreamSpec(
                p=float(c["p"]),
                alpha=tuple(_entry_from_dict(e) for e in c["alpha"]),
                T=tuple(tuple(_entry_from_dict(e) for e in row) for row in c["T"]),
            )
            out.append(TrafficClass(stream, ServiceSpec(Pmf.from_dict(c["service"]))))
    except KeyError as exc:
        raise ModelError(f"model file is missing key {exc}") from None
    except (TypeError, ContractError) as exc:
        raise ModelError(f"malformed model file: {exc}") from None
    return SystemSpec(tuple(out))


def system_to_dict(spec: SystemSpec) -> dict:
    return {
        "classes": [
            {
                "p": stream.p,
                "alpha": [_entry_to_dict(e) for e in stream.alpha],
                "T": [[_entry_to_dict(e) for e in row] for row in stream.T],
                "service": service.pmf.to_dict(),
            }
            for stream, service in spec.classes
        ]
    }


def load_system(path) -> SystemSpec:
    """Read a model file; JSON syntax errors propagate as ``json.JSONDecodeError``."""
    return system_from_dict(json.loads(Path(path).read_text()))


def dump_system(spec: SystemSpec, path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(spec), indent=2) + "\n")
