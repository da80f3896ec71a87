import math

import numpy as np
import pytest

from conftest import half_active_stream, two_class_iid
from oracles import active_period_by_steps, stationary_by_solve
from prioq.analytic import (
    active_period_moments,
    arrival_rate,
    busy_cycle_moments,
    conservation_rhs,
    single_class_unfinished,
    single_class_wait,
    stationary_split,
    stream_moments,
    system_moments,
    total_unfinished_mean,
)
from prioq.errors import InstabilityError
from prioq.generators import random_iid_system, random_system
from prioq.model import (
    Pmf,
    ServiceSpec,
    SystemSpec,
    build_iid_active_stream,
    build_iid_stream,
    factorial_moment,
)

UNIT = ServiceSpec.deterministic(1)


# ---- stationary split -------------------------------------------------------


def test_split_of_half_active_stream():
    pi0, pi1 = stationary_split(half_active_stream())
    assert pi0 == pytest.approx(0.5, abs=1e-12)
    assert pi1 == pytest.approx([0.5], abs=1e-12)


def test_split_alternating_idle_and_active():
    stream = build_iid_active_stream(0.0, [1.0], [[0.0]], Pmf.point(1))
    pi0, pi1 = stationary_split(stream)
    assert (pi0, pi1[0]) == pytest.approx((0.5, 0.5), abs=1e-12)


def test_split_of_iid_stream_is_its_marginal():
    pi0, pi1 = stationary_split(build_iid_stream(Pmf.bernoulli(0.2)))
    assert (pi0, pi1[0]) == pytest.approx((0.8, 0.2), abs=1e-12)


def test_split_matches_linear_solve(rng):
    for _ in range(30):
        stream = random_system(rng, 1).classes[0].stream
        pi0, pi1 = stationary_split(stream)
        pi = stationary_by_solve(stream.full_matrix())
        assert np.allclose(np.r_[pi0, pi1], pi, atol=1e-10)
        assert pi0 + pi1.sum() == pytest.approx(1.0, abs=1e-12)


def test_rate_matches_explicit_assembly(rng):
    for _ in range(30):
        stream = random_system(rng, 1).classes[0].stream
        pi = stationary_by_solve(stream.full_matrix())
        assembled = pi @ stream.arrival_moment_matrix() @ np.ones(stream.M + 1)
        assert arrival_rate(stream) == pytest.approx(assembled, abs=1e-10)


# ---- active periods ---------------------------------------------------------


def test_active_period_of_half_active_stream():
    ap = active_period_moments(half_active_stream())
    assert (ap.EC, ap.ELam, ap.EtC, ap.EtLam, ap.ECLam, ap.ELamTC) == pytest.approx((2, 2, 1, 1, 6, 1), abs=1e-12)


def test_single_slot_active_period():
    ap = active_period_moments(build_iid_active_stream(0.5, [1.0], [[0.0]], Pmf.point(1)))
    assert (ap.EC, ap.ELam, ap.EtC, ap.EtLam, ap.ECLam, ap.ELamTC) == pytest.approx((1, 1, 0, 0, 1, 0), abs=1e-12)


def test_single_slot_active_period_with_triple_batch():
    ap = active_period_moments(build_iid_active_stream(0.5, [1.0], [[0.0]], Pmf.point(3)))
    assert (ap.ELam, ap.EtLam, ap.ECLam) == pytest.approx((3, 1, 3), abs=1e-12)


def test_active_period_matches_slot_by_slot_oracle(rng):
    for _ in range(25):
        stream = random_system(rng, 1, max_states=4).classes[0].stream
        oracle = active_period_by_steps(stream)
        ap = active_period_moments(stream)
        for name, value in oracle.items():
            assert getattr(ap, name) == pytest.approx(value, rel=1e-9, abs=1e-9), name


# ---- per-stream moments -----------------------------------------------------


def test_iid_stream_moments():
    m = stream_moments(build_iid_stream(Pmf.bernoulli(0.2)), UNIT)
    assert (m.lam, m.rho, m.pi_on) == pytest.approx((0.2, 0.2, 0.2), abs=1e-12)


def test_half_active_stream_moments():
    m = stream_moments(half_active_stream(), UNIT)
    assert (m.lam, m.rho) == pytest.approx((0.5, 0.5), abs=1e-12)
    assert m.v0p == pytest.approx(0.0, abs=1e-12)
    assert m.delta2 == pytest.approx(0.0, abs=1e-12)


def test_stream_moment_invariants(rng):
    for _ in range(30):
        stream, service = random_system(rng, 1).classes[0]
        m = stream_moments(stream, service)
        assert m.pi0 + sum(m.pi1) == pytest.approx(1.0, abs=1e-12)
        assert m.pi_on == pytest.approx(sum(m.pi1), abs=1e-15)
        assert m.lam == pytest.approx(m.pi_on * m.ELam / m.EC, abs=1e-10)
        assert m.rho == pytest.approx(m.lam * m.mean_H, abs=1e-15)
        assert m.EC >= 1 and m.ELam >= 1 and m.EtC >= 0 and m.EtLam >= 0


def test_iid_stream_identities(rng):
    for _ in range(20):
        system = random_iid_system(rng, 1)
        stream, service = system.classes[0]
        a0 = stream.p
        m = stream_moments(stream, service)
        law = _marginal_law(stream)
        eq_A = factorial_moment(law, 2) / (2 * law.mean)
        assert m.EtC == pytest.approx((1 - a0) / a0, abs=1e-10)
        assert m.ELamTC == pytest.approx(m.lam / a0, abs=1e-10)
        assert m.ECLam / m.EC == pytest.approx(m.lam * (2 - a0) / (a0 * (1 - a0)), abs=1e-10)
        assert m.EtLam == pytest.approx(eq_A + m.lam / a0, abs=1e-10)


def _marginal_law(stream):
    cond = stream.T[0][0].batch
    q = 1 - stream.p
    return Pmf((0,) + cond.values, (1 - q,) + tuple(q * x for x in cond.probs))


def test_traffic_identity(rng):
    for _ in range(20):
        sm = system_moments(random_system(rng, 3))
        assert sum(m.lam * m.mean_H for m in sm.per_class) == pytest.approx(sm.rho_total, abs=1e-12)


# ---- unfinished work and conservation ---------------------------------------


def test_unfinished_work_of_half_active_unit_service():
    assert total_unfinished_mean(SystemSpec.of((half_active_stream(), UNIT))) == pytest.approx(0.5, abs=1e-12)


def test_unfinished_work_of_fixture():
    # conservation 11/12 + rho 0.7 + sum rho_k E[eq H_k] = 0.5 * 0.5
    assert total_unfinished_mean(two_class_iid()) == pytest.approx(11 / 12 + 0.7 + 0.25, abs=1e-9)


def test_single_class_unfinished_work_matches_general_form(rng):
    for _ in range(20):
        system = random_system(rng, 1)
        assert total_unfinished_mean(system) == pytest.approx(single_class_unfinished(*system.classes[0]), abs=1e-10)


def test_conservation_of_fixture():
    assert conservation_rhs(two_class_iid()) == pytest.approx(11 / 12, abs=1e-9)


def test_single_class_conservation_is_load_times_wait(rng):
    for _ in range(20):
        system = random_system(rng, 1)
        m = system_moments(system).per_class[0]
        assert conservation_rhs(system) == pytest.approx(m.rho * single_class_wait(*system.classes[0]), abs=1e-10)


def test_conservation_identity(rng):
    for _ in range(30):
        system = random_system(rng, int(rng.integers(1, 4)))
        sm = system_moments(system)
        rhs = sm.EU - sm.rho_total - sum(m.rho * m.eq_mean_H for m in sm.per_class)
        assert conservation_rhs(system) == pytest.approx(rhs, abs=1e-12)


def test_overloaded_system_is_rejected():
    system = SystemSpec.of((build_iid_stream(Pmf.bernoulli(0.6)), ServiceSpec.deterministic(2)))
    with pytest.raises(InstabilityError) as info:
        total_unfinished_mean(system)
    assert info.value.rho == pytest.approx(1.2)


# ---- busy cycles --------------------------------------------------------------


def test_busy_cycle_mean_of_fixture():
    f1, _ = busy_cycle_moments(two_class_iid())
    assert f1 == pytest.approx(10 / 3, abs=1e-12)


def test_busy_cycle_mean_of_top_class():
    f1, _ = busy_cycle_moments(two_class_iid(), top_k=1)
    assert f1 == pytest.approx(1.25, abs=1e-12)


def test_busy_cycle_second_moment_of_half_active_stream():
    _, f2 = busy_cycle_moments(SystemSpec.of((half_active_stream(), UNIT)))
    assert f2 == pytest.approx(4.0, abs=1e-12)


def test_busy_cycle_restricts_to_top_classes(rng):
    for _ in range(10):
        system = random_system(rng, 3)
        for k in (1, 2, 3):
            assert busy_cycle_moments(system, k) == pytest.approx(busy_cycle_moments(system.subsystem(k)), abs=1e-12)


def test_busy_cycle_mean_at_least_one(rng):
    for _ in range(20):
        f1, _ = busy_cycle_moments(random_system(rng, 2))
        assert f1 >= 1 and math.isfinite(f1)


# ---- single-class wait --------------------------------------------------------


def test_single_class_wait_bernoulli_unit_service():
    assert single_class_wait(build_iid_stream(Pmf.bernoulli(0.2)), UNIT) == pytest.approx(0.0, abs=1e-12)


def test_single_class_wait_half_active_unit_service_is_zero():
    # each slot brings at most one unit of work, so unfinished work never exceeds one
    assert single_class_wait(half_active_stream(), UNIT) == pytest.approx(0.0, abs=1e-12)


def test_single_class_wait_bernoulli_arrivals_two_slot_service():
    # discrete-time Geo/G/1 mean wait: lambda E[H(H-1)] / (2 (1 - rho))
    q = 0.3
    w = single_class_wait(build_iid_stream(Pmf.bernoulli(q)), ServiceSpec.deterministic(2))
    rho = 2 * q
    residual = q * factorial_moment(Pmf.point(2), 2) / 2
    assert w == pytest.approx(residual / (1 - rho), abs=1e-12)
