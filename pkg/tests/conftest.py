import numpy as np
import pytest

from prioq.model import (
    Pmf,
    ServiceSpec,
    SystemSpec,
    build_iid_active_stream,
    build_iid_stream,
)


def two_class_iid() -> SystemSpec:
    """Bernoulli(0.2) arrivals with unit service over Bernoulli(0.25) arrivals with two-slot service."""
    return SystemSpec.of(
        (build_iid_stream(Pmf.bernoulli(0.2)), ServiceSpec.deterministic(1)),
        (build_iid_stream(Pmf.bernoulli(0.25)), ServiceSpec.deterministic(2)),
    )


def half_active_stream(batch: int = 1):
    """Idle and active states each persist with probability one half (T = 1 - p, so arrivals are i.i.d. per slot)."""
    return build_iid_active_stream(0.5, [1.0], [[0.5]], Pmf.point(batch))


@pytest.fixture
def fixture_system():
    return two_class_iid()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
