"""Exact mean-value analysis and slot-level simulation of discrete-time
multiclass priority queues fed by batch Markovian arrival streams."""

from .analytic import (
    StreamMoments,
    SystemMoments,
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
from .errors import (
    ContractError,
    DegenerateInputError,
    InstabilityError,
    ModelError,
    PrioqError,
    ShapeMismatchError,
    UnsupportedMetricError,
)
from .model import (
    ArrivalStreamSpec,
    Pmf,
    ServiceSpec,
    SystemSpec,
    TransitionEntry,
    ValidationReport,
    build_iid_active_stream,
    build_iid_stream,
    equilibrium_mean,
    factorial_moment,
    load_system,
    validate_system,
)
from .priority import (
    ClassReport,
    SystemReport,
    completion_time_mean,
    d_pr_mean,
    remaining_service_mean,
    system_report,
    u_np_mean,
    u_pr_mean,
    w_np_mean,
    w_pr_mean,
)
from .special import special_case_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_") and name not in {"analytic", "errors", "model", "priority", "special"}]
