"""Interval-splitting processes on [0, 1]: simulation plus limit-curve analysis.

A process repeatedly picks one of the current intervals through a
size-biased choice rule and splits it at a uniform point.  This package
provides:

* :class:`PsiSpec` — the choice rule, a mixture of power-law terms;
* :class:`IntervalSet` — an order-statistics index over the intervals with
  O(log n) insertion, size-biased quantile lookup, and self-audit;
* :func:`run` / :class:`SimConfig` — replicated simulation with
  checkpointed occupancy counts, gap statistics, and rescaled-length ECDFs;
* :func:`solve_f` — shooting solver for the limiting rescaled-length
  distribution F and its calibration constant lambda;
* :func:`check_condition` — numerical verdict on the equidistribution
  sufficient condition, with closed-form bound checks attached;
* a command line front end (``psisplit``).

Two interchangeable computational backends exist: a compiled extension and
a pure-Python fallback.  They consume random draws in the same order and
evaluate floating-point expressions identically, so results are
bit-for-bit equal; :func:`backend_name` reports which one is active.
"""

from .errors import (
    AuditError,
    ConfigError,
    DomainError,
    DuplicatePointError,
    NumericalBlowupError,
    PsiSplitError,
    SingularityError,
    SolverError,
    StateError,
)
from .psi_model import (
    PRESET_WEIGHTS,
    CurvatureReport,
    PsiSpec,
    preset,
    spec_from_any,
    two_term,
    uniform_min_geometric,
)
from .interval_engine import (
    AuditReport,
    IntervalRef,
    IntervalSet,
    Side,
    SplitRecord,
    available_backends,
    backend_name,
)
from .simulator import (
    DEFAULT_ALPHAS,
    KAKUTANI,
    DirectRule,
    RunResult,
    SimConfig,
    TrajectoryStats,
    arrival_times,
    rule_label,
    run,
    step_direct,
    step_kakutani,
    step_psi,
)
from .limit_solver import (
    CurveResiduals,
    LimitCurve,
    build_grid,
    default_z_max,
    integrate_given_lambda,
    solve_f,
    validate_curve,
)
from .condition_checker import (
    VERDICT_FAIL,
    VERDICT_INCONCLUSIVE,
    VERDICT_PASS,
    ConditionReport,
    BoundCheck,
    ScanRow,
    check_condition,
    check_closed_form_bounds,
    condition_ratio,
    pinch_thresholds,
    ratio_zero_limit,
    scan_family,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "PsiSplitError",
    "ConfigError",
    "DomainError",
    "DuplicatePointError",
    "StateError",
    "SolverError",
    "NumericalBlowupError",
    "SingularityError",
    "AuditError",
    # choice rules
    "PsiSpec",
    "CurvatureReport",
    "PRESET_WEIGHTS",
    "preset",
    "two_term",
    "uniform_min_geometric",
    "spec_from_any",
    # interval index
    "IntervalSet",
    "IntervalRef",
    "SplitRecord",
    "AuditReport",
    "Side",
    "backend_name",
    # simulation
    "SimConfig",
    "DirectRule",
    "KAKUTANI",
    "DEFAULT_ALPHAS",
    "RunResult",
    "TrajectoryStats",
    "run",
    "rule_label",
    "arrival_times",
    "available_backends",
    "step_psi",
    "step_direct",
    "step_kakutani",
    # limit curve
    "LimitCurve",
    "CurveResiduals",
    "solve_f",
    "integrate_given_lambda",
    "validate_curve",
    "build_grid",
    "default_z_max",
    # condition checking
    "ConditionReport",
    "BoundCheck",
    "ScanRow",
    "check_condition",
    "condition_ratio",
    "check_closed_form_bounds",
    "ratio_zero_limit",
    "pinch_thresholds",
    "scan_family",
    "VERDICT_PASS",
    "VERDICT_FAIL",
    "VERDICT_INCONCLUSIVE",
]
