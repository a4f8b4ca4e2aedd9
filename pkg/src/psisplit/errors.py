"""Exception types shared across the package."""


class PsiSplitError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PsiSplitError, ValueError):
    """Invalid configuration (bad weights, malformed run setup, bad flags)."""


class DomainError(PsiSplitError, ValueError):
    """Argument outside the documented domain of an operation."""


class DuplicatePointError(PsiSplitError, ValueError):
    """A split point coincides with an existing interval endpoint."""


class StateError(PsiSplitError, RuntimeError):
    """Operation requires state the object does not have (e.g. no alpha set)."""


class SolverError(PsiSplitError, RuntimeError):
    """Calibration failed: bracket not found, target not monotone, no convergence."""


class NumericalBlowupError(SolverError):
    """Integration produced a non-finite state."""


class SingularityError(PsiSplitError, ArithmeticError):
    """Condition ratio undefined: choice density vanished at the evaluation point."""


class AuditError(PsiSplitError, RuntimeError):
    """Self-check of the interval index found a discrepancy beyond tolerance."""
