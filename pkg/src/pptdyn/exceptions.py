"""Exception hierarchy for pptdyn."""

from typing import Any, Optional


class PptdynError(Exception):
    """Base class for all pptdyn errors."""


class LabelError(PptdynError, KeyError):
    """Unknown subsystem label or label collision."""

    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class DimensionError(PptdynError, ValueError):
    """Shape, dimension or wiring mismatch."""


class NotHermitianError(PptdynError, ValueError):
    """Matrix is not Hermitian within tolerance."""


class InvalidObjectError(PptdynError, ValueError):
    """A constructor precondition failed (Kraus completeness, POVM sum, witness parts, ...)."""


class ProgramError(PptdynError, ValueError):
    """Conic program is ill-posed."""


class SolverError(PptdynError, RuntimeError):
    """A solve that had to be optimal was not."""

    def __init__(self, message: str, solution: Any = None, dump: Optional[str] = None):
        super().__init__(message)
        self.solution = solution
        self.dump = dump


class SamplingError(PptdynError, RuntimeError):
    """Random instance generation ran out of attempts."""


class BoundViolation(PptdynError, AssertionError):
    """A proven inequality failed numerically."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class PreconditionError(PptdynError, ValueError):
    """Scenario inputs do not meet the stated preconditions."""


class ConfigurationError(PptdynError, ValueError):
    """Settings or tolerance profile could not be loaded."""


class DocumentError(PptdynError, ValueError):
    """A Choi document failed validation. `errors` holds (path, reason) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {reason}" for path, reason in self.errors))
