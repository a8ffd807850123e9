# app/core/errors.py

from typing import Any, Sequence


class PatchyError(Exception):
    """Base class for every error raised by the model code."""


class PointOutsideDomain(PatchyError, ValueError):
    pass


class PointOnInterface(PatchyError, ValueError):
    pass


class InvalidSampleCount(PatchyError, ValueError):
    pass


class InvalidResolution(PatchyError, ValueError):
    pass


class DimensionMismatch(PatchyError, ValueError):
    pass


class PreconditionUnmet(PatchyError, ValueError):
    pass


class NoConvergence(PatchyError):
    """An iteration ran out of budget (or stalled) before meeting its tolerance."""

    def __init__(self, message: str, estimate: Any = None, residual: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class NonPositiveIterate(PatchyError):
    pass


class EpsilonSearchFailed(PatchyError):
    pass


class BracketMismatch(PatchyError):
    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


class Disagreement(PatchyError):
    def __init__(self, message: str, max_pairwise: float):
        super().__init__(message)
        self.max_pairwise = max_pairwise


class NonMonotoneCrossing(PatchyError):
    def __init__(self, message: str, brackets: Sequence[tuple[float, float]]):
        super().__init__(message)
        self.brackets = list(brackets)


class InvariantViolation(PatchyError):
    pass


class ConfigParseError(PatchyError):
    pass


class ConfigValidationError(PatchyError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("Invalid scenario config:\n" + "\n".join(f"  - {p}" for p in self.problems))


class ReportIOError(PatchyError):
    def __init__(self, message: str, path: str):
        super().__init__(f"{message} ({path})")
        self.path = path


# Families used by the CLI to pick an exit status.
NUMERICAL_ERRORS = (
    NoConvergence,
    NonPositiveIterate,
    EpsilonSearchFailed,
    BracketMismatch,
    Disagreement,
    NonMonotoneCrossing,
    InvariantViolation,
    PreconditionUnmet,
)
CONFIG_ERRORS = (ConfigParseError, ConfigValidationError)
