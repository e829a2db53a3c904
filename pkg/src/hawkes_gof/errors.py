"""Exception taxonomy for the package.

Every failure mode that callers are expected to branch on gets its own class.
The CLI maps these onto process exit codes: data and input problems exit 2,
numerical failures exit 3, usage errors exit 1.
"""

from __future__ import annotations


class HawkesGofError(Exception):
    """Base class for all package errors."""


# ---------------------------------------------------------------------------
# data / input errors (CLI exit code 2)


class DataError(HawkesGofError):
    """Base class for invalid input data or configuration."""


class NonPositiveHorizon(DataError):
    """Observation horizon is not a finite positive number."""


class TimeOutOfRange(DataError):
    """An event time lies outside (0, horizon] or is not finite."""


class HorizonMismatch(DataError):
    """Sequences that must share a horizon do not."""


class EmptySequence(DataError):
    """A sequence that must contain events is empty."""


class AllEmpty(DataError):
    """Every sequence in a dataset is empty; nothing can be estimated."""


class InsufficientSequences(DataError):
    """Fewer sequences than the statistic's degrees of freedom require."""


class DimensionMismatch(DataError):
    """Array shapes or parameter dimensions do not agree."""


class ParseError(DataError):
    """A data file could not be parsed.

    Carries the 1-based line number and a short reason.
    """

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyFile(DataError):
    """A data file contains no records."""


# ---------------------------------------------------------------------------
# numerical errors (CLI exit code 3)


class NumericalError(HawkesGofError):
    """Base class for numerical failures."""


class DomainError(NumericalError):
    """An argument lies outside a function's mathematical domain."""


class NonFiniteLogArgument(NumericalError):
    """A log-likelihood term required log of a non-positive number."""


class NonFiniteDerivative(NumericalError):
    """A score or Hessian entry evaluated to NaN or Inf."""


class SingularCovariance(NumericalError):
    """The sandwich covariance cannot be inverted reliably.

    ``matrix_name`` identifies the offending factor and
    ``condition_number`` its estimated 2-norm condition number
    (may be inf).
    """

    def __init__(self, matrix_name: str, condition_number: float,
                 detail: str = ""):
        self.matrix_name = matrix_name
        self.condition_number = condition_number
        msg = (f"{matrix_name} has condition number {condition_number:.3e}"
               f" (threshold 1e12)")
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)


class UnstableKernel(NumericalError):
    """Branching ratio >= 1; simulation would not terminate."""


class DivergedStep(NumericalError):
    """Gradient ascent could not find an uphill step."""


# ---------------------------------------------------------------------------
# warnings


class NoConvergence(UserWarning):
    """An iterative fit stopped at max_iter without meeting tolerance."""


class DegenerateProcess(UserWarning):
    """One component process has no events; its parameters are conventions."""
