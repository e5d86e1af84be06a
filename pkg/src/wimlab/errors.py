"""Exception types shared across wimlab.

Every failure mode that callers are expected to handle programmatically gets
its own class so that tests (and the CLI exit-code mapping) can discriminate
without string matching.  ``WimlabError`` is the common base; ``ConfigError``
is the only subtree that maps to CLI exit code 2, everything else maps to 3.
"""

from __future__ import annotations


class WimlabError(Exception):
    """Base class for all wimlab-specific errors."""


class ConfigError(WimlabError):
    """Malformed user input: unknown family/field, bad flag value, bad JSON."""


class DomainError(WimlabError):
    """Parameter vector outside the family's admissible domain."""


class DimensionMismatch(WimlabError):
    """Array/parameter shapes inconsistent with the family dimension."""


class NotSmooth(WimlabError):
    """Operation requires smoothness the model lacks (atoms, kinks)."""


class NotWellDefined(WimlabError):
    """Quantity does not exist for this family/component (e.g. divergent FIM).

    Attributes
    ----------
    component : int | None
        Index of the offending parameter component, when the failure is
        attributable to a single component.
    """

    def __init__(self, message: str, component: int | None = None):
        super().__init__(message)
        self.component = component


class QuadratureFailure(WimlabError):
    """Adaptive quadrature could not reach the requested tolerance."""


class DivisionByZero(WimlabError):
    """Evaluation point where the density vanishes (score undefined)."""


class NonCdfInput(WimlabError):
    """Callable handed to a distance routine is not a valid CDF."""


class StepTooSmall(WimlabError):
    """Finite-difference step produced an unreliable derivative estimate."""


class SingularWIM(WimlabError):
    """Information matrix is numerically singular; natural gradient undefined."""


class DomainEscape(WimlabError):
    """Online update left the parameter domain irrecoverably (non-finite)."""


class InsufficientData(WimlabError):
    """Not enough points/steps to perform the requested fit."""


class NonDifferentiableMetric(WimlabError):
    """Metric entries cannot be differentiated at the requested point."""


class SupportMismatch(WimlabError):
    """Reference measure does not dominate the model (relative entropy +inf)."""
